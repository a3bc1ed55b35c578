#include "kinfer/mbdoe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "kinfer/rng.hpp"
#include "kinfer/system.hpp"

namespace kinfer {

namespace {

constexpr double kDegenerate = 1e-12;

bool preferred(double va, std::span<const double> xa, double vb, std::span<const double> xb)
{
    if (va != vb)
        return va > vb;
    return std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(), xb.end());
}

}  // namespace

void DesignSpace::validate(std::size_t n_species) const
{
    if (bounds.size() != n_species)
        throw std::invalid_argument("design space needs one interval per species");
    for (const auto& b : bounds)
        if (!(b.lower >= 0.0) || !(b.lower < b.upper))
            throw std::invalid_argument("design interval must satisfy 0 <= lower < upper");
    if (!(t0 < tf))
        throw std::invalid_argument("design window must satisfy t0 < tf");
    if (quadrature_points < 2)
        throw std::invalid_argument("at least two quadrature points are needed");
}

DesignSpace DesignSpace::around(std::span<const std::vector<double>> ics, double factor)
{
    if (ics.empty())
        throw std::invalid_argument("no initial conditions to size the design space");
    DesignSpace space;
    const std::size_t ns = ics.front().size();
    for (std::size_t s = 0; s < ns; ++s) {
        double hi = 0.0;
        for (const auto& ic : ics)
            hi = std::max(hi, ic.at(s));
        space.bounds.push_back({0.0, hi > 0.0 ? factor * hi : 1.0});
    }
    return space;
}

Discrepancy discrepancy(const Expr& rate_a, const Expr& rate_b, std::span<const double> stoich,
                        std::span<const double> x0, double t0, double tf, std::size_t points,
                        const IntegratorSettings& settings)
{
    if (x0.size() != stoich.size())
        throw std::invalid_argument("initial condition has the wrong dimension");
    if (points < 2 || !(t0 < tf))
        throw std::invalid_argument("bad quadrature grid");
    std::vector<double> grid(points);
    const double h = (tf - t0) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = i + 1 == points ? tf : t0 + h * static_cast<double>(i);

    const Trajectory a = integrate(RateOde{&rate_a, stoich, {}}, x0, t0, grid, settings);
    const Trajectory b = integrate(RateOde{&rate_b, stoich, {}}, x0, t0, grid, settings);
    Discrepancy out;
    const std::size_t rows = std::min(a.valid_rows, b.valid_rows);
    out.failed = rows < points;
    out.valid = rows >= 2;
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (std::size_t s = 0; s < stoich.size(); ++s) {
            const double d = a.at(i, s) - b.at(i, s);
            sq += d * d;
        }
        const double w = (i == 0 || i + 1 == points) ? 0.5 : 1.0;
        acc += w * sq;
    }
    out.value = acc * h;
    return out;
}

DesignProposal propose_experiment(const Expr& rate_a, const Expr& rate_b, std::span<const double> stoich,
                                  const DesignSpace& space, const ProposalOptions& options)
{
    const std::size_t ns = stoich.size();
    space.validate(ns);

    std::vector<std::vector<double>> starts;
    Rng rng(options.seed, {0x3d0eULL});
    const std::size_t m = options.starts;
    if (m > 0) {
        // One stratum per start in each coordinate, strata shuffled per axis.
        std::vector<std::vector<std::size_t>> perm(ns, std::vector<std::size_t>(m));
        for (auto& p : perm) {
            for (std::size_t k = 0; k < m; ++k)
                p[k] = k;
            for (std::size_t k = m; k > 1; --k)
                std::swap(p[k - 1], p[rng.below(k)]);
        }
        for (std::size_t k = 0; k < m; ++k) {
            std::vector<double> x(ns);
            for (std::size_t s = 0; s < ns; ++s) {
                const auto& b = space.bounds[s];
                const double u = (static_cast<double>(perm[s][k]) + rng.uniform()) / static_cast<double>(m);
                x[s] = b.lower + u * (b.upper - b.lower);
            }
            starts.push_back(std::move(x));
        }
    }
    for (auto x : options.extra_starts) {
        if (x.size() != ns)
            throw std::invalid_argument("extra start has the wrong dimension");
        for (std::size_t s = 0; s < ns; ++s)
            x[s] = std::clamp(x[s], space.bounds[s].lower, space.bounds[s].upper);
        starts.push_back(std::move(x));
    }
    if (starts.empty())
        throw std::invalid_argument("no design starts");

    auto objective = [&](std::span<const double> x) {
        const Discrepancy d =
            discrepancy(rate_a, rate_b, stoich, x, space.t0, space.tf, space.quadrature_points, options.settings);
        return d.valid && std::isfinite(d.value) ? d.value : -std::numeric_limits<double>::infinity();
    };

    std::vector<DesignStart> trace(starts.size());
    kernels::for_each_index(options.exec, starts.size(), [&](std::size_t k) {
        DesignStart& r = trace[k];
        r.start = starts[k];
        r.start_objective = objective(r.start);
        r.x0 = r.start;
        r.objective = r.start_objective;
        if (!std::isfinite(r.objective))
            return;
        // Compass search: try +/- step along each axis, halve on failure.
        std::vector<double> step(ns);
        for (std::size_t s = 0; s < ns; ++s)
            step[s] = options.initial_step * (space.bounds[s].upper - space.bounds[s].lower);
        std::size_t evals = 1;
        bool shrink = false;
        while (evals < options.max_evals_per_start) {
            bool moved = false;
            for (std::size_t s = 0; s < ns && !moved && evals < options.max_evals_per_start; ++s) {
                for (double dir : {1.0, -1.0}) {
                    std::vector<double> y = r.x0;
                    y[s] = std::clamp(y[s] + dir * step[s], space.bounds[s].lower, space.bounds[s].upper);
                    if (y[s] == r.x0[s])
                        continue;
                    const double v = objective(y);
                    ++evals;
                    if (v > r.objective) {
                        r.x0 = std::move(y);
                        r.objective = v;
                        moved = true;
                        break;
                    }
                }
            }
            if (!moved) {
                shrink = true;
                for (std::size_t s = 0; s < ns; ++s)
                    step[s] *= 0.5;
            }
            bool small = true;
            for (std::size_t s = 0; s < ns; ++s)
                small = small && step[s] < options.min_step * (space.bounds[s].upper - space.bounds[s].lower);
            if (shrink && small)
                break;
        }
    });

    const DesignStart* best = nullptr;
    for (const auto& r : trace)
        if (std::isfinite(r.objective) && (!best || preferred(r.objective, r.x0, best->objective, best->x0)))
            best = &r;
    if (!best)
        throw NoProposal("neither model could be integrated from any candidate initial condition");

    DesignProposal out;
    out.x0 = best->x0;
    out.objective = best->objective;
    out.degenerate = best->objective <= kDegenerate;
    out.integration_failed =
        discrepancy(rate_a, rate_b, stoich, out.x0, space.t0, space.tf, space.quadrature_points, options.settings)
            .failed;
    out.trace = std::move(trace);
    return out;
}

std::string proposal_json(const DesignProposal& p)
{
    nlohmann::ordered_json j;
    j["x0"] = p.x0;
    j["objective"] = p.objective;
    j["degenerate"] = p.degenerate;
    j["integration_failed"] = p.integration_failed;
    auto trace = nlohmann::ordered_json::array();
    for (const auto& t : p.trace) {
        nlohmann::ordered_json e;
        e["start"] = t.start;
        e["start_objective"] = std::isfinite(t.start_objective) ? nlohmann::ordered_json(t.start_objective)
                                                                 : nlohmann::ordered_json(nullptr);
        e["x0"] = t.x0;
        e["objective"] = std::isfinite(t.objective) ? nlohmann::ordered_json(t.objective)
                                                     : nlohmann::ordered_json(nullptr);
        trace.push_back(std::move(e));
    }
    j["trace"] = std::move(trace);
    return j.dump(2);
}

}  // namespace kinfer
