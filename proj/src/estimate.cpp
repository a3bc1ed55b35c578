#include "kinfer/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "kinfer/csv.hpp"

namespace kinfer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::string_view fit_kind_name(FitKind kind)
{
    switch (kind) {
    case FitKind::Profile: return "profile";
    case FitKind::Strong: return "strong";
    case FitKind::Weak: return "weak";
    }
    return "?";
}

double rss(std::span<const double> predicted, std::span<const double> observed)
{
    if (predicted.size() != observed.size())
        throw std::invalid_argument("rss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!std::isfinite(predicted[i]))
            return kInf;
        const double r = predicted[i] - observed[i];
        acc += r * r;
    }
    return std::isfinite(acc) ? acc : kInf;
}

double rss(const Matrix& predicted, const Matrix& observed)
{
    if (predicted.rows() != observed.rows() || predicted.cols() != observed.cols())
        throw std::invalid_argument("rss: shape mismatch");
    return rss(predicted.data(), observed.data());
}

double nll(std::span<const double> group_rss, std::size_t n)
{
    if (n < 1)
        throw std::invalid_argument("nll needs n >= 1");
    const double nn = static_cast<double>(n);
    double total = 0.0;
    for (double r : group_rss) {
        const double var = std::max(r / nn, kVarianceFloor);
        total += 0.5 * nn * std::log(2.0 * std::numbers::pi * var) + 0.5 * nn;
    }
    return total;
}

// ---------------------------------------------------------------------------

double Problem::objective(const Expr& model, std::span<const double> theta) const
{
    std::vector<double> r(residual_count());
    if (!residuals(model, theta, r))
        return kInf;
    double acc = 0.0;
    for (double v : r)
        acc += v * v;
    return std::isfinite(acc) ? acc : kInf;
}

std::vector<double> Problem::group_rss(const Expr& model, std::span<const double> theta) const
{
    std::vector<double> r(residual_count());
    if (!residuals(model, theta, r))
        return {};
    std::vector<double> groups(group_count(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i)
        groups[i % groups.size()] += r[i] * r[i];
    for (double g : groups)
        if (!std::isfinite(g))
            return {};
    return groups;
}

ProfileProblem::ProfileProblem(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values))
{
    if (times_.size() != values_.size() || times_.empty())
        throw std::invalid_argument("profile series must be nonempty with one value per time");
}

bool ProfileProblem::residuals(const Expr& model, std::span<const double> theta, std::span<double> out) const
{
    const std::span<const double> cols[1] = {times_};
    evaluate_rows(model, cols, theta, out);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isfinite(out[i]))
            return false;
        out[i] -= values_[i];
    }
    return true;
}

StrongProblem::StrongProblem(const Matrix& states, std::vector<double> rates) : rates_(std::move(rates))
{
    if (states.rows() != rates_.size() || rates_.empty())
        throw std::invalid_argument("one rate target per state row is required");
    for (std::size_t c = 0; c < states.cols(); ++c)
        columns_.push_back(states.column(c));
    for (const auto& c : columns_)
        views_.emplace_back(c);
}

bool StrongProblem::residuals(const Expr& model, std::span<const double> theta, std::span<double> out) const
{
    evaluate_rows(model, views_, theta, out);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isfinite(out[i]))
            return false;
        out[i] -= rates_[i];
    }
    return true;
}

WeakProblem::WeakProblem(const Dataset& data, IntegratorSettings settings)
    : data_(&data), stoich_(data.stoich), settings_(settings)
{
    if (data.empty())
        throw std::invalid_argument("weak-form fit needs at least one experiment");
    data.validate();
    for (const auto& e : data.experiments) {
        residuals_ += e.conc.rows() * e.conc.cols();
        samples_ += e.conc.rows();
    }
}

bool WeakProblem::residuals(const Expr& model, std::span<const double> theta, std::span<double> out) const
{
    RateOde ode{&model, stoich_, theta};
    std::size_t offset = 0;
    for (const auto& e : data_->experiments) {
        const auto start = e.conc.row(0);
        const Trajectory traj = integrate(ode, start, e.times.front(), e.times, settings_);
        if (!traj.ok())
            return false;
        const auto& obs = e.conc.data();
        for (std::size_t k = 0; k < obs.size(); ++k)
            out[offset + k] = traj.states[k] - obs[k];
        offset += obs.size();
    }
    return true;
}

// ---------------------------------------------------------------------------

std::optional<FittedModel> score(const Problem& problem, const ParamTemplate& tmpl, std::span<const double> theta)
{
    auto groups = problem.group_rss(tmpl.skeleton, theta);
    if (groups.empty())
        return std::nullopt;
    FittedModel m;
    m.tmpl = tmpl;
    m.theta.assign(theta.begin(), theta.end());
    m.rss = std::accumulate(groups.begin(), groups.end(), 0.0);
    m.n = problem.sample_count();
    m.nll = nll(groups, m.n);
    m.criteria = all_criteria(m.nll, tmpl.dimension, m.n);
    m.kind = problem.kind();
    m.group_rss = std::move(groups);
    return m;
}

std::optional<FittedModel> fit_template(const Problem& problem, const ParamTemplate& tmpl, const FitBudget& budget,
                                        std::span<const std::vector<double>> guesses, OptimumResult* trace)
{
    const Expr& model = tmpl.skeleton;
    Objective objective = [&](std::span<const double> theta) { return problem.objective(model, theta); };
    OptimumResult opt = fit(objective, tmpl.dimension, budget, {}, guesses);
    if (!opt.fittable)
        return std::nullopt;

    if (tmpl.dimension > 0) {
        Residuals res = [&](std::span<const double> theta, std::span<double> out) {
            return problem.residuals(model, theta, out);
        };
        const std::size_t evals = 40 * (tmpl.dimension + 1);
        LocalResult polished = polish_least_squares(res, problem.residual_count(), opt.theta, evals);
        opt.evaluations += polished.evaluations;
        if (polished.value < opt.value) {
            opt.value = polished.value;
            opt.theta = std::move(polished.theta);
        }
    }
    if (trace)
        *trace = opt;
    return score(problem, tmpl, opt.theta);
}

std::optional<FittedModel> fit_profile(const ParamTemplate& tmpl, std::span<const double> times,
                                       std::span<const double> values, const FitBudget& budget)
{
    ProfileProblem problem({times.begin(), times.end()}, {values.begin(), values.end()});
    return fit_template(problem, tmpl, budget);
}

std::optional<FittedModel> fit_rate_strong(const ParamTemplate& tmpl, const Matrix& states,
                                           std::span<const double> rates, const FitBudget& budget)
{
    StrongProblem problem(states, {rates.begin(), rates.end()});
    return fit_template(problem, tmpl, budget);
}

std::optional<FittedModel> fit_rate_weak(const ParamTemplate& tmpl, const Dataset& data,
                                         const IntegratorSettings& settings, const FitBudget& budget,
                                         std::span<const std::vector<double>> guesses)
{
    WeakProblem problem(data, settings);
    return fit_template(problem, tmpl, budget, guesses);
}

std::vector<FittedModel> rank(std::span<const FittedModel> models, const CriterionKind& kind)
{
    if (models.empty())
        throw std::invalid_argument("rank: no models");
    std::vector<double> value(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        try {
            value[i] = criterion(kind, models[i].nll, models[i].dimension(), models[i].n);
        } catch (const UndefinedCriterion&) {
            value[i] = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(value[i]))
            value[i] = kInf;
    }
    std::vector<std::size_t> order(models.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (value[a] != value[b])
            return value[a] < value[b];
        if (models[a].dimension() != models[b].dimension())
            return models[a].dimension() < models[b].dimension();
        return models[a].complexity() < models[b].complexity();
    });
    std::vector<FittedModel> out;
    out.reserve(models.size());
    for (auto i : order)
        out.push_back(models[i]);
    return out;
}

std::vector<Matrix> predict_weak(const Expr& rate, const Dataset& data, const IntegratorSettings& settings)
{
    std::vector<Matrix> out;
    for (const auto& e : data.experiments) {
        RateOde ode{&rate, data.stoich, {}};
        const Trajectory traj = integrate(ode, e.conc.row(0), e.times.front(), e.times, settings);
        Matrix m(e.times.size(), data.species.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < traj.valid_rows; ++i)
            for (std::size_t s = 0; s < m.cols(); ++s)
                m(i, s) = traj.at(i, s);
        out.push_back(std::move(m));
    }
    return out;
}

void write_fit_trace(const std::filesystem::path& path, const OptimumResult& result)
{
    csv::Table t;
    t.header = {"evaluation", "best"};
    for (const auto& e : result.trace)
        t.add({std::to_string(e.evaluation), csv::number(e.best, 17)});
    csv::write_file(path, t.str());
}

}  // namespace kinfer
