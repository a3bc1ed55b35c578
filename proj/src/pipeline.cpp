#include "kinfer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kinfer/rng.hpp"

namespace kinfer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// A profile that is exact at the sampling instants can still hide a pole
// between them; its derivative there is useless as a rate estimate.
bool smooth_profile(const Expr& profile, std::span<const double> times, std::span<const double> measured)
{
    constexpr std::size_t kRefine = 20;
    double lo = measured.front(), hi = measured.front();
    for (double v : measured) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double margin = hi - lo + 1.0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        for (std::size_t k = 0; k <= kRefine; ++k) {
            const double t[1] = {times[i] + (times[i + 1] - times[i]) * static_cast<double>(k) / kRefine};
            const double v = evaluate(profile, t);
            if (!std::isfinite(v) || v < lo - margin || v > hi + margin)
                return false;
        }
    return true;
}

enum Stage : std::uint64_t { ProfileSearch = 1, ProfileFitStage, RateSearch, RateFitStage, Design };

void select(IterationResult& out, std::vector<FittedModel> candidates)
{
    if (candidates.empty())
        throw std::runtime_error("no rate model could be fitted");
    out.finalists = rank(candidates, CriterionKind{Criterion::AIC});
    out.best = out.finalists.front();
    if (out.finalists.size() > 1)
        out.runner_up = out.finalists[1];
}

}  // namespace

std::string_view method_name(Method m)
{
    return m == Method::Strong ? "adok-s" : "adok-w";
}

Method parse_method(std::string_view text)
{
    if (text == "adok-s")
        return Method::Strong;
    if (text == "adok-w")
        return Method::Weak;
    throw std::invalid_argument("unknown method '" + std::string(text) + "' (expected adok-s or adok-w)");
}

Diagnostics trajectory_diagnostics(const Expr& rate, const Dataset& data, const IntegratorSettings& settings)
{
    Diagnostics d;
    const auto predicted = predict_weak(rate, data, settings);
    std::size_t cells = 0;
    for (std::size_t e = 0; e < predicted.size(); ++e) {
        const Matrix& obs = data.experiments[e].conc;
        const double r = rss(predicted[e], obs);
        d.rows += obs.rows();
        cells += obs.rows() * obs.cols();
        d.integration_ok = d.integration_ok && std::isfinite(r);
        d.rss += r;
        d.experiment_rmse.push_back(std::sqrt(r / static_cast<double>(obs.rows() * obs.cols())));
    }
    d.rmse = cells > 0 ? std::sqrt(d.rss / static_cast<double>(cells)) : kInf;
    return d;
}

RateEstimates estimate_rates(const Dataset& data, std::span<const ProfileFit> profiles, const RatePolicy& policy,
                             std::vector<std::size_t>* excluded)
{
    const std::size_t ns = data.species.size();
    if (!policy.pooled && policy.reference >= ns)
        throw std::invalid_argument("reference species out of range");
    RateEstimates out;
    out.states = Matrix(0, ns);
    for (std::size_t e = 0; e < data.experiments.size(); ++e) {
        const auto& exp = data.experiments[e];
        std::vector<const ProfileFit*> by_species(ns, nullptr);
        for (const auto& p : profiles)
            if (p.experiment == e)
                by_species[p.species] = &p;
        std::vector<std::size_t> use;
        for (std::size_t s = 0; s < ns; ++s)
            if (by_species[s] && data.stoich[s] != 0.0 && (policy.pooled || s == policy.reference))
                use.push_back(s);
        if (use.empty()) {
            if (excluded)
                excluded->push_back(e);
            continue;
        }
        std::vector<double> state(ns), per_species(use.size());
        for (std::size_t i = 0; i < exp.times.size(); ++i) {
            // median across species, so one poor profile cannot drag the estimate
            for (std::size_t k = 0; k < use.size(); ++k)
                per_species[k] = by_species[use[k]]->derivative[i] / data.stoich[use[k]];
            std::sort(per_species.begin(), per_species.end());
            const std::size_t mid = per_species.size() / 2;
            const double r = per_species.size() % 2 ? per_species[mid]
                                                     : 0.5 * (per_species[mid - 1] + per_species[mid]);
            for (std::size_t s = 0; s < ns; ++s)
                state[s] = by_species[s] ? by_species[s]->fitted[i] : exp.conc(i, s);
            bool finite = std::isfinite(r);
            for (double v : state)
                finite = finite && std::isfinite(v);
            if (!finite)
                continue;
            out.states.append_row(state);
            out.rates.push_back(r);
            out.experiment.push_back(e);
            out.times.push_back(exp.times[i]);
        }
    }
    return out;
}

IterationResult strong_iteration(const Dataset& data, const DiscoveryBudgets& budgets, std::size_t iteration)
{
    if (data.empty())
        throw std::invalid_argument("dataset has no experiments");
    data.validate();
    const std::size_t ns = data.species.size();
    IterationResult out;
    out.method = Method::Strong;
    out.iteration = iteration;
    out.dataset_size = data.experiments.size();

    for (std::size_t e = 0; e < data.experiments.size(); ++e) {
        const auto& exp = data.experiments[e];
        for (std::size_t s = 0; s < ns; ++s) {
            ProfileProblem problem(exp.times, exp.conc.column(s));
            GpConfig gp = budgets.profile_gp;
            gp.seed = derive_seed(budgets.seed, {iteration, ProfileSearch, e, s});
            gp.exec = budgets.exec;
            const GpResult search = evolve(Grammar::profile(gp.complexity_cap), problem, gp);
            FitBudget fb = budgets.profile_fit;
            fb.seed = derive_seed(budgets.seed, {iteration, ProfileFitStage, e, s});
            fb.exec = budgets.exec;
            auto fins = finalists(search.hall, problem, fb);
            std::erase_if(fins, [&](const FittedModel& m) { return !smooth_profile(m.expr(), exp.times, exp.conc.column(s)); });
            if (fins.empty()) {
                out.warnings.push_back("experiment " + std::to_string(e + 1) + ", species " + data.species[s] +
                                       ": no profile could be fitted");
                continue;
            }
            ProfileFit pf;
            pf.experiment = e;
            pf.species = s;
            pf.model = rank(fins, CriterionKind{Criterion::AIC}).front();
            const Expr profile = pf.model.expr();
            const Expr slope = simplify(differentiate(profile, 0));
            for (double t : exp.times) {
                const double tv[1] = {t};
                pf.fitted.push_back(evaluate(profile, tv));
                pf.derivative.push_back(evaluate(slope, tv));
            }
            out.profiles.push_back(std::move(pf));
        }
    }

    out.rates = estimate_rates(data, out.profiles, budgets.rate_policy, &out.excluded_experiments);
    for (auto e : out.excluded_experiments)
        out.warnings.push_back("experiment " + std::to_string(e + 1) + " excluded: no usable profile");
    if (out.rates.rates.empty())
        throw std::runtime_error("no rate estimates could be formed");
    out.experiments_used = data.experiments.size() - out.excluded_experiments.size();

    StrongProblem problem(out.rates.states, out.rates.rates);
    GpConfig gp = budgets.rate_gp;
    gp.seed = derive_seed(budgets.seed, {iteration, RateSearch});
    gp.exec = budgets.exec;
    GpResult search = evolve(Grammar::rate(data.species, gp.complexity_cap), problem, gp);
    FitBudget fb = budgets.rate_fit;
    fb.seed = derive_seed(budgets.seed, {iteration, RateFitStage});
    fb.exec = budgets.exec;
    std::vector<DroppedFinalist> dropped;
    auto fins = finalists(search.hall, problem, fb, &dropped);
    for (const auto& d : dropped)
        out.warnings.push_back("finalist " + d.expression + " dropped: " + d.reason);
    out.evolution_log = std::move(search.log);
    out.hall = std::move(search.hall);
    select(out, std::move(fins));
    out.diagnostics = trajectory_diagnostics(out.best.expr(), data, budgets.weak_fit_integrator);
    return out;
}

IterationResult weak_iteration(const Dataset& data, const DiscoveryBudgets& budgets, std::size_t iteration)
{
    if (data.empty())
        throw std::invalid_argument("dataset has no experiments");
    data.validate();
    IterationResult out;
    out.method = Method::Weak;
    out.iteration = iteration;
    out.dataset_size = data.experiments.size();
    out.experiments_used = data.experiments.size();

    const WeakProblem coarse(data, budgets.weak_gp_integrator);
    GpConfig gp = budgets.weak_gp;
    gp.seed = derive_seed(budgets.seed, {iteration, RateSearch});
    gp.exec = budgets.exec;
    GpResult search = evolve(Grammar::rate(data.species, gp.complexity_cap), coarse, gp);

    const WeakProblem fine(data, budgets.weak_fit_integrator);
    FitBudget fb = budgets.weak_fit;
    fb.seed = derive_seed(budgets.seed, {iteration, RateFitStage});
    fb.exec = budgets.exec;
    std::vector<DroppedFinalist> dropped;
    auto fins = finalists(search.hall, fine, fb, &dropped);
    for (const auto& d : dropped)
        out.warnings.push_back("finalist " + d.expression + " dropped: " + d.reason);
    out.evolution_log = std::move(search.log);
    out.hall = std::move(search.hall);
    select(out, std::move(fins));
    out.diagnostics = trajectory_diagnostics(out.best.expr(), data, budgets.weak_fit_integrator);
    return out;
}

IterationResult run_iteration(Method method, const Dataset& data, const DiscoveryBudgets& budgets,
                              std::size_t iteration)
{
    return method == Method::Strong ? strong_iteration(data, budgets, iteration)
                                    : weak_iteration(data, budgets, iteration);
}

void LoopConfig::validate() const
{
    if (max_iterations < 1)
        throw std::invalid_argument("max_iterations must be at least 1");
    if (accept_rmse && !(*accept_rmse >= 0.0))
        throw std::invalid_argument("accept threshold must be non-negative");
}

LoopHistory run_loop(const ReactionSystem* truth, const Dataset& initial, Method method, const LoopConfig& config,
                     const DiscoveryBudgets& budgets, const std::function<void(const LoopStep&)>& on_step)
{
    config.validate();
    if (initial.empty())
        throw std::invalid_argument("dataset has no experiments");
    LoopHistory h;
    h.data = initial;
    const double threshold = config.accept_rmse.value_or(1.5 * initial.noise.std_dev);

    std::vector<std::vector<double>> ics;
    for (const auto& e : initial.experiments)
        ics.push_back(e.design.initial);
    const DesignSpace space = config.space.value_or(DesignSpace::around(ics));
    space.validate(initial.species.size());

    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        LoopStep step;
        step.result = run_iteration(method, h.data, budgets, it);
        step.accepted = step.result.diagnostics.integration_ok && step.result.diagnostics.rmse <= threshold;
        auto finish = [&](std::string reason) {
            h.stop_reason = std::move(reason);
            h.steps.push_back(std::move(step));
            if (on_step)
                on_step(h.steps.back());
        };
        if (step.accepted) {
            finish("accepted");
            break;
        }
        if (it + 1 == config.max_iterations) {
            finish("iteration budget exhausted");
            break;
        }
        if (!step.result.runner_up) {
            finish("no runner-up model to design against");
            break;
        }
        ProposalOptions opts = config.proposal;
        opts.seed = derive_seed(budgets.seed, {it, Design});
        opts.exec = budgets.exec;
        for (const auto& e : h.data.experiments)
            opts.extra_starts.push_back(e.design.initial);
        try {
            step.proposal = propose_experiment(step.result.best, *step.result.runner_up, h.data.stoich, space, opts);
        } catch (const NoProposal& err) {
            finish(std::string("design failed: ") + err.what());
            break;
        }
        if (step.proposal->degenerate) {
            finish("best and runner-up models are indistinguishable");
            break;
        }
        if (!truth) {
            finish("no simulator to run the proposed experiment");
            break;
        }
        Experiment next;
        next.initial = step.proposal->x0;
        next.t0 = space.t0;
        next.tf = space.tf;
        next.n_samples = initial.experiments.front().design.n_samples;
        h.data.experiments.push_back(
            generate_experiment(*truth, next, h.data.noise, h.data.experiments.size()));
        h.steps.push_back(std::move(step));
        if (on_step)
            on_step(h.steps.back());
    }
    return h;
}

Matrix sample_points(std::span<const Interval> box, std::size_t count, std::uint64_t seed)
{
    Rng rng(seed, {0x9a1dULL});
    Matrix m(count, box.size());
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t s = 0; s < box.size(); ++s)
            m(i, s) = rng.uniform(box[s].lower, box[s].upper);
    return m;
}

FamilyMatch match_family(const Expr& candidate, const ParamTemplate& family, const Matrix& points, double tolerance,
                         std::uint64_t seed)
{
    FamilyMatch out;
    out.relative_rms = kInf;
    std::vector<double> values(points.rows());
    double scale = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        values[i] = evaluate(candidate, points.row(i));
        if (!std::isfinite(values[i]))
            return out;
        scale += values[i] * values[i];
    }
    scale = std::sqrt(scale / static_cast<double>(values.size()));
    if (scale == 0.0)
        return out;
    StrongProblem problem(points, values);
    FitBudget budget;
    budget.seed = seed;
    auto m = fit_template(problem, family, budget);
    if (!m)
        return out;
    out.theta = m->theta;
    out.relative_rms = std::sqrt(m->rss / static_cast<double>(values.size())) / scale;
    out.matches = out.relative_rms <= tolerance;
    // A degenerate member (some parameter fitted to zero) belongs to a
    // smaller family, so every parameter must matter on the grid.
    for (std::size_t j = 0; out.matches && j < m->theta.size(); ++j) {
        std::vector<double> theta = m->theta;
        theta[j] = 0.0;
        const Expr reduced = family.substitute(theta);
        double change = 0.0;
        for (std::size_t i = 0; i < points.rows(); ++i) {
            const double d = evaluate(reduced, points.row(i)) - values[i];
            change += std::isfinite(d) ? d * d : kInf;
        }
        if (!(std::sqrt(change / static_cast<double>(values.size())) / scale > 10.0 * tolerance))
            out.matches = false;
    }
    return out;
}

}  // namespace kinfer
