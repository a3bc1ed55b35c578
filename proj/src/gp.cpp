#include "kinfer/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "kinfer/csv.hpp"

namespace kinfer {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::vector<Op> operators_of(const Grammar& g, bool unary)
{
    std::vector<Op> ops;
    for (Op op : g.operators)
        if ((arity(op) == 1) == unary)
            ops.push_back(op);
    return ops;
}

Expr random_terminal(const Grammar& g, Rng& rng)
{
    if (!g.variables.empty() && rng.bernoulli(0.5))
        return Expr::variable(rng.below(g.variables.size()));
    return Expr::constant(rng.uniform(g.constants.lower, g.constants.upper));
}

Expr grow(const Grammar& g, const std::vector<Op>& binary, const std::vector<Op>& unary, std::size_t depth,
          bool full, Rng& rng)
{
    const std::size_t functions = binary.size() + unary.size();
    if (depth <= 1 || functions == 0)
        return random_terminal(g, rng);
    if (!full) {
        const double terminals = 2.0;
        if (rng.uniform() < terminals / (terminals + static_cast<double>(functions)))
            return random_terminal(g, rng);
    }
    const auto pick = static_cast<std::size_t>(rng.below(functions));
    if (pick < binary.size()) {
        Expr l = grow(g, binary, unary, depth - 1, full, rng);
        Expr r = grow(g, binary, unary, depth - 1, full, rng);
        return Expr::binary(binary[pick], l, r);
    }
    return Expr::unary(unary[pick - binary.size()], grow(g, binary, unary, depth - 1, full, rng));
}

/// Node index, preferring operators 90% of the time as in Koza's scheme.
std::size_t pick_node(const Expr& e, Rng& rng)
{
    const auto nodes = e.nodes();
    std::size_t internal = 0;
    for (const auto& n : nodes)
        internal += is_leaf(n.op) ? 0 : 1;
    if (internal == 0 || rng.bernoulli(0.1))
        return static_cast<std::size_t>(rng.below(nodes.size()));
    auto k = rng.below(internal);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (!is_leaf(nodes[i].op) && k-- == 0)
            return i;
    return nodes.size() - 1;
}

Expr point_mutation(const Expr& e, const Grammar& g, const std::vector<Op>& binary, const std::vector<Op>& unary,
                    Rng& rng)
{
    const std::size_t i = static_cast<std::size_t>(rng.below(e.size()));
    const Node& n = e.nodes()[i];
    std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
    if (is_leaf(n.op)) {
        const Expr t = random_terminal(g, rng);
        nodes[i].op = t.root().op;
        nodes[i].index = t.root().index;
        nodes[i].value = t.root().value;
    } else {
        const auto& pool = arity(n.op) == 2 ? binary : unary;
        nodes[i].op = pool[rng.below(pool.size())];
    }
    return Expr::from_nodes(std::move(nodes));
}

Expr jitter(const Expr& e, double scale, Rng& rng)
{
    std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
    for (auto& n : nodes)
        if (n.op == Op::Const)
            n.value += scale * (n.value == 0.0 ? 1.0 : std::abs(n.value)) * rng.normal();
    return Expr::from_nodes(std::move(nodes));
}

struct Individual {
    Expr expr;
    double fitness = kInf;
};

bool better(const Individual& a, const Individual& b)
{
    if (a.fitness != b.fitness)
        return a.fitness < b.fitness;
    return a.expr.size() < b.expr.size();
}

Individual score_individual(const Expr& e, const Problem& problem, std::size_t polish_evals)
{
    const ParamTemplate tmpl = extract_template(e);
    std::vector<double> theta = constants_of(e);
    double value;
    if (tmpl.dimension == 0 || polish_evals == 0) {
        value = problem.objective(tmpl.skeleton, theta);
    } else {
        Residuals res = [&](std::span<const double> th, std::span<double> out) {
            return problem.residuals(tmpl.skeleton, th, out);
        };
        LocalResult l = polish_least_squares(res, problem.residual_count(), theta, polish_evals);
        value = l.value;
        theta = std::move(l.theta);
    }
    if (!std::isfinite(value))
        return {e, kInf};
    return {tmpl.substitute(theta), value};
}

}  // namespace

void GpConfig::validate() const
{
    if (population < 2)
        throw std::invalid_argument("population must be at least 2");
    if (tournament_size < 1)
        throw std::invalid_argument("tournament size must be positive");
    if (complexity_cap < 1)
        throw std::invalid_argument("complexity cap must be positive");
    for (double p : {p_crossover, p_subtree_mutation, p_point_mutation, p_constant_jitter})
        if (!is_probability(p))
            throw std::invalid_argument("operator probabilities must lie in [0, 1]");
    if (p_crossover + p_subtree_mutation + p_point_mutation + p_constant_jitter > 1.0 + 1e-12)
        throw std::invalid_argument("operator probabilities sum above 1");
    if (init_min_depth < 1 || init_max_depth < init_min_depth)
        throw std::invalid_argument("bad initial depth range");
    if (!(jitter_scale >= 0.0))
        throw std::invalid_argument("jitter scale must be non-negative");
}

GpConfig GpConfig::profile()
{
    GpConfig c;
    c.complexity_cap = 15;
    c.init_max_depth = 5;
    return c;
}

GpConfig GpConfig::strong() { return GpConfig{}; }

GpConfig GpConfig::weak()
{
    GpConfig c;
    c.population = 200;
    c.generations = 40;
    return c;
}

bool HallOfFame::offer(const Expr& e, double fitness, std::size_t generation)
{
    const std::size_t k = complexity(e);
    if (!std::isfinite(fitness) || k < 1 || k > slots_.size())
        return false;
    auto& slot = slots_[k - 1];
    if (slot && slot->fitness <= fitness)
        return false;
    slot = HallOfFameEntry{e, fitness, generation};
    return true;
}

std::vector<HallOfFameEntry> HallOfFame::entries() const
{
    std::vector<HallOfFameEntry> out;
    for (const auto& s : slots_)
        if (s)
            out.push_back(*s);
    return out;
}

bool HallOfFame::empty() const noexcept
{
    return std::none_of(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); });
}

Expr random_expr(const Grammar& grammar, std::size_t max_depth, bool full, Rng& rng)
{
    return grow(grammar, operators_of(grammar, false), operators_of(grammar, true), max_depth, full, rng);
}

GpResult evolve(const Grammar& grammar, const Problem& problem, const GpConfig& config)
{
    grammar.validate();
    config.validate();
    const auto binary = operators_of(grammar, false);
    const auto unary = operators_of(grammar, true);
    const std::size_t cap = config.complexity_cap;
    const auto& names = grammar.variables;

    GpResult result{HallOfFame(cap), {}, 0};
    std::unordered_map<std::string, Individual> cache;

    auto fits = [&](const Expr& e) { return complexity(e) <= cap && grammar.admits(e); };

    // Scores a generation: unseen expressions are evaluated once each, in
    // parallel, then merged in index order.
    auto evaluate = [&](std::vector<Individual>& pop, std::size_t generation) {
        std::vector<std::string> keys(pop.size());
        std::vector<std::size_t> todo;
        std::unordered_map<std::string, std::size_t> pending;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            keys[i] = format(pop[i].expr, names);
            if (!cache.count(keys[i]) && pending.emplace(keys[i], todo.size()).second)
                todo.push_back(i);
        }
        std::vector<Individual> scored(todo.size());
        kernels::for_each_index(config.exec, todo.size(), [&](std::size_t k) {
            scored[k] = score_individual(pop[todo[k]].expr, problem, config.polish_evals);
        });
        for (std::size_t k = 0; k < todo.size(); ++k) {
            if (!fits(scored[k].expr))
                scored[k] = Individual{pop[todo[k]].expr, scored[k].fitness};
            result.hall.offer(scored[k].expr, scored[k].fitness, generation);
            cache.emplace(keys[todo[k]], scored[k]);
        }
        result.evaluations += todo.size();
        for (std::size_t i = 0; i < pop.size(); ++i)
            pop[i] = cache.at(keys[i]);
    };

    // Ramped half-and-half initial population.
    std::vector<Individual> pop;
    pop.reserve(config.population);
    for (const auto& e : config.injected) {
        if (pop.size() == config.population)
            break;
        if (!fits(e))
            throw std::invalid_argument("injected individual violates the grammar or complexity cap");
        pop.push_back({e, kInf});
    }
    const std::size_t depths = config.init_max_depth - config.init_min_depth + 1;
    for (std::size_t i = pop.size(); i < config.population; ++i) {
        Rng rng(config.seed, {0, i});
        const std::size_t depth = config.init_min_depth + i % depths;
        const bool full = (i / depths) % 2 == 0;
        Expr e;
        for (int attempt = 0; attempt < 20; ++attempt) {
            e = simplify(random_expr(grammar, depth, full && attempt < 10, rng));
            if (fits(e))
                break;
            e = random_terminal(grammar, rng);
        }
        pop.push_back({e, kInf});
    }
    evaluate(pop, 0);

    auto log_generation = [&](std::size_t generation) {
        for (const auto& entry : result.hall.entries())
            result.log.push_back({generation, complexity(entry.expr), entry.fitness});
    };
    log_generation(0);

    std::vector<Individual> next;
    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
        next.clear();
        next.push_back(*std::min_element(pop.begin(), pop.end(), better));
        if (config.hall_elitism)
            for (const auto& entry : result.hall.entries())
                if (next.size() < config.population / 2 && !(entry.expr == next.front().expr))
                    next.push_back({entry.expr, entry.fitness});
        const std::size_t elites = next.size();

        for (std::size_t i = elites; i < config.population; ++i) {
            Rng rng(config.seed, {gen, i});
            auto tournament = [&]() -> const Individual& {
                std::size_t best = static_cast<std::size_t>(rng.below(pop.size()));
                for (std::size_t k = 1; k < config.tournament_size; ++k) {
                    const auto c = static_cast<std::size_t>(rng.below(pop.size()));
                    if (better(pop[c], pop[best]))
                        best = c;
                }
                return pop[best];
            };
            const Individual& parent = tournament();
            const double u = rng.uniform();
            Expr child;
            if (u < config.p_crossover) {
                const Individual& donor = tournament();
                const std::size_t at = pick_node(parent.expr, rng);
                const std::size_t from = pick_node(donor.expr, rng);
                child = parent.expr.replace_subtree(at, donor.expr.subtree(from));
            } else if (u < config.p_crossover + config.p_subtree_mutation) {
                const std::size_t at = pick_node(parent.expr, rng);
                const std::size_t depth = 1 + static_cast<std::size_t>(rng.below(3));
                child = parent.expr.replace_subtree(at, grow(grammar, binary, unary, depth, false, rng));
            } else if (u < config.p_crossover + config.p_subtree_mutation + config.p_point_mutation) {
                child = point_mutation(parent.expr, grammar, binary, unary, rng);
            } else if (u < config.p_crossover + config.p_subtree_mutation + config.p_point_mutation +
                               config.p_constant_jitter) {
                child = jitter(parent.expr, config.jitter_scale, rng);
            } else {
                child = parent.expr;
            }
            child = simplify(child);
            next.push_back({fits(child) ? child : parent.expr, kInf});
        }
        evaluate(next, gen);
        std::swap(pop, next);
        log_generation(gen);
    }
    return result;
}

std::vector<FittedModel> finalists(const HallOfFame& hall, const Problem& problem, const FitBudget& budget,
                                   std::vector<DroppedFinalist>* dropped)
{
    std::vector<FittedModel> out;
    for (const auto& entry : hall.entries()) {
        const ParamTemplate tmpl = extract_template(entry.expr);
        const std::vector<std::vector<double>> guesses{constants_of(entry.expr)};
        auto m = fit_template(problem, tmpl, budget, guesses);
        if (m)
            out.push_back(std::move(*m));
        else if (dropped)
            dropped->push_back({format(entry.expr, {}), "no parameter vector evaluates"});
    }
    return out;
}

void write_evolution_log(const std::filesystem::path& path, const std::vector<EvolutionLogRow>& log)
{
    csv::Table t;
    t.header = {"generation", "complexity", "best_rss"};
    for (const auto& r : log)
        t.add({std::to_string(r.generation), std::to_string(r.complexity), csv::number(r.best, 12)});
    csv::write_file(path, t.str());
}

std::string hall_of_fame_json(const HallOfFame& hall, std::span<const std::string> names)
{
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : hall.entries())
        j.push_back({{"complexity", complexity(e.expr)}, {"expression", format(e.expr, names)}, {"fitness", e.fitness}});
    return j.dump(2);
}

}  // namespace kinfer
