#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "kinfer/gp.hpp"
#include "kinfer/system.hpp"
#include "oracles.hpp"

using namespace kinfer;

namespace {

ProfileProblem hyperbola()
{
    const auto t = oracle::linspace(0, 10, 30);
    std::vector<double> v;
    for (double ti : t)
        v.push_back(10 / (1 + ti));
    return ProfileProblem(t, v);
}

GpConfig small(std::uint64_t seed, Exec exec = Exec::Parallel)
{
    GpConfig c = GpConfig::profile();
    c.population = 80;
    c.generations = 12;
    c.seed = seed;
    c.exec = exec;
    return c;
}

std::vector<std::pair<std::string, double>> summary(const HallOfFame& h)
{
    const std::string t[] = {"t"};
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : h.entries())
        out.emplace_back(format(e.expr, t), e.fitness);
    return out;
}

}  // namespace

TEST_SUITE("gp") {

TEST_CASE("hall of fame keeps the best entry per complexity")
{
    const std::string t[] = {"t"};
    HallOfFame h(5);
    CHECK(h.empty());
    CHECK(h.offer(parse("t", t), 3.0, 0));
    CHECK_FALSE(h.offer(parse("2", t), 4.0, 0));
    CHECK(h.offer(parse("2", t), 1.0, 1));
    CHECK(h.offer(parse("t+t+t", t), 1.0, 1));
    CHECK_FALSE(h.offer(parse("t*t*t*t", t), 1.0, 1));  // over the cap
    CHECK_FALSE(h.offer(parse("t+2", t), INFINITY, 1));
    CHECK(h.at(1)->fitness == 1.0);
    CHECK(h.at(1)->generation == 1);
    CHECK(h.entries().size() == 2);  // "2" displaced "t" at complexity 1
}

TEST_CASE("config validation")
{
    GpConfig c;
    c.population = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = GpConfig{};
    c.p_crossover = 0.9;
    c.p_subtree_mutation = 0.2;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("random trees respect the grammar")
{
    const Grammar g = Grammar::rate({"C_A", "C_B"}, 25);
    Rng rng(3);
    for (int i = 0; i < 300; ++i) {
        const Expr e = random_expr(g, 1 + rng.below(4), rng.bernoulli(0.5), rng);
        for (const auto& n : e.nodes()) {
            REQUIRE(n.op != Op::Exp);
            REQUIRE(n.op != Op::Param);
            if (n.op == Op::Const) {
                REQUIRE(n.value >= g.constants.lower);
                REQUIRE(n.value <= g.constants.upper);
            }
        }
    }
}

TEST_CASE("evolution is reproducible and independent of the execution policy")
{
    const auto p = hyperbola();
    const Grammar g = Grammar::profile(15);
    const auto a = evolve(g, p, small(5, Exec::Serial));
    const auto b = evolve(g, p, small(5, Exec::Parallel));
    const auto c = evolve(g, p, small(5, Exec::Serial));
    CHECK(summary(a.hall) == summary(b.hall));
    CHECK(summary(a.hall) == summary(c.hall));
    CHECK(a.evaluations == b.evaluations);
    const auto d = evolve(g, p, small(6));
    CHECK(summary(d.hall) != summary(a.hall));
}

TEST_CASE("per-complexity best fitness never gets worse across generations")
{
    const auto p = hyperbola();
    const auto r = evolve(Grammar::profile(15), p, small(11));
    std::map<std::size_t, double> last;
    std::size_t last_generation = 0;
    for (const auto& row : r.log) {
        REQUIRE(row.generation >= last_generation);
        last_generation = row.generation;
        if (last.count(row.complexity))
            REQUIRE(row.best <= last[row.complexity]);
        last[row.complexity] = row.best;
    }
    CHECK(last_generation == 12);
    // the hall agrees with the last logged generation
    for (const auto& e : r.hall.entries())
        CHECK(last.at(e.expr.size()) == e.fitness);
}

TEST_CASE("a short run recovers a simple profile")
{
    const auto p = hyperbola();
    GpConfig c = small(1);
    c.generations = 30;
    const auto r = evolve(Grammar::profile(15), p, c);
    double best = INFINITY;
    for (const auto& e : r.hall.entries())
        best = std::min(best, e.fitness);
    CHECK(best < 1e-8);
}

TEST_CASE("injected individuals enter the hall")
{
    const auto p = hyperbola();
    const std::string t[] = {"t"};
    GpConfig c = small(2);
    c.generations = 1;
    c.injected = {parse("10/(1+t)", t)};
    const auto r = evolve(Grammar::profile(15), p, c);
    REQUIRE(r.hall.at(5));
    CHECK(r.hall.at(5)->fitness < 1e-20);
}

TEST_CASE("finalists refit every hall entry")
{
    const auto p = hyperbola();
    const auto r = evolve(Grammar::profile(15), p, small(4));
    FitBudget b;
    b.global_evals = 500;
    std::vector<DroppedFinalist> dropped;
    const auto fs = finalists(r.hall, p, b, &dropped);
    CHECK(fs.size() + dropped.size() == r.hall.entries().size());
    for (const auto& f : fs) {
        CHECK(f.kind == FitKind::Profile);
        CHECK(std::isfinite(f.rss));
    }
}

}  // TEST_SUITE
