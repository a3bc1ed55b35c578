#include <doctest.h>

#include <cmath>
#include <vector>

#include "kinfer/mbdoe.hpp"
#include "kinfer/system.hpp"
#include "oracles.hpp"

using namespace kinfer;

namespace {

const std::vector<std::string> one{"C"};
const std::vector<std::string> iso{"C_A", "C_B"};

/// Discrepancy between a zero rate and C/(1+C^2) with stoich -1, computed
/// with the test's own integrator and quadrature.
double reference_objective(double x0, double tf, std::size_t points)
{
    const auto times = oracle::linspace(0, tf, points);
    const auto traj = oracle::rk4(
        [](const oracle::State& c) { return oracle::State{-c[0] / (1 + c[0] * c[0])}; }, {x0}, 0.0, times, 1e-3);
    std::vector<double> f;
    for (const auto& y : traj)
        f.push_back((x0 - y[0]) * (x0 - y[0]));
    return oracle::trapezoid(f, tf / static_cast<double>(points - 1));
}

}  // namespace

TEST_SUITE("mbdoe") {

TEST_CASE("discrepancy of two constant rates")
{
    // x_a = t, x_b = 2t on [0, 1]: integral of t^2 is 1/3
    const double stoich[] = {1.0};
    const double x0[] = {0.0};
    const auto d = discrepancy(parse("1", one), parse("2", one), stoich, x0, 0.0, 1.0, 101);
    CHECK_FALSE(d.failed);
    CHECK(d.valid);
    CHECK(d.value == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
    const auto same = discrepancy(parse("C", one), parse("C", one), stoich, x0, 0.0, 1.0, 101);
    CHECK(same.value == 0.0);
}

TEST_CASE("discrepancy matches the reference quadrature")
{
    const double stoich[] = {-1.0};
    for (double x0 : {0.5, 1.0, 2.0, 4.0}) {
        const double xs[] = {x0};
        const auto d = discrepancy(parse("0", one), parse("C/(1+C*C)", one), stoich, xs, 0.0, 10.0, 101);
        CHECK(d.value == doctest::Approx(reference_objective(x0, 10.0, 101)).epsilon(1e-6));
    }
}

TEST_CASE("a failing model is flagged")
{
    const double stoich[] = {1.0};
    const double x0[] = {1.0};
    const auto d = discrepancy(parse("C*C", one), parse("0", one), stoich, x0, 0.0, 10.0, 101);
    CHECK(d.failed);
    CHECK(d.valid);
    const double bad[] = {0.0};
    const auto e = discrepancy(parse("1/(C-C)", one), parse("0", one), stoich, bad, 0.0, 10.0, 101);
    CHECK_FALSE(e.valid);
}

TEST_CASE("design space helpers")
{
    const std::vector<std::vector<double>> ics{{2, 0}, {10, 2}};
    const auto s = DesignSpace::around(ics);
    CHECK(s.bounds[0].upper == doctest::Approx(12.5));
    CHECK(s.bounds[1].upper == doctest::Approx(2.5));
    CHECK(s.bounds[0].lower == 0.0);
    const std::vector<std::vector<double>> zeros{{1, 0}};
    CHECK(DesignSpace::around(zeros).bounds[1].upper == 1.0);
    CHECK_THROWS_AS(s.validate(3), std::invalid_argument);
    DesignSpace bad = s;
    bad.bounds[0] = {3, 1};
    CHECK_THROWS_AS(bad.validate(2), std::invalid_argument);
}

TEST_CASE("one-dimensional design matches a dense-grid argmax")
{
    DesignSpace space;
    space.bounds = {{0.0, 5.0}};
    const double stoich[] = {-1.0};
    ProposalOptions o;
    o.starts = 8;
    const auto p = propose_experiment(parse("0", one), parse("C/(1+C*C)", one), stoich, space, o);
    double best_x = 0.0, best = -1.0;
    for (int i = 0; i <= 2000; ++i) {
        const double x = 5.0 * i / 2000.0;
        const double v = reference_objective(x, 10.0, 101);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    CHECK(p.x0[0] == doctest::Approx(best_x).epsilon(0.01));
    CHECK(p.objective == doctest::Approx(best).epsilon(1e-4));
    CHECK_FALSE(p.degenerate);
}

TEST_CASE("identical models give a degenerate proposal")
{
    const auto cs = make_case_study("isomerization");
    std::vector<std::vector<double>> ics;
    for (const auto& e : cs.experiments)
        ics.push_back(e.initial);
    ProposalOptions o;
    o.starts = 4;
    const Expr r = cs.system.rate_expr();
    const auto p = propose_experiment(r, r, cs.system.stoich, DesignSpace::around(ics), o);
    CHECK(p.degenerate);
    CHECK(p.objective == 0.0);
}

TEST_CASE("proposals beat every starting design and are reproducible")
{
    const auto cs = make_case_study("isomerization");
    std::vector<std::vector<double>> ics;
    for (const auto& e : cs.experiments)
        ics.push_back(e.initial);
    const Expr a = cs.system.rate_expr();
    const Expr b = parse("1.2*C_A-0.4*C_B", iso);
    ProposalOptions o;
    o.starts = 6;
    o.extra_starts = ics;
    o.seed = 3;
    const auto space = DesignSpace::around(ics);
    const auto p = propose_experiment(a, b, cs.system.stoich, space, o);
    for (const auto& ic : ics) {
        const auto d = discrepancy(a, b, cs.system.stoich, ic, space.t0, space.tf, space.quadrature_points);
        CHECK(p.objective >= d.value);
    }
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(p.x0[s] >= space.bounds[s].lower);
        CHECK(p.x0[s] <= space.bounds[s].upper);
    }
    CHECK(p.trace.size() == 6 + ics.size());
    o.exec = Exec::Serial;
    const auto q = propose_experiment(a, b, cs.system.stoich, space, o);
    CHECK(q.x0 == p.x0);
    CHECK(q.objective == p.objective);
}

TEST_CASE("no integrable design point")
{
    DesignSpace space;
    space.bounds = {{0.0, 1.0}};
    const double stoich[] = {1.0};
    ProposalOptions o;
    o.starts = 2;
    CHECK_THROWS_AS(propose_experiment(parse("1/(C-C)", one), parse("0", one), stoich, space, o), NoProposal);
}

}  // TEST_SUITE
