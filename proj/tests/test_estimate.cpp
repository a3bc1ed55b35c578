#include <doctest.h>

#include <cmath>
#include <vector>

#include "kinfer/estimate.hpp"
#include "kinfer/optimize.hpp"
#include "kinfer/rng.hpp"
#include "kinfer/system.hpp"
#include "oracles.hpp"

using namespace kinfer;

namespace {

const std::vector<std::string> iso{"C_A", "C_B"};
const std::string t_name[] = {"t"};

ParamTemplate tmpl(const std::string& text, std::span<const std::string> names)
{
    return as_template(parse(text, names));
}

FitBudget small_budget(std::uint64_t seed = 0)
{
    FitBudget b;
    b.global_evals = 1500;
    b.seed = seed;
    return b;
}

Dataset noiseless(const char* name)
{
    const CaseStudy cs = make_case_study(name);
    return generate_dataset(cs.system, cs.experiments, NoiseSpec{0.0, 0});
}

}  // namespace

TEST_SUITE("estimate") {

TEST_CASE("fit minimises a convex quadratic")
{
    auto f = [](std::span<const double> x) { return (x[0] - 3) * (x[0] - 3); };
    const auto r = fit(f, 1, small_budget());
    REQUIRE(r.fittable);
    CHECK(r.theta[0] == doctest::Approx(3).epsilon(1e-6));
}

TEST_CASE("fit handles Rosenbrock and honours the box for the colony")
{
    auto f = [](std::span<const double> x) {
        return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
    };
    const auto r = fit(f, 2, small_budget(4));
    CHECK(r.value < 1e-8);
    CHECK(r.theta[0] == doctest::Approx(1).epsilon(1e-3));
}

TEST_CASE("zero-dimensional and unfittable objectives")
{
    int calls = 0;
    auto constant = [&](std::span<const double>) {
        ++calls;
        return 2.5;
    };
    const auto r0 = fit(constant, 0, small_budget());
    CHECK(calls == 1);
    CHECK(r0.value == 2.5);
    CHECK(r0.theta.empty());
    auto never = [](std::span<const double>) { return INFINITY; };
    CHECK_FALSE(fit(never, 2, small_budget()).fittable);
}

TEST_CASE("fit is deterministic and independent of the execution policy")
{
    auto f = [](std::span<const double> x) {
        return std::pow(x[0] - 1.5, 2) + 10 * std::pow(std::sin(x[1]), 2) + std::pow(x[2] * x[0] - 2, 2);
    };
    FitBudget serial = small_budget(9);
    serial.exec = Exec::Serial;
    FitBudget parallel = serial;
    parallel.exec = Exec::Parallel;
    const auto a = fit(f, 3, serial), b = fit(f, 3, parallel), c = fit(f, 3, serial);
    CHECK(a.theta == b.theta);
    CHECK(a.value == b.value);
    CHECK(a.theta == c.theta);
}

TEST_CASE("local refinement never returns a worse point")
{
    Rng rng(2);
    auto f = [](std::span<const double> x) { return std::abs(x[0]) + std::pow(x[1] - 2, 4) + std::cos(5 * x[0]); };
    for (int i = 0; i < 50; ++i) {
        const double start[] = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const double v = f(start);
        const auto r = bfgs_minimize(f, start, v, 50);
        REQUIRE(r.value <= v);
    }
}

TEST_CASE("budget validation")
{
    FitBudget b;
    b.global_evals = 0;
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
}

TEST_CASE("profile fits")
{
    const std::vector<double> t{0, 1, 2};
    const std::vector<double> y{1, 2, 3};
    const auto mean = fit_profile(tmpl("p[0]", t_name), t, y, small_budget());
    REQUIRE(mean);
    CHECK(mean->theta[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(mean->n == 3);
    CHECK(mean->kind == FitKind::Profile);

    const auto times = oracle::linspace(0, 10, 30);
    std::vector<double> v;
    for (double ti : times)
        v.push_back(10 / (1 + ti));
    const auto hyp = fit_profile(tmpl("p[0]/(p[1]+t)", t_name), times, v, small_budget(1));
    REQUIRE(hyp);
    CHECK(hyp->theta[0] == doctest::Approx(10).epsilon(1e-3));
    CHECK(hyp->theta[1] == doctest::Approx(1).epsilon(1e-3));

    Rng rng(77);
    std::vector<double> flat;
    for (std::size_t i = 0; i < 30; ++i)
        flat.push_back(0.077 + rng.normal(0, 0.01));
    double avg = 0.0;
    for (double f : flat)
        avg += f / 30.0;
    const auto c = fit_profile(tmpl("p[0]", t_name), times, flat, small_budget());
    CHECK(c->theta[0] == doctest::Approx(avg).epsilon(1e-6));
}

TEST_CASE("strong fits")
{
    SUBCASE("constant rate target")
    {
        Matrix states(4, 2, 1.0);
        const std::vector<double> r(4, 0.5);
        const auto m = fit_rate_strong(tmpl("p[0]", iso), states, r, small_budget());
        CHECK(m->theta[0] == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("single-parameter slope on the C_B = 0 slice")
    {
        Matrix states;
        std::vector<double> rates, ca;
        for (int i = 1; i <= 20; ++i) {
            const double a = 0.5 * i;
            const double row[] = {a, 0.0};
            states.append_row(row);
            ca.push_back(a);
            rates.push_back(oracle::isomerization_rate({a, 0.0}));
        }
        const auto m = fit_rate_strong(tmpl("p[0]*C_A", iso), states, rates, small_budget());
        CHECK(m->theta[0] == doctest::Approx(oracle::origin_slope(ca, rates)).epsilon(1e-4));
    }
    SUBCASE("true isomerization template on exact rates")
    {
        const CaseStudy cs = make_case_study("isomerization");
        Matrix states;
        std::vector<double> rates;
        Rng rng(1);
        for (int i = 0; i < 60; ++i) {
            const double row[] = {rng.uniform(0, 10), rng.uniform(0, 10)};
            states.append_row(row);
            rates.push_back(oracle::isomerization_rate({row[0], row[1]}));
        }
        const auto m = fit_rate_strong(cs.system.rate, states, rates, small_budget(2));
        REQUIRE(m);
        const Expr e = m->expr();
        for (std::size_t i = 0; i < states.rows(); ++i) {
            const double truth = rates[i];
            const double scale = std::max(std::abs(truth), 0.05);
            REQUIRE(std::abs(evaluate(e, states.row(i)) - truth) / scale < 5e-3);
        }
    }
    SUBCASE("missing denominator fits worse than the truth")
    {
        const CaseStudy cs = make_case_study("toluene");
        Matrix states;
        std::vector<double> rates;
        Rng rng(3);
        for (int i = 0; i < 60; ++i) {
            const double row[] = {rng.uniform(0, 5), rng.uniform(0, 9), rng.uniform(0, 5), rng.uniform(0, 5)};
            states.append_row(row);
            rates.push_back(oracle::toluene_rate({row[0], row[1], row[2], row[3]}));
        }
        const auto full = fit_rate_strong(cs.system.rate, states, rates, small_budget());
        const auto product = fit_rate_strong(tmpl("p[0]*C_T*C_H", cs.system.species), states, rates, small_budget());
        CHECK(product->rss > full->rss);
        CHECK(product->theta[0] == doctest::Approx(oracle::origin_slope(
                                                       [&] {
                                                           std::vector<double> x;
                                                           for (std::size_t i = 0; i < states.rows(); ++i)
                                                               x.push_back(states(i, 0) * states(i, 1));
                                                           return x;
                                                       }(),
                                                       rates))
                                       .epsilon(1e-4));
    }
}

TEST_CASE("weak fits")
{
    SUBCASE("true n2o template on noiseless data")
    {
        const Dataset data = noiseless("n2o");
        const CaseStudy cs = make_case_study("n2o");
        const auto m = fit_rate_weak(cs.system.rate, data, weak_fit_settings(), small_budget());
        REQUIRE(m);
        CHECK(m->rss < 1e-6);
        CHECK(m->n == 150);
        CHECK(m->group_rss.size() == 3);
        CHECK(m->kind == FitKind::Weak);
    }
    SUBCASE("a constant rate fits worse than the truth")
    {
        const Dataset data = noiseless("isomerization");
        const CaseStudy cs = make_case_study("isomerization");
        WeakProblem p(data, weak_fit_settings());
        const auto k = fit_rate_weak(tmpl("p[0]", iso), data, weak_fit_settings(), small_budget());
        REQUIRE(k);
        CHECK(std::isfinite(k->rss));
        CHECK(k->rss > p.objective(cs.system.rate.skeleton, cs.system.rate_params));
    }
    SUBCASE("an always-singular template is unfittable")
    {
        const Dataset data = noiseless("isomerization");
        CHECK_FALSE(fit_rate_weak(tmpl("1/(C_A-C_A)", iso), data, weak_fit_settings(), small_budget()));
    }
}

TEST_CASE("weak objective is minimal at the true parameters on noiseless data")
{
    for (const char* name : {"isomerization", "n2o", "toluene"}) {
        const CaseStudy cs = make_case_study(name);
        const Dataset data = noiseless(name);
        WeakProblem p(data, weak_fit_settings());
        const double at_truth = p.objective(cs.system.rate.skeleton, cs.system.rate_params);
        Rng rng(derive_seed(5, {cs.system.rate.dimension}));
        for (int i = 0; i < 100; ++i) {
            auto theta = cs.system.rate_params;
            for (auto& v : theta)
                v *= 1 + rng.uniform(-0.2, 0.2);
            REQUIRE(at_truth <= p.objective(cs.system.rate.skeleton, theta));
        }
    }
}

TEST_CASE("score fills every criterion from one nll")
{
    const Dataset data = noiseless("n2o");
    const CaseStudy cs = make_case_study("n2o");
    WeakProblem p(data, weak_fit_settings());
    const auto m = score(p, cs.system.rate, cs.system.rate_params);
    REQUIRE(m);
    CHECK(m->criteria.aic == doctest::Approx(2 * m->nll + 4));
    CHECK(m->criteria.bic == doctest::Approx(2 * m->nll + 2 * std::log(150.0)));
    const double bad[] = {1.0, -0.2};  // pole at C_N2O = 5, the first initial condition
    const auto b = score(p, cs.system.rate, bad);
    CHECK_FALSE(b);
}

TEST_CASE("predicted responses start from the first measured row")
{
    const CaseStudy cs = make_case_study("isomerization");
    const Dataset data = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.2, 4});
    const auto pred = predict_weak(cs.system.rate_expr(), data);
    REQUIRE(pred.size() == 5);
    for (std::size_t e = 0; e < 5; ++e)
        for (std::size_t s = 0; s < 2; ++s)
            CHECK(pred[e](0, s) == data.experiments[e].conc(0, s));
}

}  // TEST_SUITE
