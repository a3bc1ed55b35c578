#include <doctest.h>

#include <cmath>
#include <vector>

#include "kinfer/csv.hpp"
#include "kinfer/pipeline.hpp"
#include "kinfer/report.hpp"
#include "kinfer/rng.hpp"
#include "oracles.hpp"

using namespace kinfer;

namespace {

DiscoveryBudgets tiny(std::uint64_t seed)
{
    DiscoveryBudgets b;
    b.profile_gp.population = 40;
    b.profile_gp.generations = 4;
    b.rate_gp.population = 40;
    b.rate_gp.generations = 4;
    b.weak_gp.population = 20;
    b.weak_gp.generations = 2;
    for (FitBudget* f : {&b.profile_fit, &b.rate_fit, &b.weak_fit}) {
        f->global_evals = 200;
        f->restarts = 1;
        f->local_max_iters = 30;
    }
    b.seed = seed;
    return b;
}

Dataset data(const char* name, double sd, std::uint64_t seed)
{
    const CaseStudy cs = make_case_study(name);
    return generate_dataset(cs.system, cs.experiments, NoiseSpec{sd, seed});
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("method names")
{
    CHECK(parse_method("adok-s") == Method::Strong);
    CHECK(parse_method("adok-w") == Method::Weak);
    CHECK(method_name(Method::Strong) == "adok-s");
    CHECK_THROWS_AS(parse_method("adok"), std::invalid_argument);
}

TEST_CASE("rate estimates from exact profiles equal the true rate")
{
    const CaseStudy cs = make_case_study("n2o");
    const Dataset d = data("n2o", 0.0, 0);
    std::vector<ProfileFit> profiles;
    for (std::size_t e = 0; e < d.experiments.size(); ++e)
        for (std::size_t s = 0; s < 3; ++s) {
            ProfileFit p;
            p.experiment = e;
            p.species = s;
            for (std::size_t i = 0; i < d.experiments[e].times.size(); ++i) {
                const auto row = d.experiments[e].conc.row(i);
                p.fitted.push_back(row[s]);
                p.derivative.push_back(cs.system.stoich[s] * oracle::n2o_rate({row[0], row[1], row[2]}));
            }
            profiles.push_back(std::move(p));
        }
    const auto r = estimate_rates(d, profiles, RatePolicy{});
    REQUIRE(r.rates.size() == 150);
    for (std::size_t k = 0; k < r.rates.size(); ++k) {
        const auto row = r.states.row(k);
        REQUIRE(r.rates[k] == doctest::Approx(oracle::n2o_rate({row[0], row[1], row[2]})).epsilon(1e-12));
    }
    const auto single = estimate_rates(d, profiles, RatePolicy{false, 2});
    for (std::size_t k = 0; k < r.rates.size(); ++k)
        REQUIRE(single.rates[k] == doctest::Approx(r.rates[k]).epsilon(1e-12));

    // one corrupted species does not move the pooled estimate
    auto corrupted = profiles;
    for (auto& p : corrupted)
        if (p.species == 1)
            for (auto& v : p.derivative)
                v += 100.0;
    const auto robust = estimate_rates(d, corrupted, RatePolicy{});
    for (std::size_t k = 0; k < r.rates.size(); ++k)
        REQUIRE(robust.rates[k] == doctest::Approx(r.rates[k]).epsilon(1e-12));
}

TEST_CASE("trajectory diagnostics of the truth sit at the noise level")
{
    const CaseStudy cs = make_case_study("toluene");
    const Dataset d = data("toluene", 0.2, 5);
    const auto diag = trajectory_diagnostics(cs.system.rate_expr(), d);
    CHECK(diag.integration_ok);
    CHECK(diag.rows == 150);
    CHECK(diag.rmse > 0.15);
    CHECK(diag.rmse < 0.4);
    CHECK(diag.experiment_rmse.size() == 5);
    const Dataset clean = data("toluene", 0.0, 5);
    CHECK(trajectory_diagnostics(cs.system.rate_expr(), clean).rmse < 1e-5);
}

TEST_CASE("family matching is scale aware")
{
    const CaseStudy cs = make_case_study("toluene");
    const std::vector<Interval> box{{0.5, 5}, {0.5, 9}, {0.5, 5}, {0.5, 5}};
    const Matrix pts = sample_points(box, 200, 1);
    const Expr scaled = parse("0.4*C_T*C_H/(0.2+1.8*C_B+C_T)", cs.system.species);
    CHECK(match_family(scaled, cs.system.rate, pts).matches);
    const Expr product = parse("0.1*C_T*C_H", cs.system.species);
    const auto m = match_family(product, cs.system.rate, pts);
    CHECK(m.relative_rms < 1e-3);  // a limit of the family
    CHECK_FALSE(m.matches);
    const Expr singular = parse("1/(C_T-C_T)", cs.system.species);
    CHECK_FALSE(match_family(singular, cs.system.rate, pts).matches);
}

TEST_CASE("sample points are seeded and inside the box")
{
    const std::vector<Interval> box{{1, 2}, {-3, -1}};
    const Matrix a = sample_points(box, 50, 9), b = sample_points(box, 50, 9);
    CHECK(a == b);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(a(i, 0) >= 1);
        CHECK(a(i, 0) <= 2);
        CHECK(a(i, 1) >= -3);
        CHECK(a(i, 1) <= -1);
    }
}

TEST_CASE("strong iteration produces ranked finalists")
{
    const Dataset d = data("n2o", 0.2, 2);
    const auto r = strong_iteration(d, tiny(1));
    CHECK(r.method == Method::Strong);
    CHECK(r.dataset_size == 5);
    CHECK_FALSE(r.finalists.empty());
    CHECK(r.profiles.size() <= 15);
    for (std::size_t i = 1; i < r.finalists.size(); ++i)
        CHECK(r.finalists[i - 1].criteria.aic <= r.finalists[i].criteria.aic);
    CHECK(format(r.best.expr(), d.species) == format(r.finalists.front().expr(), d.species));
    if (r.finalists.size() > 1)
        CHECK(r.runner_up);
    // kept profiles stay bounded between the sampling instants
    for (const auto& p : r.profiles) {
        const Expr e = p.model.expr();
        for (int i = 0; i <= 2000; ++i) {
            const double t[] = {i * 10.0 / 2000};
            const double v = evaluate(e, t);
            REQUIRE(std::isfinite(v));
            REQUIRE(std::abs(v) < 20.0);
        }
    }
}

TEST_CASE("weak iteration is reproducible and policy independent")
{
    const Dataset d = data("isomerization", 0.2, 2);
    DiscoveryBudgets a = tiny(4), b = tiny(4);
    a.exec = Exec::Serial;
    for (GpConfig* g : {&a.weak_gp, &a.rate_gp, &a.profile_gp})
        g->exec = Exec::Serial;
    for (FitBudget* f : {&a.weak_fit, &a.rate_fit, &a.profile_fit})
        f->exec = Exec::Serial;
    const auto x = weak_iteration(d, a), y = weak_iteration(d, b);
    CHECK(format(x.best.expr(), d.species) == format(y.best.expr(), d.species));
    CHECK(x.diagnostics.rmse == y.diagnostics.rmse);
    CHECK(x.best.kind == FitKind::Weak);
    CHECK(x.best.n == 150);
}

TEST_CASE("loop with a single iteration")
{
    const Dataset d = data("isomerization", 0.2, 3);
    LoopConfig c;
    c.max_iterations = 1;
    c.accept_rmse = 0.0;
    const CaseStudy cs = make_case_study("isomerization");
    std::size_t calls = 0;
    const auto h = run_loop(&cs.system, d, Method::Weak, c, tiny(2), [&](const LoopStep&) { ++calls; });
    CHECK(h.steps.size() == 1);
    CHECK(calls == 1);
    CHECK(h.stop_reason == "iteration budget exhausted");
    CHECK(h.data.experiments.size() == 5);
}

TEST_CASE("loop adds designed experiments until the budget runs out")
{
    const Dataset d = data("isomerization", 0.2, 3);
    LoopConfig c;
    c.max_iterations = 2;
    c.accept_rmse = 0.0;
    c.proposal.starts = 4;
    c.proposal.max_evals_per_start = 40;
    const CaseStudy cs = make_case_study("isomerization");
    const auto h = run_loop(&cs.system, d, Method::Weak, c, tiny(2));
    REQUIRE(!h.steps.empty());
    if (h.steps.size() == 2) {
        CHECK(h.data.experiments.size() == 6);
        REQUIRE(h.steps[0].proposal);
        CHECK(h.data.experiments[5].design.initial == h.steps[0].proposal->x0);
        CHECK(h.steps[1].result.dataset_size == 6);
    }
    const auto without = run_loop(nullptr, d, Method::Weak, c, tiny(2));
    CHECK(without.steps.size() == 1);
    CHECK(without.data.experiments.size() == 5);
}

TEST_CASE("loop config validation")
{
    LoopConfig c;
    c.max_iterations = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    const Dataset empty;
    LoopConfig ok;
    CHECK_THROWS_AS(run_loop(nullptr, empty, Method::Weak, ok, tiny(1)), std::invalid_argument);
}

TEST_CASE("report tables")
{
    const Dataset d = data("n2o", 0.2, 2);
    const auto r = strong_iteration(d, tiny(1));
    const std::string table = criteria_table_csv(r.finalists, d.species);
    CHECK(table.rfind("model,expression,d,nll,aic,aicc,hqc,bic\r\n", 0) == 0);
    const auto rows = csv::parse(table);
    CHECK(rows.size() == r.finalists.size() + 1);
    const auto j = iteration_json(r, d, nullptr, false);
    CHECK(j["method"] == "adok-s");
    CHECK(j["finalists"].size() == r.finalists.size());
    const CaseStudy cs = make_case_study("n2o");
    const auto rates = csv::parse(rates_csv(r, &cs.system));
    CHECK(rates.size() == r.rates.rates.size() + 1);
    const auto response = csv::parse(response_csv(cs.system.rate_expr(), d, weak_fit_settings()));
    CHECK(response.front().size() == 2 + 2 * 3);
    CHECK(response.size() == 151);
}

}  // TEST_SUITE
