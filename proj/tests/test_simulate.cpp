#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "kinfer/csv.hpp"
#include "kinfer/dataset_io.hpp"
#include "kinfer/ode.hpp"
#include "kinfer/system.hpp"
#include "oracles.hpp"

using namespace kinfer;
namespace fs = std::filesystem;

TEST_SUITE("simulate") {

TEST_CASE("exponential decay against the analytic solution")
{
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -y[0];
        return true;
    };
    const double y0[] = {1.0};
    const double times[] = {0.0, 0.5, 1.0, 3.0};
    const Trajectory tr = integrate(rhs, y0, 0.0, times);
    REQUIRE(tr.ok());
    CHECK(tr.valid_rows == 4);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(tr.at(i, 0) == doctest::Approx(std::exp(-times[i])).epsilon(1e-6));
    CHECK(tr.at(2, 0) == doctest::Approx(0.367879).epsilon(1e-6));
}

TEST_CASE("finite-time blow-up is reported, earlier rows stay valid")
{
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[0] * y[0];
        return true;
    };
    const double y0[] = {1.0};
    const double times[] = {0.0, 0.5, 0.9, 1.5, 2.0};
    const Trajectory tr = integrate(rhs, y0, 0.0, times);
    CHECK_FALSE(tr.ok());
    CHECK(tr.valid_rows == 3);
    CHECK(tr.at(1, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(std::isnan(tr.at(4, 0)));
}

TEST_CASE("rhs rejecting a state stops the integration")
{
    auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -1.0;
        return y[0] > 0.5;
    };
    const double y0[] = {1.0};
    const double times[] = {0.0, 0.25, 1.0};
    const Trajectory tr = integrate(rhs, y0, 0.0, times);
    CHECK_FALSE(tr.ok());
    CHECK(tr.valid_rows == 2);
}

TEST_CASE("tighter tolerances never move further from the RK4 reference")
{
    const CaseStudy cs = make_case_study("toluene");
    const auto& ex = cs.experiments[1];
    const auto times = ex.sampling_times();
    const auto ref = oracle::rk4(oracle::reaction(oracle::toluene_rate, cs.system.stoich), ex.initial, 0.0, times, 1e-3);
    double previous = INFINITY;
    for (double rel : {1e-5, 0.5e-5, 0.25e-5}) {
        IntegratorSettings s{rel, rel * 1e-2, 100000, 0.0};
        const Trajectory tr = simulate_experiment(cs.system, ex, s);
        REQUIRE(tr.ok());
        double dev = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i)
            for (std::size_t k = 0; k < 4; ++k)
                dev = std::max(dev, std::abs(tr.at(i, k) - ref[i][k]));
        CHECK(dev <= previous * (1 + 1e-9));
        previous = dev;
    }
}

TEST_CASE("case-study definitions")
{
    CHECK(case_study_names() == std::vector<std::string>{"isomerization", "n2o", "toluene"});
    const CaseStudy iso = make_case_study("isomerization");
    CHECK(iso.system.rate_params == std::vector<double>{7, 3, 4, 2, 6});
    CHECK(iso.experiments.size() == 5);
    CHECK(iso.experiments[1].initial == std::vector<double>{10, 2});
    const CaseStudy n2o = make_case_study("n2o");
    CHECK(n2o.system.stoich == std::vector<double>{-0.5, 0.5, 1});
    CHECK(n2o.experiments[4].initial == std::vector<double>{0, 2, 3});
    const CaseStudy tol = make_case_study("toluene");
    CHECK(tol.system.species.size() == 4);
    CHECK(tol.noise.std_dev == 0.2);
    for (const auto& e : tol.experiments) {
        CHECK(e.n_samples == 30);
        CHECK(e.tf == 10.0);
    }
    CHECK_THROWS_AS(make_case_study("nope"), std::invalid_argument);
}

TEST_CASE("library rate laws agree with the hand-written ones")
{
    for (const char* name : {"isomerization", "n2o", "toluene"}) {
        const CaseStudy cs = make_case_study(name);
        const Expr rate = cs.system.rate_expr();
        for (const auto& e : cs.experiments) {
            const double lib = evaluate(rate, e.initial);
            const double ref = std::string(name) == "isomerization" ? oracle::isomerization_rate(e.initial)
                               : std::string(name) == "n2o"          ? oracle::n2o_rate(e.initial)
                                                                     : oracle::toluene_rate(e.initial);
            CHECK(lib == doctest::Approx(ref).epsilon(1e-14));
        }
    }
}

TEST_CASE("dataset shape, determinism and noise substreams")
{
    const CaseStudy cs = make_case_study("toluene");
    const Dataset a = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.2, 7});
    REQUIRE(a.experiments.size() == 5);
    CHECK(a.experiments[1].conc.rows() == 30);
    CHECK(a.experiments[1].conc.cols() == 4);
    CHECK(a.total_samples() == 150);
    const Dataset b = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.2, 7});
    for (std::size_t e = 0; e < 5; ++e)
        CHECK(experiment_csv(a, e) == experiment_csv(b, e));

    // the first experiment's noise does not depend on how many follow it
    const std::vector<Experiment> first(cs.experiments.begin(), cs.experiments.begin() + 1);
    const Dataset c = generate_dataset(cs.system, first, NoiseSpec{0.2, 7});
    CHECK(c.experiments[0].conc == a.experiments[0].conc);
    const auto extra = generate_experiment(cs.system, cs.experiments[3], NoiseSpec{0.2, 7}, 3);
    CHECK(extra.conc == a.experiments[3].conc);

    const Dataset d = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.2, 8});
    CHECK_FALSE(d.experiments[0].conc == a.experiments[0].conc);
}

TEST_CASE("sample noise has the requested spread")
{
    const CaseStudy cs = make_case_study("isomerization");
    const Dataset clean = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.0, 1});
    const Dataset noisy = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.2, 1});
    double ss = 0.0, sum = 0.0;
    std::size_t n = 0;
    for (std::size_t e = 0; e < 5; ++e)
        for (std::size_t i = 0; i < 30; ++i)
            for (std::size_t s = 0; s < 2; ++s) {
                const double r = noisy.experiments[e].conc(i, s) - clean.experiments[e].conc(i, s);
                ss += r * r;
                sum += r;
                ++n;
            }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    CHECK(sd == doctest::Approx(0.2).epsilon(0.1));
    CHECK(std::abs(sum / static_cast<double>(n)) < 0.05);
}

TEST_CASE("dataset files round trip")
{
    const CaseStudy cs = make_case_study("n2o");
    const Dataset a = generate_dataset(cs.system, cs.experiments, NoiseSpec{0.2, 3});
    const fs::path dir = fs::temp_directory_path() / "kinfer_dataset_roundtrip";
    fs::remove_all(dir);
    write_dataset(dir, a);
    const std::string header = csv::read_file(dir / "experiment_1.csv").substr(0, 21);
    CHECK(header == "t,C_N2O,C_N2,C_O2\r\n0,");
    const Dataset b = read_dataset(dir);
    CHECK(b.system == "n2o");
    CHECK(b.species == a.species);
    CHECK(b.stoich == a.stoich);
    REQUIRE(b.experiments.size() == 5);
    for (std::size_t e = 0; e < 5; ++e) {
        CHECK(b.experiments[e].design.initial == a.experiments[e].design.initial);
        for (std::size_t i = 0; i < 30; ++i)
            for (std::size_t s = 0; s < 3; ++s)
                CHECK(b.experiments[e].conc(i, s) == doctest::Approx(a.experiments[e].conc(i, s)).epsilon(1e-8));
    }
    fs::remove(dir / "experiment_2.csv");
    CHECK_THROWS_AS(read_dataset(dir), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("csv fields are quoted when needed")
{
    csv::Table t;
    t.header = {"a", "b"};
    t.add({"x,y", "say \"hi\""});
    CHECK(t.str() == "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
    const auto rows = csv::parse(t.str());
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][0] == "x,y");
    CHECK(rows[1][1] == "say \"hi\"");
    CHECK(csv::number(0.1) == "0.1");
    CHECK(csv::number(1.0 / 3.0) == "0.333333333");
}

TEST_CASE("system validation")
{
    ReactionSystem s = make_case_study("isomerization").system;
    s.stoich = {1, 1};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    Experiment e;
    e.initial = {1.0};
    CHECK_THROWS_AS(e.validate(2), std::invalid_argument);
    e.initial = {1.0, 0.0};
    e.tf = -1;
    CHECK_THROWS_AS(e.validate(2), std::invalid_argument);
}

}  // TEST_SUITE
