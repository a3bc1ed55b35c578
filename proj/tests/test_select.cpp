#include <doctest.h>

#include <cmath>
#include <vector>

#include "kinfer/criteria.hpp"
#include "kinfer/estimate.hpp"
#include "kinfer/rng.hpp"
#include "oracles.hpp"

using namespace kinfer;

namespace {

FittedModel model(double nll, std::size_t d, std::size_t complexity, std::size_t n = 150)
{
    FittedModel m;
    m.tmpl.dimension = d;
    // any valid postfix tree of the wanted size: a chain of additions
    m.tmpl.skeleton = Expr::constant(0);
    for (std::size_t i = 1; i + 1 < complexity; i += 2)
        m.tmpl.skeleton = Expr::binary(Op::Add, m.tmpl.skeleton, Expr::constant(1));
    m.nll = nll;
    m.n = n;
    m.criteria = all_criteria(nll, d, n);
    return m;
}

}  // namespace

TEST_SUITE("select") {

TEST_CASE("penalty differences between four and five parameters at n = 150")
{
    CHECK(penalty_delta(Criterion::AIC, 4, 5, 150) == -2.0);
    CHECK(penalty_delta(Criterion::AICc, 4, 5, 150) == doctest::Approx(-2.14).epsilon(0.005 / 2.14));
    CHECK(penalty_delta(Criterion::HQC, 4, 5, 150) == doctest::Approx(-3.22).epsilon(0.005 / 3.22));
    CHECK(penalty_delta(Criterion::BIC, 4, 5, 150) == doctest::Approx(-5.01).epsilon(0.005 / 5.01));
    // oracles from the closed forms
    CHECK(penalty_delta(Criterion::BIC, 4, 5, 150) == doctest::Approx(-std::log(150.0)));
    CHECK(penalty_delta(Criterion::HQC, 4, 5, 150) == doctest::Approx(-2 * std::log(std::log(150.0))));
}

TEST_CASE("criteria are increasing in nll and in d")
{
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const std::size_t n = 10 + rng.below(300);
        const std::size_t d = rng.below(7);
        const double nll = rng.uniform(-200, 200);
        const double dn = rng.uniform(1e-3, 5);
        for (Criterion c : kAllCriteria) {
            REQUIRE(criterion(c, nll + dn, d, n) > criterion(c, nll, d, n));
            REQUIRE(criterion(c, nll, d + 1, n) > criterion(c, nll, d, n));
        }
    }
}

TEST_CASE("penalty hierarchy and the difference-of-differences identity")
{
    for (std::size_t n : {30, 150, 1000}) {
        const double a = std::abs(penalty_delta(Criterion::AIC, 4, 5, n));
        const double b = std::abs(penalty_delta(Criterion::BIC, 4, 5, n));
        CHECK(a < b);
        for (double nll1 : {-30.0, 12.0})
            for (double nll2 : {-50.0, 4.0}) {
                const double d_aic = criterion(Criterion::AIC, nll1, 4, n) - criterion(Criterion::AIC, nll2, 5, n);
                const double d_bic = criterion(Criterion::BIC, nll1, 4, n) - criterion(Criterion::BIC, nll2, 5, n);
                CHECK(d_bic - d_aic == doctest::Approx(penalty_delta(Criterion::BIC, 4, 5, n) -
                                                       penalty_delta(Criterion::AIC, 4, 5, n)));
            }
    }
}

TEST_CASE("AICc is undefined without enough samples")
{
    CHECK_THROWS_AS(criterion(Criterion::AICc, 0.0, 7, 8), UndefinedCriterion);
    CHECK(std::isnan(all_criteria(0.0, 7, 8).aicc));
    CHECK(std::isfinite(all_criteria(0.0, 7, 8).bic));
    CHECK(std::isfinite(criterion(Criterion::AICc, 0.0, 7, 10)));
}

TEST_CASE("HQC constant")
{
    CriterionKind k{Criterion::HQC, 2.0};
    CHECK(penalty(k, 3, 100) == doctest::Approx(2 * 2.0 * 3 * std::log(std::log(100.0))));
    k.hqc_c = 0.5;
    CHECK_THROWS_AS(k.validate(), std::invalid_argument);
}

TEST_CASE("nll examples")
{
    const double one[] = {4.0};
    CHECK(nll(one, 4) == doctest::Approx(2 * std::log(2 * M_PI) + 2).epsilon(1e-12));
    CHECK(nll(one, 4) == doctest::Approx(5.675754).epsilon(1e-6));
    const double two[] = {4.0, 4.0};
    CHECK(nll(two, 4) == doctest::Approx(2 * nll(one, 4)));
    const double zero[] = {0.0};
    CHECK(std::isfinite(nll(zero, 10)));
    CHECK(nll(zero, 10) < 0);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> r{rng.uniform(0.01, 50), rng.uniform(0.01, 50), rng.uniform(0.01, 50)};
        const std::size_t n = 2 + rng.below(200);
        REQUIRE(nll(r, n) == doctest::Approx(oracle::gaussian_nll(r, static_cast<double>(n))).epsilon(1e-12));
        auto bigger = r;
        bigger[rng.below(3)] *= 1.01;
        REQUIRE(nll(bigger, n) > nll(r, n));
    }
}

TEST_CASE("rss contract")
{
    Matrix a(2, 2, 1.0), b(2, 2, 0.0);
    CHECK(rss(a, a) == 0.0);
    CHECK(rss(a, b) == 4.0);
    a(1, 1) = NAN;
    CHECK(std::isinf(rss(a, b)));
    CHECK_THROWS_AS(rss(Matrix(2, 2), Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("rank orders by criterion, then d, then complexity, then input order")
{
    std::vector<FittedModel> ms{model(10.0, 3, 5), model(10.0, 2, 9), model(10.0, 2, 7), model(5.0, 6, 3),
                                model(10.0, 2, 7)};
    ms[4].theta = {42};  // distinguishes the later duplicate
    const auto ranked = rank(ms, CriterionKind{Criterion::AIC});
    CHECK(ranked[0].nll == 5.0);
    CHECK(ranked[1].dimension() == 2);
    CHECK(ranked[1].complexity() == 7);
    CHECK(ranked[1].theta.empty());
    CHECK(ranked[2].theta == std::vector<double>{42});
    CHECK(ranked[3].complexity() == 9);
    CHECK(ranked[4].dimension() == 3);
    CHECK_THROWS_AS(rank(std::vector<FittedModel>{}, CriterionKind{}), std::invalid_argument);
}

TEST_CASE("rank puts undefined criteria last")
{
    std::vector<FittedModel> ms{model(-100.0, 7, 15, 8), model(10.0, 1, 3, 8)};
    const auto ranked = rank(ms, CriterionKind{Criterion::AICc});
    CHECK(ranked[0].dimension() == 1);
    CHECK(ranked[1].dimension() == 7);
}

}  // TEST_SUITE
