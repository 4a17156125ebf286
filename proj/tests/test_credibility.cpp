#include <doctest.h>

#include <cmath>
#include <random>

#include "opcred/credibility.hpp"

using namespace opcred;

TEST_SUITE("credibility") {

TEST_CASE("credibility_combine examples") {
    CHECK(std::abs(credibility_combine(2.499, 3.157, 0.446) - 2.863) < 0.001);
    CHECK(credibility_combine(1.7, 4.2, 1.0) == 1.7);
    CHECK(credibility_combine(1.7, 4.2, 0.0) == 4.2);
    CHECK_THROWS_AS(credibility_combine(1.0, 2.0, -0.01), DomainError);
    CHECK_THROWS_AS(credibility_combine(1.0, 2.0, 1.01), DomainError);
}

TEST_CASE("credibility_combine stays between its inputs and is monotone") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng), c = u(rng), a = w(rng);
        const double r = credibility_combine(x, c, a);
        CHECK(r >= std::min(x, c) - 1e-12);
        CHECK(r <= std::max(x, c) + 1e-12);
        CHECK(credibility_combine(x + 1.0, c, a) >= r);
        CHECK(credibility_combine(x, c + 1.0, a) >= r);
        // linear in (individual, collective)
        CHECK(credibility_combine(2 * x, 2 * c, a) == doctest::Approx(2 * r));
    }
}

TEST_CASE("truncate_nonnegative") {
    const auto neg = truncate_nonnegative(-0.3);
    CHECK(neg.value == 0.0);
    CHECK(neg.truncated);
    const auto pos = truncate_nonnegative(1.116);
    CHECK(pos.value == 1.116);
    CHECK_FALSE(pos.truncated);
    const auto zero = truncate_nonnegative(0.0);
    CHECK(zero.value == 0.0);
    CHECK(zero.truncated);
    for (double x : {1e-300, 0.5, 7.0, 1e300}) CHECK(truncate_nonnegative(x).value == x);
}

TEST_CASE("identity update converges in one iteration") {
    const StructuralParams start{3.0, 0.0, 1.5};
    const auto r = solve_fixed_point([](const StructuralParams& p) { return p; }, start, {});
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(r.params.collective_mean == 3.0);
    CHECK(r.params.between_variance == 1.5);
}

TEST_CASE("halving map contracts to zero") {
    const auto r = solve_fixed_point(
        [](const StructuralParams& p) {
            auto q = p;
            q.collective_mean /= 2;
            return q;
        },
        {8.0, 0.0, 1.0}, {1e-12, 500});
    CHECK(r.converged);
    CHECK(std::abs(r.params.collective_mean) < 1e-11);
}

TEST_CASE("non-convergence carries the last iterate") {
    const auto oscillate = [](const StructuralParams& p) {
        auto q = p;
        q.collective_mean = -p.collective_mean;
        return q;
    };
    try {
        solve_fixed_point(oscillate, {1.0, 0.0, 1.0}, {1e-10, 7});
        FAIL("expected non-convergence");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_iterate().iterations == 7);
        CHECK_FALSE(e.last_iterate().converged);
        CHECK(std::abs(e.last_iterate().params.collective_mean) == 1.0);
    }
}

TEST_CASE("solver settings are validated") {
    CHECK_THROWS_AS(validate(FixedPointSettings{0.0, 10}), DomainError);
    CHECK_THROWS_AS(validate(FixedPointSettings{1e-8, 0}), DomainError);
    CHECK_NOTHROW(validate(FixedPointSettings{}));
}

TEST_CASE("solver is deterministic") {
    const auto update = [](const StructuralParams& p) {
        return StructuralParams{std::cos(p.collective_mean), 0.0, 0.5 * p.between_variance + 0.1};
    };
    const auto a = solve_fixed_point(update, {1.0, 0.0, 1.0}, {});
    const auto b = solve_fixed_point(update, {1.0, 0.0, 1.0}, {});
    CHECK(a.iterations == b.iterations);
    CHECK(a.params.collective_mean == b.params.collective_mean);
    CHECK(a.params.between_variance == b.params.between_variance);
}

TEST_CASE("weighted mean") {
    const std::vector<WeightedObservation> obs{{1.0, 1.0}, {4.0, 3.0}};
    CHECK(weighted_mean(obs) == doctest::Approx(3.25));
    const std::vector<WeightedObservation> none{{1.0, 0.0}};
    CHECK_THROWS_AS(weighted_mean(none), DomainError);
}

TEST_CASE("bank credibility weight") {
    CHECK(bank_credibility_weight(2.0, 1.0, 1.0) == doctest::Approx(2.0 / 3.0));
    CHECK(bank_credibility_weight(2.0, 1.0, 0.0) == 0.0);
    CHECK(bank_credibility_weight(0.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("collective of identical banks truncates to their common profile") {
    const std::vector<BankAggregate> banks(3, BankAggregate{2.5, 0.4, 3.0});
    const auto est = estimate_collective(banks);
    CHECK(est.truncated);
    CHECK(est.collective_variance == 0.0);
    CHECK(est.collective == 2.5);
    for (double b : est.bank_weights) CHECK(b == 0.0);
}

TEST_CASE("collective needs two banks") {
    const std::vector<BankAggregate> one{{2.5, 0.4, 3.0}};
    CHECK_THROWS_AS(estimate_collective(one), InsufficientDataError);
}

TEST_CASE("collective estimate against a direct evaluation") {
    const std::vector<BankAggregate> banks{{2.0, 0.1, 4.0}, {3.5, 0.2, 2.0}, {5.0, 0.15, 3.0}};
    const auto est = estimate_collective(banks);
    // direct evaluation of the between-bank variance and weights
    const double w0 = 9.0;
    double denom = 0.0, spread = 0.0;
    const double mean_profile = (2.0 + 3.5 + 5.0) / 3.0;
    const double pooled = (0.1 + 0.2 + 0.15) / 3.0;
    for (const auto& b : banks) {
        denom += b.total_weight / w0 * (1.0 - b.total_weight / w0);
        spread += b.total_weight / w0 * (b.profile - mean_profile) * (b.profile - mean_profile);
    }
    const double c = (2.0 / 3.0) / denom;
    const double var = c * (1.5 * spread - 3.0 * pooled / w0);
    REQUIRE(var > 0.0);
    CHECK(est.collective_variance == doctest::Approx(var).epsilon(1e-12));
    double a = 0.0, num = 0.0;
    for (const auto& b : banks) {
        const double beta = b.total_weight / (b.total_weight + b.between_variance / var);
        a += beta;
        num += beta * b.profile;
    }
    CHECK(est.normalizer == doctest::Approx(a).epsilon(1e-12));
    CHECK(est.collective == doctest::Approx(num / a).epsilon(1e-12));
    CHECK_FALSE(est.truncated);
}

TEST_CASE("industry injection") {
    const auto p = inject_industry_profile(5.0, 0.9);
    CHECK(p.injected);
    CHECK_FALSE(p.truncated);
    CHECK(inject_industry_profile(1.0, 0.0).truncated);
    CHECK_THROWS_AS(inject_industry_profile(-1.0, 0.9), DomainError);
    CHECK_THROWS_AS(inject_industry_profile(1.0, -0.1), DomainError);
}

}
