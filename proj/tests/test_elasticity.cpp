#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pricer/elasticity.hpp"

using namespace pricer;
using Catch::Matchers::WithinAbs;

namespace {

PriceObservation obs(double prev, double forecast, double price, double demand) {
    return PriceObservation{prev, forecast, price, demand};
}

// Direct normal-equation slope, written independently of the estimator.
double brute_force_slope(const ElasticityDataset& d) {
    double num = 0.0, den = 0.0;
    for (const auto& r : d.rows()) {
        double x = r.forecast * (r.price - r.prev_price) / r.prev_price;
        double y = r.demand - r.forecast;
        num += x * y;
        den += x * x;
    }
    return num / den;
}

}  // namespace

TEST_CASE("two-point dataset recovers the exact slope") {
    ElasticityDataset d;
    d.add(obs(10, 10, 10, 10));
    d.add(obs(10, 10, 11, 8));
    REQUIRE(d.estimable());
    REQUIRE_THAT(estimate_ols(d), WithinAbs(-2.0, 1e-12));
}

TEST_CASE("mirrored design points cancel same-signed noise") {
    ElasticityDataset d;
    d.add(obs(10, 10, 9, 12.5));
    d.add(obs(10, 10, 11, 8.5));
    REQUIRE_THAT(estimate_ols(d), WithinAbs(-2.0, 1e-12));
    REQUIRE_THAT(estimate_ols(d), WithinAbs(brute_force_slope(d), 1e-12));
}

TEST_CASE("a single repeated price is inestimable") {
    ElasticityDataset d;
    d.add(obs(10, 10, 11, 8));
    d.add(obs(10, 9, 11, 7));
    REQUIRE_FALSE(d.estimable());
    REQUIRE_THROWS_AS(estimate_ols(d), std::domain_error);
    REQUIRE_THROWS_AS(estimate_rls(d), std::domain_error);
}

TEST_CASE("distinct prices that all equal their prev price are inestimable") {
    ElasticityDataset d;
    d.add(obs(10, 10, 10, 10));
    d.add(obs(11, 10, 11, 10));
    REQUIRE_FALSE(d.estimable());
}

TEST_CASE("fewer than two rows is inestimable") {
    ElasticityDataset d;
    d.add(obs(10, 10, 11, 8));
    REQUIRE_FALSE(d.estimable());
    REQUIRE_THROWS_AS(estimate_ols(d), std::domain_error);
}

TEST_CASE("estimates are clamped into the admissible interval") {
    ElasticityDataset d;
    // Strongly positive slope: demand rises with price.
    d.add(obs(10, 10, 10, 10));
    d.add(obs(10, 10, 12, 30));
    REQUIRE_THAT(estimate_ols(d), WithinAbs(-0.1, 1e-15));
    // Strongly negative slope clamps at the other end.
    ElasticityDataset d2;
    d2.add(obs(10, 10, 10, 10));
    d2.add(obs(10, 10, 10.5, 0.0));
    REQUIRE(brute_force_slope(d2) < -10.0);
    REQUIRE_THAT(estimate_ols(d2), WithinAbs(-10.0, 1e-15));
    ElasticityBounds wide{-30.0, -0.01};
    REQUIRE_THAT(estimate_ols(d2, wide), WithinAbs(brute_force_slope(d2), 1e-12));
}

TEST_CASE("rows at or below the forecast floor are dropped") {
    ElasticityDataset d;
    REQUIRE_FALSE(d.add(obs(10, 0.0, 11, 8)));
    REQUIRE_FALSE(d.add(obs(10, 1e-7, 11, 8)));
    REQUIRE(d.size() == 0);
    REQUIRE(d.add(obs(10, 2e-6, 11, 8)));
}

TEST_CASE("the window retains only the most recent rows") {
    ElasticityDataset d(3);
    for (int k = 0; k < 5; ++k) d.add(obs(10, 10, 10 + k, 10));
    REQUIRE(d.size() == 3);
    REQUIRE(d.rows().front().price == 12.0);
    REQUIRE(d.rows().back().price == 14.0);
}

TEST_CASE("dataset rejects nonpositive prices and negative demand") {
    ElasticityDataset d;
    REQUIRE_THROWS_AS(d.add(obs(0, 10, 11, 8)), std::invalid_argument);
    REQUIRE_THROWS_AS(d.add(obs(10, 10, 0, 8)), std::invalid_argument);
    REQUIRE_THROWS_AS(d.add(obs(10, 10, 11, -1)), std::invalid_argument);
    REQUIRE_THROWS_AS(ElasticityDataset(0), std::invalid_argument);
}

TEST_CASE("scaling demands and forecasts together leaves the slope unchanged") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> up(8.0, 14.0);
    std::uniform_real_distribution<double> uf(1.0, 9.0);
    std::uniform_real_distribution<double> ud(0.0, 15.0);
    ElasticityDataset d, scaled;
    const double c = 3.7;
    for (int k = 0; k < 25; ++k) {
        double prev = up(rng), f = uf(rng), p = up(rng), dem = ud(rng);
        d.add(obs(prev, f, p, dem));
        scaled.add(obs(prev, c * f, p, c * dem));
    }
    REQUIRE_THAT(estimate_ols(d, {-50.0, -1e-6}),
                 WithinAbs(estimate_ols(scaled, {-50.0, -1e-6}), 1e-9));
}

TEST_CASE("noiseless linear data is recovered almost exactly") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> up(8.0, 14.0);
    std::uniform_real_distribution<double> uf(1.0, 9.0);
    std::uniform_real_distribution<double> ug(-8.0, -0.3);
    for (int rep = 0; rep < 50; ++rep) {
        double gamma = ug(rng);
        ElasticityDataset d;
        for (int k = 0; k < 12; ++k) {
            double prev = up(rng), f = uf(rng), p = up(rng);
            double dem = f + (p - prev) * f * gamma / prev;
            if (dem < 0.0) continue;
            d.add(obs(prev, f, p, dem));
        }
        if (!d.estimable()) continue;
        REQUIRE_THAT(estimate_ols(d), WithinAbs(gamma, 1e-9));
        RobustFit fit = estimate_rls(d);
        REQUIRE(fit.converged);
        REQUIRE_THAT(fit.elasticity, WithinAbs(gamma, 1e-6));
    }
}

TEST_CASE("robust fit agrees with least squares on clean data") {
    ElasticityDataset d;
    d.add(obs(10, 10, 9, 12));
    d.add(obs(10, 10, 11, 8));
    d.add(obs(10, 10, 10.5, 9));
    d.add(obs(10, 10, 9.5, 11));
    RobustFit fit = estimate_rls(d);
    REQUIRE(fit.converged);
    REQUIRE_THAT(fit.elasticity, WithinAbs(estimate_ols(d), 1e-6));
}

TEST_CASE("a gross demand outlier moves the robust fit far less") {
    std::mt19937_64 rng(33);
    std::normal_distribution<double> noise(0.0, 0.05);
    const double gamma = -2.0;
    ElasticityDataset d;
    for (int k = 0; k < 20; ++k) {
        double p = 9.0 + 0.1 * k;
        double f = 10.0;
        double dem = f + (p - 10.0) * f * gamma / 10.0 + noise(rng);
        d.add(obs(10.0, f, p, dem));
    }
    double clean_true = gamma;
    // One row with demand recorded at ten times its true level.
    double p_out = 10.5;
    double dem_true = 10.0 + (p_out - 10.0) * 10.0 * gamma / 10.0;
    d.add(obs(10.0, 10.0, p_out, 10.0 * dem_true));
    double ols = estimate_ols(d, {-50.0, -1e-6});
    RobustFit rls = estimate_rls(d, 0.0, {-50.0, -1e-6});
    REQUIRE(std::abs(rls.elasticity - clean_true) < std::abs(ols - clean_true));
    REQUIRE(std::abs(rls.elasticity - clean_true) < 0.3);
}

TEST_CASE("a fixed huber threshold is honored") {
    ElasticityDataset d;
    d.add(obs(10, 10, 9, 12));
    d.add(obs(10, 10, 11, 8));
    d.add(obs(10, 10, 9.2, 30));
    RobustFit loose = estimate_rls(d, 1e6, {-50.0, -1e-6});
    // A huge threshold keeps every weight at one, reducing to least squares.
    REQUIRE_THAT(loose.elasticity, WithinAbs(brute_force_slope(d), 1e-8));
    RobustFit tight = estimate_rls(d, 0.5, {-50.0, -1e-6});
    REQUIRE(std::abs(tight.elasticity - (-2.0)) < std::abs(loose.elasticity - (-2.0)));
}
