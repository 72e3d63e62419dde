#include "irtp/errors.hpp"
#include "irtp/quadrature.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace irtp;
using Catch::Approx;

TEST_CASE("default grid layout") {
    const QuadratureGrid g = build_grid();
    REQUIRE(g.size() == 61);
    CHECK(g.nodes()(0) == -6.0);
    CHECK(g.nodes()(60) == 6.0);
    for (Eigen::Index q = 1; q < g.size(); ++q)
        CHECK(g.nodes()(q) - g.nodes()(q - 1) == Approx(0.2).margin(1e-12));
    CHECK(std::abs(g.weights().sum() - 1.0) < 1e-12);
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        CHECK(g.weights()(q) == Approx(g.weights()(60 - q)).epsilon(1e-14));
        CHECK(g.log_weights()(q) == Approx(std::log(g.weights()(q))).epsilon(1e-13));
    }
}

TEST_CASE("weights sum to one for arbitrary grids") {
    for (int q : {3, 7, 40, 121, 301})
        for (double lo : {-8.0, -4.0, -1.0}) {
            const QuadratureGrid g = build_grid(q, lo, 3.5);
            CHECK(std::abs(g.weights().sum() - 1.0) < 1e-12);
            CHECK((g.weights().array() > 0.0).all());
        }
}

TEST_CASE("grid moments match the standard normal") {
    const QuadratureGrid g = build_grid();
    const double m1 = irtp::testing::normal_integral([](double x) { return x; });
    const double m2 = irtp::testing::normal_integral([](double x) { return x * x; });
    REQUIRE(std::abs(m1) < 1e-12);
    REQUIRE(std::abs(m2 - 1.0) < 1e-9);
    const double g1 = g.nodes().dot(g.weights());
    const double g2 = g.nodes().array().square().matrix().dot(g.weights());
    CHECK(std::abs(g1 - m1) < 2e-3);
    CHECK(std::abs(g2 - m2) < 2e-3);
}

TEST_CASE("invalid grids are configuration errors") {
    CHECK_THROWS_AS(build_grid(2), ConfigError);
    CHECK_THROWS_AS(build_grid(61, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid(61, 2.0, -2.0), ConfigError);
    CHECK_THROWS_AS(build_grid(61, -INFINITY, 6.0), ConfigError);
}

TEST_CASE("marginal likelihood examples") {
    const QuadratureGrid g = build_grid();
    const ItemParams none{std::vector<Item>{}};
    CHECK(marginal_likelihood(std::vector<int>{}, none, g) == Approx(1.0).margin(1e-14));
    const ItemParams flat({Item{0.0, {0.0}}});
    CHECK(marginal_likelihood(std::vector<int>{1}, flat, g) == Approx(0.5).margin(1e-14));
    const ItemParams unit({Item{1.0, {0.0}}});
    CHECK(marginal_likelihood(std::vector<int>{1}, unit, g) == Approx(0.5).margin(1e-12));
}

TEST_CASE("marginal likelihood sums to one over all patterns") {
    std::mt19937_64 rng(21);
    const QuadratureGrid g = build_grid();
    for (int draw = 0; draw < 10; ++draw) {
        const std::size_t m = 1 + draw % 6;
        const ItemParams p = irtp::testing::random_params(rng, m, draw % 2 ? 3 : 2);
        double total = 0.0;
        for (const auto& y : irtp::testing::all_patterns(p)) total += marginal_likelihood(y, p, g);
        CHECK(std::abs(total - 1.0) < 1e-8);
    }
}

TEST_CASE("log marginal likelihood is stable for long tests") {
    std::vector<Item> items(40, Item{2.0, {1.5}});
    const ItemParams p(items);
    std::vector<int> y(40, 0);
    y[0] = 1;
    const double v = log_marginal_likelihood(y, p, build_grid());
    CHECK(std::isfinite(v));
    CHECK(v < 0.0);
}

TEST_CASE("doubling the grid barely moves the marginal") {
    std::mt19937_64 rng(22);
    const QuadratureGrid g61 = build_grid(61);
    const QuadratureGrid g121 = build_grid(121);
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        const ItemParams p = irtp::testing::random_params(rng, 4, 2, 0.5, 2.0);
        for (const auto& y : irtp::testing::all_patterns(p))
            worst = std::max(worst, std::abs(marginal_likelihood(y, p, g61) -
                                             marginal_likelihood(y, p, g121)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("log_sum_exp") {
    Eigen::VectorXd v(3);
    v << -1000.0, -1000.0, -1000.0 - std::log(2.0);
    CHECK(log_sum_exp(v) == Approx(-1000.0 + std::log(2.5)).epsilon(1e-15));
}
