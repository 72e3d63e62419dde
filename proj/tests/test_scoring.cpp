#include "irtp/quadrature.hpp"
#include "irtp/responses.hpp"
#include "irtp/scoring.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>

using namespace irtp;
using irtp::testing::fd_gradient;
using irtp::testing::rel_error;
using Catch::Approx;

TEST_CASE("uninformative items return the prior") {
    const QuadratureGrid g = build_grid();
    const ItemParams p({Item{0.0, {0.4}}, Item{0.0, {1.0, -0.5}}});
    const double prior_var = g.nodes().array().square().matrix().dot(g.weights());
    for (const auto& y : irtp::testing::all_patterns(p)) {
        const PosteriorSummary s = posterior_summary(y, p, g);
        CHECK(std::abs(s.eap) < 1e-12);
        CHECK(s.post_var == Approx(prior_var).epsilon(1e-12));
        CHECK(std::abs(s.post_var - 1.0) < 2e-3);
    }
}

TEST_CASE("one symmetric item gives mirrored EAPs") {
    const QuadratureGrid g = build_grid();
    const ItemParams p({Item{1.0, {0.0}}});
    const double e0 = posterior_summary(std::vector<int>{0}, p, g).eap;
    const double e1 = posterior_summary(std::vector<int>{1}, p, g).eap;
    CHECK(e1 > 0.0);
    CHECK(e1 == Approx(-e0).margin(1e-14));
}

TEST_CASE("EAP matches fine-grid integration") {
    const QuadratureGrid g = build_grid();
    const ItemParams p({Item{1.5, {0.3}}});
    auto lik = [](double t) { return 1.0 / (1.0 + std::exp(-(1.5 * t + 0.3))); };
    const double num = irtp::testing::normal_integral([&](double t) { return t * lik(t); });
    const double den = irtp::testing::normal_integral(lik);
    const double oracle = num / den;
    CHECK(std::abs(posterior_summary(std::vector<int>{1}, p, g).eap - oracle) < 1e-4);
}

TEST_CASE("posterior summary invariants") {
    std::mt19937_64 rng(31);
    const QuadratureGrid g = build_grid();
    for (int draw = 0; draw < 50; ++draw) {
        const ItemParams p = irtp::testing::random_params(rng, 1 + draw % 32, 5);
        const std::vector<int> y = irtp::testing::random_pattern(rng, p);
        const PosteriorSummary s = posterior_summary(y, p, g);
        CHECK((s.weights.array() >= 0.0).all());
        CHECK(std::abs(s.weights.sum() - 1.0) < 1e-12);
        CHECK(s.post_var >= 0.0);
        CHECK(s.eap >= g.nodes()(0));
        CHECK(s.eap <= g.nodes()(g.size() - 1));
        CHECK(std::isfinite(s.eap));
    }
}

TEST_CASE("EAP and posterior variance gradients match finite differences") {
    std::mt19937_64 rng(32);
    const QuadratureGrid g = build_grid();
    double worst_eap = 0.0, worst_var = 0.0;
    for (int draw = 0; draw < 120; ++draw) {
        const ItemParams p = irtp::testing::random_params(rng, 1 + draw % 6, 4);
        const std::vector<int> y = irtp::testing::random_pattern(rng, p);
        const std::vector<int> cats = p.category_counts();
        auto eap = [&](const Eigen::VectorXd& nu) {
            return posterior_summary(y, ItemParams::unpack(cats, nu), g).eap;
        };
        auto var = [&](const Eigen::VectorXd& nu) {
            return posterior_summary(y, ItemParams::unpack(cats, nu), g).post_var;
        };
        worst_eap = std::max(worst_eap, rel_error(eap_gradient(y, p, g), fd_gradient(eap, p.pack())));
        worst_var =
            std::max(worst_var, rel_error(postvar_gradient(y, p, g), fd_gradient(var, p.pack())));
    }
    CHECK(worst_eap < 1e-6);
    CHECK(worst_var < 1e-6);
}

TEST_CASE("gradients for uninformative items") {
    const QuadratureGrid g = build_grid();
    const ItemParams p({Item{0.0, {0.2}}, Item{0.0, {0.9, -0.3}}});
    for (const auto& y : irtp::testing::all_patterns(p)) {
        const ParamVector de = eap_gradient(y, p, g);
        CHECK(std::abs(de(1)) < 1e-12);
        CHECK(std::abs(de(3)) < 1e-12);
        CHECK(std::abs(de(4)) < 1e-12);
        CHECK(postvar_gradient(y, p, g).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("symmetric item gradients across the two responses") {
    const QuadratureGrid g = build_grid();
    const ItemParams p({Item{1.0, {0.0}}});
    const ParamVector d0 = eap_gradient(std::vector<int>{0}, p, g);
    const ParamVector d1 = eap_gradient(std::vector<int>{1}, p, g);
    // eap(0; a, c) = -eap(1; a, -c): slope derivatives flip sign across
    // the two responses while intercept derivatives coincide at c = 0.
    CHECK(d1(0) == Approx(-d0(0)).margin(1e-14));
    CHECK(d1(1) == Approx(d0(1)).margin(1e-14));
    CHECK(d1(1) < 0.0);
}

TEST_CASE("duplicated items answered alike have identical gradient blocks") {
    const QuadratureGrid g = build_grid();
    const Item it{1.2, {0.7, -0.4}};
    const ItemParams p({it, it, Item{0.8, {0.1}}});
    const std::vector<int> y{2, 2, 0};
    const ParamVector de = eap_gradient(y, p, g);
    const ParamVector dv = postvar_gradient(y, p, g);
    CHECK(rel_error(Eigen::VectorXd(de.segment(0, 3)), Eigen::VectorXd(de.segment(3, 3))) < 1e-13);
    CHECK(rel_error(Eigen::VectorXd(dv.segment(0, 3)), Eigen::VectorXd(dv.segment(3, 3))) < 1e-13);
}

TEST_CASE("law of total variance at the population level") {
    std::mt19937_64 rng(33);
    const QuadratureGrid g = build_grid();
    for (int draw = 0; draw < 5; ++draw) {
        const ItemParams p = irtp::testing::random_params(rng, 4, 3);
        double m1 = 0.0, m2 = 0.0;
        for (const auto& y : irtp::testing::all_patterns(p)) {
            const double f = marginal_likelihood(y, p, g);
            const PosteriorSummary s = posterior_summary(y, p, g);
            m1 += f * s.eap;
            m2 += f * (s.eap * s.eap + s.post_var);
        }
        CHECK(std::abs(m2 - m1 * m1 - 1.0) < 2e-3);
    }
}

TEST_CASE("EAP ordering by responses") {
    std::mt19937_64 rng(34);
    const QuadratureGrid g = build_grid();
    SECTION("equal slopes: EAP depends on the summed score only and increases with it") {
        std::vector<Item> items;
        for (double c : {-0.8, 0.0, 0.3, 1.1, -1.5, 0.6}) items.push_back(Item{1.3, {c}});
        const ItemParams p(items);
        std::map<int, double> by_sum;
        for (const auto& y : irtp::testing::all_patterns(p)) {
            int s = 0;
            for (int v : y) s += v;
            const double e = posterior_summary(y, p, g).eap;
            auto [it, inserted] = by_sum.emplace(s, e);
            if (!inserted) CHECK(e == Approx(it->second).margin(1e-12));
        }
        for (auto it = std::next(by_sum.begin()); it != by_sum.end(); ++it)
            CHECK(it->second > std::prev(it)->second);
    }
    SECTION("positive slopes: raising any single response raises the EAP") {
        for (int draw = 0; draw < 10; ++draw) {
            const ItemParams p = irtp::testing::random_params(rng, 6, 2, 0.5, 2.0);
            for (const auto& y : irtp::testing::all_patterns(p))
                for (std::size_t j = 0; j < y.size(); ++j) {
                    if (y[j] == 1) continue;
                    auto up = y;
                    up[j] = 1;
                    CHECK(posterior_summary(up, p, g).eap > posterior_summary(y, p, g).eap);
                }
        }
    }
}

TEST_CASE("score_responses follows row order") {
    const QuadratureGrid g = build_grid();
    const ItemParams p({Item{1.0, {0.0}}, Item{1.4, {-0.3}}});
    const ResponseMatrix data(3, 2, {1, 1, 0, 0, 1, 0});
    const auto out = score_responses(data, p, g);
    REQUIRE(out.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const PosteriorSummary s = posterior_summary(data.row(i), p, g);
        CHECK(out[i].eap == Approx(s.eap).margin(1e-14));
        CHECK(out[i].post_var == Approx(s.post_var).margin(1e-14));
    }
    CHECK(out[0].eap > out[2].eap);
    CHECK(out[2].eap > out[1].eap);
}
