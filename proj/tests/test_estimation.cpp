#include "irtp/errors.hpp"
#include "irtp/estimation.hpp"
#include "irtp/rng.hpp"
#include "irtp/scoring.hpp"
#include "irtp/simulation.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace irtp;
using irtp::testing::fd_gradient;
using irtp::testing::rel_error;
using Catch::Approx;

namespace {

ResponseMatrix simulate(const ItemParams& p, std::size_t n, std::uint32_t rep) {
    Philox4x32 rng = make_stream(777, 0, rep, StreamPurpose::kResponses);
    return generate_responses(p, n, rng);
}

ItemParams eight_item_2pl() {
    SimDesign d = SimDesign::standard(ModelKind::k2pl);
    Philox4x32 rng = make_stream(99, 0, 0, StreamPurpose::kItemParams);
    return draw_item_params(d, 8, rng);
}

FitResult fit_default(const ResponseMatrix& data, const FitOptions& opts = {}) {
    std::vector<int> cats = data.observed_categories();
    return fit_em(data, default_start(data, cats), build_grid(), opts);
}

ResponseMatrix rows_twice(const ResponseMatrix& d) {
    std::vector<int> v = d.values();
    v.insert(v.end(), d.values().begin(), d.values().end());
    return ResponseMatrix(d.rows() * 2, d.cols(), v);
}

ResponseMatrix rows_reversed(const ResponseMatrix& d) {
    std::vector<int> v;
    for (std::size_t i = d.rows(); i-- > 0;)
        for (std::size_t j = 0; j < d.cols(); ++j) v.push_back(d.at(i, j));
    return ResponseMatrix(d.rows(), d.cols(), v);
}

}  // namespace

TEST_CASE("marginal_score matches finite differences of log f(y)") {
    std::mt19937_64 rng(41);
    const QuadratureGrid g = build_grid();
    double worst = 0.0;
    for (int draw = 0; draw < 120; ++draw) {
        const ItemParams p = irtp::testing::random_params(rng, 1 + draw % 8, 5);
        const std::vector<int> y = irtp::testing::random_pattern(rng, p);
        const std::vector<int> cats = p.category_counts();
        auto f = [&](const Eigen::VectorXd& nu) {
            return log_marginal_likelihood(y, ItemParams::unpack(cats, nu), g);
        };
        worst = std::max(worst, rel_error(marginal_score(y, p, g), fd_gradient(f, p.pack())));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("marginal score has mean zero over all patterns") {
    std::mt19937_64 rng(42);
    const QuadratureGrid g = build_grid();
    for (int draw = 0; draw < 8; ++draw) {
        const ItemParams p = irtp::testing::random_params(rng, 1 + draw % 4, 3);
        Eigen::VectorXd total = Eigen::VectorXd::Zero(p.num_params());
        for (const auto& y : irtp::testing::all_patterns(p))
            total += marginal_likelihood(y, p, g) * marginal_score(y, p, g);
        CHECK(total.cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("slope score of a flat item is EAP times the residual") {
    const QuadratureGrid g = build_grid();
    const ItemParams p({Item{1.2, {0.4}}, Item{0.0, {-0.3}}, Item{0.9, {1.0, -0.6}}});
    const double prob = 1.0 / (1.0 + std::exp(0.3));
    for (const auto& y : irtp::testing::all_patterns(p)) {
        const double eap = posterior_summary(y, p, g).eap;
        CHECK(marginal_score(y, p, g)(2) == Approx(eap * (y[1] - prob)).margin(1e-13));
    }
}

TEST_CASE("EM recovers 2PL slopes") {
    // Slopes and difficulties inside the simulation design's ranges, away
    // from the extreme difficulties that make single slopes poorly determined.
    const double a[] = {0.6, 0.9, 1.2, 1.5, 1.8, 1.0, 1.4, 0.8};
    const double b[] = {-1.2, -0.6, 0.0, 0.5, 1.0, -0.3, 0.8, 1.3};
    std::vector<Item> items;
    for (int j = 0; j < 8; ++j) items.push_back(Item{a[j], {-a[j] * b[j]}});
    const ItemParams truth(items);
    const ResponseMatrix data = simulate(truth, 1000, 1);
    const FitResult fit = fit_default(data);
    REQUIRE(fit.converged);
    const Eigen::MatrixXd cov = invert_information(fit.info) / 1000.0;
    double ss = 0.0, expected = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        const double d = fit.params[j].slope - truth[j].slope;
        ss += d * d;
        expected += cov(truth.offset(j), truth.offset(j));
    }
    CHECK(std::sqrt(expected / truth.size()) < 0.15);
    CHECK(std::sqrt(ss / truth.size()) <= 0.15);
}

TEST_CASE("EM properties on a GRM fit") {
    SimDesign d = SimDesign::standard(ModelKind::kGrm);
    Philox4x32 prng = make_stream(5, 0, 0, StreamPurpose::kItemParams);
    const ItemParams truth = draw_item_params(d, 6, prng);
    const ResponseMatrix data = simulate(truth, 800, 2);
    const QuadratureGrid g = build_grid();
    const FitResult fit = fit_default(data);
    REQUIRE(fit.converged);
    CHECK(fit.last_change < 1e-4);
    CHECK(fit.info.rows() == truth.num_params());

    SECTION("log-likelihood never decreases") {
        REQUIRE(fit.log_likelihood_trace.size() >= 2);
        for (std::size_t t = 1; t < fit.log_likelihood_trace.size(); ++t)
            CHECK(fit.log_likelihood_trace[t] >= fit.log_likelihood_trace[t - 1] - 1e-10);
        CHECK(fit.log_likelihood == Approx(sample_log_likelihood(data, fit.params, g)).epsilon(1e-12));
    }
    SECTION("mean marginal score vanishes at convergence") {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(truth.num_params());
        for (std::size_t i = 0; i < data.rows(); ++i) mean += marginal_score(data.row(i), fit.params, g);
        mean /= static_cast<double>(data.rows());
        CHECK(mean.cwiseAbs().maxCoeff() < 10 * 1e-4);
    }
    SECTION("refitting from the solution is a fixed point") {
        const FitResult again = fit_em(data, fit.params, g);
        CHECK(again.converged);
        CHECK((again.nu_hat - fit.nu_hat).cwiseAbs().maxCoeff() < 1e-4);
    }
    SECTION("information is symmetric and positive definite") {
        CHECK((fit.info - fit.info.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.info);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        const InfoMatrix louis = observed_information(data, fit.params, g, InfoEstimator::kLouis);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> el(louis);
        CHECK(el.eigenvalues().minCoeff() > 0.0);
    }
    SECTION("intercept order is preserved") {
        for (std::size_t j = 0; j < fit.params.size(); ++j) {
            const auto& c = fit.params[j].intercepts;
            for (std::size_t k = 1; k < c.size(); ++k) CHECK(c[k] < c[k - 1]);
        }
    }
}

TEST_CASE("fixed zero slope with balanced responses gives a zero intercept") {
    std::vector<int> v(200);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i % 2);
    const ResponseMatrix data(200, 1, v);
    FitOptions opts;
    opts.fixed_slopes = {true};
    const FitResult fit = fit_em(data, ItemParams({Item{0.0, {0.7}}}), build_grid(), opts);
    CHECK(fit.converged);
    CHECK(fit.params[0].slope == 0.0);
    CHECK(std::abs(fit.params[0].intercepts[0]) < 1e-4);
}

TEST_CASE("non-convergence is flagged, not thrown") {
    const ResponseMatrix data = simulate(eight_item_2pl(), 300, 3);
    FitOptions opts;
    opts.max_iter = 2;
    const FitResult fit = fit_default(data, opts);
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 2);
}

TEST_CASE("estimation input errors") {
    const ResponseMatrix one(1, 2, {0, 1});
    CHECK_THROWS_AS(fit_em(one, ItemParams({Item{1.0, {0.0}}, Item{1.0, {0.0}}}), build_grid()),
                    EstimationError);
    const ResponseMatrix flat(4, 2, {0, 1, 1, 1, 0, 1, 1, 1}, {"alpha", "beta"});
    try {
        fit_em(flat, ItemParams({Item{1.0, {0.0}}, Item{1.0, {0.0}}}), build_grid());
        FAIL("expected EstimationError");
    } catch (const EstimationError& e) {
        CHECK(e.item() == 1);
        CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
}

TEST_CASE("cross-product information is the mean outer product of scores") {
    const ItemParams p = eight_item_2pl();
    const ResponseMatrix data = simulate(p, 400, 4);
    const QuadratureGrid g = build_grid();
    Eigen::MatrixXd direct = Eigen::MatrixXd::Zero(p.num_params(), p.num_params());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const ParamVector s = marginal_score(data.row(i), p, g);
        direct += s * s.transpose();
    }
    direct /= static_cast<double>(data.rows());
    const InfoMatrix info = observed_information(data, p, g);
    CHECK(rel_error(info, direct) < 1e-12);
    CHECK(rel_error(observed_information(rows_twice(data), p, g), info) < 1e-12);
    CHECK(rel_error(observed_information(rows_reversed(data), p, g), info) < 1e-12);
    const InfoMatrix louis = observed_information(data, p, g, InfoEstimator::kLouis);
    CHECK(rel_error(observed_information(rows_twice(data), p, g, InfoEstimator::kLouis), louis) < 1e-12);
}

TEST_CASE("one-item information agrees with the finite-difference Hessian") {
    const ItemParams truth({Item{1.3, {-0.4}}});
    const ResponseMatrix data = simulate(truth, 5000, 5);
    const QuadratureGrid g = build_grid();
    const std::vector<int> cats{2};
    auto grad = [&](const Eigen::VectorXd& nu, Eigen::Index r) {
        const ItemParams p = ItemParams::unpack(cats, nu);
        double s = 0.0;
        for (std::size_t i = 0; i < data.rows(); ++i) s += marginal_score(data.row(i), p, g)(r);
        return -s / static_cast<double>(data.rows());
    };
    Eigen::MatrixXd hess(2, 2);
    for (Eigen::Index r = 0; r < 2; ++r)
        hess.row(r) = fd_gradient([&](const Eigen::VectorXd& nu) { return grad(nu, r); }, truth.pack())
                          .transpose();
    const InfoMatrix xpd = observed_information(data, truth, g);
    CHECK((xpd - hess).norm() / hess.norm() < 0.05);
}

TEST_CASE("Louis information equals the Hessian of the marginal log-likelihood") {
    std::mt19937_64 rng(43);
    const QuadratureGrid g = build_grid();
    for (int draw = 0; draw < 3; ++draw) {
        const ItemParams p = irtp::testing::random_params(rng, 3, 4);
        const ResponseMatrix data = simulate(p, 200, 10 + draw);
        const PatternTable table(data);
        const std::vector<int> cats = p.category_counts();
        const Eigen::Index np = p.num_params();
        Eigen::MatrixXd hess(np, np);
        for (Eigen::Index r = 0; r < np; ++r) {
            auto f = [&](const Eigen::VectorXd& nu) {
                const ItemParams q = ItemParams::unpack(cats, nu);
                double s = 0.0;
                for (std::size_t u = 0; u < table.size(); ++u)
                    s += table.count(u) * marginal_score(table.pattern(u), q, g)(r);
                return -s / table.total();
            };
            hess.row(r) = fd_gradient(f, p.pack()).transpose();
        }
        const InfoMatrix louis = observed_information(table, p, g, InfoEstimator::kLouis);
        CHECK(rel_error(louis, hess) < 1e-6);
    }
}

TEST_CASE("inverting a singular information matrix reports the smallest eigenvalue") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 1.0, 1.0, 1.0;
    try {
        invert_information(m);
        FAIL("expected InversionError");
    } catch (const InversionError& e) {
        CHECK(std::abs(e.smallest_eigenvalue()) < 1e-12);
        CHECK(std::string(e.what()).find("smallest eigenvalue") != std::string::npos);
    }
    Eigen::MatrixXd spd(2, 2);
    spd << 2.0, 0.5, 0.5, 1.0;
    CHECK(rel_error(invert_information(spd), Eigen::MatrixXd(spd.inverse())) < 1e-14);
}

TEST_CASE("default start values are ordered") {
    const ResponseMatrix data(6, 2, {0, 2, 1, 2, 2, 2, 0, 0, 1, 1, 2, 2});
    const std::vector<int> cats{3, 3};
    const ItemParams start = default_start(data, cats);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(start[j].slope == 1.0);
        CHECK(start[j].intercepts[0] > start[j].intercepts[1]);
    }
}
