#include "irtp/estimation.hpp"

#include "irtp/errors.hpp"
#include "irtp/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace irtp {

namespace {

// Expected category counts for one item: r(q, k) = sum_i post_iq 1[y_ij = k].
using ExpectedCounts = Eigen::MatrixXd;

// Free coordinates of an item for the M-step: (a, c_1, log(c_1 - c_2), ...).
// Newton steps in these coordinates keep the intercepts ordered.
Eigen::VectorXd to_free(const Item& it) {
    const int K = it.categories();
    Eigen::VectorXd u(K);
    u(0) = it.slope;
    u(1) = it.intercepts[0];
    for (int l = 2; l < K; ++l)
        u(l) = std::log(it.intercepts[l - 2] - it.intercepts[l - 1]);
    return u;
}

Item from_free(const Eigen::VectorXd& u) {
    const int K = static_cast<int>(u.size());
    Item it;
    it.slope = u(0);
    it.intercepts.resize(K - 1);
    it.intercepts[0] = u(1);
    for (int l = 2; l < K; ++l) it.intercepts[l - 1] = it.intercepts[l - 2] - std::exp(u(l));
    return it;
}

bool strictly_ordered(const Item& it) {
    for (std::size_t k = 1; k < it.intercepts.size(); ++k)
        if (!(it.intercepts[k] < it.intercepts[k - 1])) return false;
    for (double c : it.intercepts)
        if (!std::isfinite(c)) return false;
    return std::isfinite(it.slope);
}

double item_objective(const Item& it, const ExpectedCounts& r, const Eigen::VectorXd& nodes) {
    double v = 0.0;
    for (Eigen::Index k = 0; k < r.cols(); ++k)
        for (Eigen::Index q = 0; q < r.rows(); ++q)
            if (r(q, k) > 0.0) v += r(q, k) * log_category_prob(it, static_cast<int>(k), nodes(q));
    return v;
}

// Gradient and Hessian of the expected complete-data log-likelihood in the
// item's natural coordinates (a, c_1..c_K-1).
void item_derivatives(const Item& it, const ExpectedCounts& r, const Eigen::VectorXd& nodes,
                      Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    const int K = it.categories();
    grad.setZero(K);
    hess.setZero(K, K);
    for (int k = 0; k < K; ++k)
        for (Eigen::Index q = 0; q < r.rows(); ++q)
            if (r(q, k) > 0.0)
                accumulate_category_derivatives(it, k, nodes(q), r(q, k), grad, &hess);
}

// One damped Newton M-step for a single item; returns the updated item.
Item maximize_item(const Item& start, const ExpectedCounts& r, const Eigen::VectorXd& nodes,
                   int steps, bool slope_fixed) {
    const int K = start.categories();
    Eigen::VectorXd u = to_free(start);
    Item cur = start;
    double f_cur = item_objective(cur, r, nodes);
    Eigen::VectorXd g(K);
    Eigen::MatrixXd h(K, K);

    for (int step = 0; step < steps; ++step) {
        item_derivatives(cur, r, nodes, g, h);

        // Chain rule to free coordinates: c_k = u_1 - sum_{l=2..k} exp(u_l).
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(K, K);
        T(0, 0) = 1.0;
        for (int k = 1; k < K; ++k) {
            T(k, 1) = 1.0;
            for (int l = 2; l <= k; ++l) T(k, l) = -std::exp(u(l));
        }
        Eigen::VectorXd gu = T.transpose() * g;
        Eigen::MatrixXd hu = T.transpose() * h * T;
        for (int l = 2; l < K; ++l) hu(l, l) += -std::exp(u(l)) * g.tail(K - l).sum();

        if (slope_fixed) {
            gu(0) = 0.0;
            hu.row(0).setZero();
            hu.col(0).setZero();
            hu(0, 0) = -1.0;
        }

        // Ridge the negative Hessian until it is positive definite.
        Eigen::MatrixXd neg = -hu;
        const double scale = std::max(1e-8, neg.diagonal().cwiseAbs().maxCoeff());
        double ridge = 0.0;
        Eigen::LLT<Eigen::MatrixXd> llt;
        for (int attempt = 0; attempt < 60; ++attempt) {
            llt.compute(neg + ridge * Eigen::MatrixXd::Identity(K, K));
            if (llt.info() == Eigen::Success) break;
            ridge = ridge == 0.0 ? 1e-6 * scale : ridge * 4.0;
        }
        if (llt.info() != Eigen::Success) break;
        Eigen::VectorXd delta = llt.solve(gu);
        if (!delta.allFinite() || delta.cwiseAbs().maxCoeff() < 1e-12) break;

        // Cap wild steps, then halve until the objective does not decrease.
        const double len = delta.cwiseAbs().maxCoeff();
        if (len > 2.0) delta *= 2.0 / len;
        bool accepted = false;
        double t = 1.0;
        for (int half = 0; half < 30; ++half, t *= 0.5) {
            const Eigen::VectorXd trial = u + t * delta;
            const Item cand = from_free(trial);
            if (!strictly_ordered(cand)) continue;
            const double f = item_objective(cand, r, nodes);
            if (std::isfinite(f) && f >= f_cur) {
                u = trial;
                cur = cand;
                f_cur = f;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    return cur;
}

void check_estimable(const ResponseMatrix& data, const ItemParams& init) {
    if (data.rows() < 2) throw EstimationError("at least two respondents are required");
    data.validate(init);
    for (std::size_t j = 0; j < data.cols(); ++j) {
        const int first = data.at(0, j);
        bool varies = false;
        for (std::size_t i = 1; i < data.rows() && !varies; ++i) varies = data.at(i, j) != first;
        if (!varies) {
            std::string name = data.item_names().empty() ? std::to_string(j + 1)
                                                         : data.item_names()[j];
            throw EstimationError("item " + name + " has all responses in category " +
                                      std::to_string(first),
                                  static_cast<int>(j));
        }
    }
}

}  // namespace

ItemParams default_start(const ResponseMatrix& data, std::span<const int> categories) {
    if (categories.size() != data.cols())
        throw ConfigError("category count list does not match the number of items");
    const double n = static_cast<double>(data.rows());
    // Logits shrink by about this factor when a unit slope is integrated
    // against the standard normal.
    const double attenuation = std::sqrt(1.0 + 1.0 / (1.702 * 1.702));
    std::vector<Item> items;
    for (std::size_t j = 0; j < data.cols(); ++j) {
        const int K = categories[j];
        if (K < 2) throw ConfigError("item " + std::to_string(j + 1) + " needs at least 2 categories");
        std::vector<double> freq(K, 0.0);
        for (std::size_t i = 0; i < data.rows(); ++i) {
            const int y = data.at(i, j);
            if (y >= K) throw CategoryRangeError("row " + std::to_string(i + 1) + ", column " +
                                                 std::to_string(j + 1) + ": category " +
                                                 std::to_string(y) + " exceeds K-1");
            freq[y] += 1.0;
        }
        Item it;
        it.slope = 1.0;
        double above = n;
        for (int k = 1; k < K; ++k) {
            above -= freq[k - 1];
            const double p = std::clamp(above / n, 0.5 / n, 1.0 - 0.5 / n);
            double c = attenuation * std::log(p / (1.0 - p));
            if (!it.intercepts.empty() && c > it.intercepts.back() - 0.05)
                c = it.intercepts.back() - 0.05;
            it.intercepts.push_back(c);
        }
        items.push_back(std::move(it));
    }
    return ItemParams(std::move(items));
}

double sample_log_likelihood(const PatternTable& patterns, const ItemParams& params,
                             const QuadratureGrid& grid) {
    const ItemGridTable table(params, grid.node_span());
    double ll = 0.0;
    for (std::size_t u = 0; u < patterns.size(); ++u)
        ll += patterns.count(u) * evaluate_pattern(table, grid, patterns.pattern(u), false).log_marginal;
    return ll;
}

double sample_log_likelihood(const ResponseMatrix& data, const ItemParams& params,
                             const QuadratureGrid& grid) {
    data.validate(params);
    return sample_log_likelihood(PatternTable(data), params, grid);
}

FitResult fit_em(const ResponseMatrix& data, const ItemParams& init, const QuadratureGrid& grid,
                 const FitOptions& options) {
    check_estimable(data, init);
    if (!options.fixed_slopes.empty() && options.fixed_slopes.size() != init.size())
        throw ConfigError("fixed_slopes must have one entry per item");

    const PatternTable patterns(data);
    const std::size_t m = init.size();
    const Eigen::Index Q = grid.size();
    const Eigen::VectorXd& nodes = grid.nodes();

    FitResult res;
    res.n = data.rows();
    ItemParams cur = init;
    std::vector<ExpectedCounts> r(m);

    for (int iter = 0; iter < options.max_iter; ++iter) {
        // E-step.
        const ItemGridTable table(cur, grid.node_span());
        for (std::size_t j = 0; j < m; ++j) r[j].setZero(Q, cur.categories(j));
        double ll = 0.0;
        for (std::size_t u = 0; u < patterns.size(); ++u) {
            const auto y = patterns.pattern(u);
            const double w = patterns.count(u);
            const PatternEvaluation ev = evaluate_pattern(table, grid, y, false);
            ll += w * ev.log_marginal;
            for (std::size_t j = 0; j < m; ++j) r[j].col(y[j]) += w * ev.post;
        }
        res.log_likelihood_trace.push_back(ll);

        // M-step, item by item.
        std::vector<Item> next;
        next.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            const bool fixed = !options.fixed_slopes.empty() && options.fixed_slopes[j];
            next.push_back(maximize_item(cur[j], r[j], nodes, options.newton_steps, fixed));
        }
        ItemParams upd(std::move(next));
        res.last_change = (upd.pack() - cur.pack()).cwiseAbs().maxCoeff();
        cur = std::move(upd);
        res.iterations = iter + 1;
        if (res.last_change < options.tol) {
            res.converged = true;
            break;
        }
    }

    res.params = cur;
    res.nu_hat = cur.pack();
    res.log_likelihood = sample_log_likelihood(patterns, cur, grid);
    res.log_likelihood_trace.push_back(res.log_likelihood);
    res.info = observed_information(patterns, cur, grid, options.info);
    return res;
}

std::string to_string(InfoEstimator estimator) {
    return estimator == InfoEstimator::kLouis ? "louis" : "xpd";
}

InfoEstimator parse_info_estimator(std::string_view name) {
    if (name == "xpd") return InfoEstimator::kCrossProduct;
    if (name == "louis") return InfoEstimator::kLouis;
    throw ConfigError("unknown information estimator '" + std::string(name) + "'");
}

ParamVector marginal_score(ResponsePattern pattern, const ItemParams& params,
                           const QuadratureGrid& grid) {
    validate_pattern(pattern, params);
    const ItemGridTable table(params, grid.node_span());
    const PatternEvaluation ev = evaluate_pattern(table, grid, pattern, false);
    ParamVector g = ParamVector::Zero(params.num_params());
    table.accumulate_score(pattern, ev.post, 1.0, g);
    return g;
}

InfoMatrix observed_information(const PatternTable& patterns, const ItemParams& params,
                                const QuadratureGrid& grid, InfoEstimator estimator) {
    const Eigen::Index p = params.num_params();
    const ItemGridTable table(params, grid.node_span());
    const Eigen::VectorXd& nodes = grid.nodes();
    InfoMatrix info = InfoMatrix::Zero(p, p);
    ParamVector g(p);

    for (std::size_t u = 0; u < patterns.size(); ++u) {
        const auto y = patterns.pattern(u);
        const double w = patterns.count(u);
        const bool louis = estimator == InfoEstimator::kLouis;
        const PatternEvaluation ev = evaluate_pattern(table, grid, y, louis);
        g.setZero();
        table.accumulate_score(y, ev.post, 1.0, g);
        if (!louis) {
            info.selfadjointView<Eigen::Lower>().rankUpdate(g, w);
            continue;
        }
        // Louis: E[-d2 log f(y|theta)] - Cov[score] under the posterior.
        for (std::size_t j = 0; j < params.size(); ++j) {
            const int K = params.categories(j);
            Eigen::VectorXd gbuf = Eigen::VectorXd::Zero(K);
            Eigen::MatrixXd hbuf = Eigen::MatrixXd::Zero(K, K);
            for (Eigen::Index q = 0; q < grid.size(); ++q)
                accumulate_category_derivatives(params[j], y[j], nodes(q), ev.post(q), gbuf, &hbuf);
            const Eigen::Index off = params.offset(j);
            info.block(off, off, K, K) -= w * hbuf;
        }
        const Eigen::MatrixXd ws = ev.scores * ev.post.cwiseSqrt().asDiagonal();
        info -= w * (ws * ws.transpose());
        info += w * (g * g.transpose());
    }
    if (estimator == InfoEstimator::kCrossProduct)
        info = info.selfadjointView<Eigen::Lower>();
    info /= patterns.total();
    return 0.5 * (info + info.transpose());
}

InfoMatrix observed_information(const ResponseMatrix& data, const ItemParams& params,
                                const QuadratureGrid& grid, InfoEstimator estimator) {
    data.validate(params);
    return observed_information(PatternTable(data), params, grid, estimator);
}

Eigen::MatrixXd invert_information(const InfoMatrix& info) {
    const Eigen::Index p = info.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
        // Cholesky can succeed on a numerically singular matrix; check the
        // conditioning through the factor's diagonal.
        const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
        ok = d.minCoeff() > 1e-7 * d.maxCoeff();
    }
    if (!ok) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info, Eigen::EigenvaluesOnly);
        throw InversionError("information matrix is not positive definite",
                             es.eigenvalues().minCoeff());
    }
    return llt.solve(Eigen::MatrixXd::Identity(p, p));
}

}  // namespace irtp
