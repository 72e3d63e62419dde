#include "irtp/quadrature.hpp"

#include "irtp/errors.hpp"

#include <cmath>
#include <string>

namespace irtp {

QuadratureGrid::QuadratureGrid(Eigen::VectorXd nodes, Eigen::VectorXd weights)
    : nodes_(std::move(nodes)), weights_(std::move(weights)) {
    if (nodes_.size() != weights_.size() || nodes_.size() < 3)
        throw ConfigError("quadrature grid needs at least 3 nodes with matching weights");
    log_weights_ = weights_.array().log();
}

QuadratureGrid build_grid(int q_count, double lo, double hi) {
    if (q_count < 3)
        throw ConfigError("quadrature needs at least 3 points, got " + std::to_string(q_count));
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw ConfigError("quadrature bounds must satisfy lo < hi");
    Eigen::VectorXd nodes(q_count);
    Eigen::VectorXd dens(q_count);
    for (int q = 0; q < q_count; ++q) {
        nodes(q) = lo + (hi - lo) * static_cast<double>(q) / static_cast<double>(q_count - 1);
        dens(q) = std::exp(-0.5 * nodes(q) * nodes(q));
    }
    // The 1/sqrt(2 pi) constant cancels in the normalization.
    return QuadratureGrid(std::move(nodes), dens / dens.sum());
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().sum());
}

double log_marginal_likelihood(ResponsePattern pattern, const ItemParams& params,
                               const QuadratureGrid& grid) {
    validate_pattern(pattern, params);
    Eigen::VectorXd lv(grid.size());
    for (Eigen::Index q = 0; q < grid.size(); ++q)
        lv(q) = log_conditional_likelihood(pattern, grid.nodes()(q), params) +
                grid.log_weights()(q);
    return log_sum_exp(lv);
}

double marginal_likelihood(ResponsePattern pattern, const ItemParams& params,
                           const QuadratureGrid& grid) {
    return std::exp(log_marginal_likelihood(pattern, params, grid));
}

}  // namespace irtp
