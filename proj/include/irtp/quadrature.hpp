#pragma once

#include "irtp/model.hpp"

#include <Eigen/Dense>

#include <span>

namespace irtp {

inline constexpr int kDefaultQuadPoints = 61;
inline constexpr double kDefaultQuadLo = -6.0;
inline constexpr double kDefaultQuadHi = 6.0;

// Equally spaced nodes with weights proportional to the standard normal
// density, normalized to sum to one.
class QuadratureGrid {
public:
    QuadratureGrid(Eigen::VectorXd nodes, Eigen::VectorXd weights);

    Eigen::Index size() const { return nodes_.size(); }
    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    const Eigen::VectorXd& log_weights() const { return log_weights_; }
    std::span<const double> node_span() const {
        return {nodes_.data(), static_cast<std::size_t>(nodes_.size())};
    }

private:
    Eigen::VectorXd nodes_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd log_weights_;
};

// Throws ConfigError unless q_count >= 3 and lo < hi (both finite).
QuadratureGrid build_grid(int q_count = kDefaultQuadPoints, double lo = kDefaultQuadLo,
                          double hi = kDefaultQuadHi);

double marginal_likelihood(ResponsePattern pattern, const ItemParams& params,
                           const QuadratureGrid& grid);
double log_marginal_likelihood(ResponsePattern pattern, const ItemParams& params,
                               const QuadratureGrid& grid);

// log sum_q exp(v_q).
double log_sum_exp(const Eigen::VectorXd& v);

}  // namespace irtp
