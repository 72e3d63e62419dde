#pragma once

#include "irtp/model.hpp"
#include "irtp/quadrature.hpp"
#include "irtp/responses.hpp"

#include <Eigen/Dense>

#include <vector>

namespace irtp {

struct PosteriorSummary {
    double eap = 0.0;
    double post_var = 0.0;
    Eigen::VectorXd weights;  // posterior mass at each quadrature node
};

// Everything the scoring, estimation and reliability code needs from one
// response pattern on the grid. `scores` holds score_vector(y, theta_q) in
// column q and is only filled when requested.
struct PatternEvaluation {
    Eigen::VectorXd log_conditional;  // log f(y | theta_q)
    double log_marginal = 0.0;        // log f(y)
    Eigen::VectorXd post;
    double eap = 0.0;
    double post_var = 0.0;
    Eigen::MatrixXd scores;
};

PatternEvaluation evaluate_pattern(const ItemGridTable& table, const QuadratureGrid& grid,
                                   ResponsePattern pattern, bool with_scores);

PosteriorSummary posterior_summary(ResponsePattern pattern, const ItemParams& params,
                                   const QuadratureGrid& grid);

// d eap / d nu = sum_q (theta_q - eap) post_q score_vector(y, theta_q).
ParamVector eap_gradient(ResponsePattern pattern, const ItemParams& params,
                         const QuadratureGrid& grid);
ParamVector eap_gradient(const PatternEvaluation& ev, const QuadratureGrid& grid);

// d post_var / d nu = sum_q ((theta_q - eap)^2 - post_var) post_q score_vector(y, theta_q).
ParamVector postvar_gradient(ResponsePattern pattern, const ItemParams& params,
                             const QuadratureGrid& grid);
ParamVector postvar_gradient(const PatternEvaluation& ev, const QuadratureGrid& grid);

// EAP and posterior variance for every row of the data, in row order.
std::vector<PosteriorSummary> score_responses(const ResponseMatrix& data,
                                              const ItemParams& params,
                                              const QuadratureGrid& grid);

}  // namespace irtp
