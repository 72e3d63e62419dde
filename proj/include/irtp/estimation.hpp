#pragma once

#include "irtp/model.hpp"
#include "irtp/quadrature.hpp"
#include "irtp/responses.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace irtp {

// Per-observation information matrix, dimension num_params.
using InfoMatrix = Eigen::MatrixXd;

enum class InfoEstimator {
    kCrossProduct,  // (1/n) sum_i g_i g_i^T of marginal scores
    kLouis,         // observed information of the marginal log-likelihood
};

// "xpd" and "louis".
std::string to_string(InfoEstimator estimator);
InfoEstimator parse_info_estimator(std::string_view name);

struct FitOptions {
    double tol = 1e-4;       // max absolute parameter change between EM cycles
    int max_iter = 500;
    int newton_steps = 5;    // inner Newton iterations per item in the M-step
    InfoEstimator info = InfoEstimator::kCrossProduct;
    std::vector<bool> fixed_slopes;  // empty means every slope is free
};

struct FitResult {
    ItemParams params;
    ParamVector nu_hat;
    InfoMatrix info;
    double log_likelihood = 0.0;  // sum over respondents at nu_hat
    std::size_t n = 0;
    bool converged = false;
    int iterations = 0;
    double last_change = 0.0;
    // Sample log-likelihood at the start of every EM cycle, then at nu_hat.
    std::vector<double> log_likelihood_trace;
};

// Unit slopes and intercepts from inverse-logistic cumulative proportions,
// spaced apart where needed so the ordering is strict.
ItemParams default_start(const ResponseMatrix& data, std::span<const int> categories);

// Bock-Aitkin EM. Throws EstimationError for n < 2 or an item whose responses
// fall in a single category. Non-convergence is reported through
// FitResult::converged, not thrown.
FitResult fit_em(const ResponseMatrix& data, const ItemParams& init, const QuadratureGrid& grid,
                 const FitOptions& options = {});

// Gradient of log f(y; nu), the posterior-weighted conditional score.
ParamVector marginal_score(ResponsePattern pattern, const ItemParams& params,
                           const QuadratureGrid& grid);

// Sum over respondents of log f(y_i; nu).
double sample_log_likelihood(const ResponseMatrix& data, const ItemParams& params,
                             const QuadratureGrid& grid);
double sample_log_likelihood(const PatternTable& patterns, const ItemParams& params,
                             const QuadratureGrid& grid);

InfoMatrix observed_information(const ResponseMatrix& data, const ItemParams& params,
                                const QuadratureGrid& grid,
                                InfoEstimator estimator = InfoEstimator::kCrossProduct);
InfoMatrix observed_information(const PatternTable& patterns, const ItemParams& params,
                                const QuadratureGrid& grid,
                                InfoEstimator estimator = InfoEstimator::kCrossProduct);

// Inverse via Cholesky. Throws InversionError carrying the smallest eigenvalue
// when the matrix is not numerically positive definite.
Eigen::MatrixXd invert_information(const InfoMatrix& info);

}  // namespace irtp
