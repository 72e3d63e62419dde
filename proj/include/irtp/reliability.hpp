#pragma once

#include "irtp/estimation.hpp"
#include "irtp/model.hpp"
#include "irtp/quadrature.hpp"
#include "irtp/responses.hpp"
#include "irtp/scoring.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace irtp {

enum class Coefficient {
    kPrmse,  // PRMSE of the latent variable
    kCtt,    // CTT reliability of the EAP score
};

std::string to_string(Coefficient kind);
Coefficient parse_coefficient(std::string_view name);

// Length of the H vector: 3 for PRMSE, 2 + Q for CTT.
Eigen::Index h_length(Coefficient kind, const QuadratureGrid& grid);

// Per-respondent statistics whose population mean feeds the coefficient.
//   PRMSE: (eap, eap^2, post_var)
//   CTT:   (eap, eap^2, eap * f(y|theta_q) / f(y) for q = 1..Q)
// `gradient` is h_length x num_params, row s holding dH_s/dnu.
struct HVector {
    Coefficient kind = Coefficient::kPrmse;
    Eigen::VectorXd values;
    Eigen::MatrixXd gradient;
};

HVector h_prmse(ResponsePattern pattern, const ItemParams& params, const QuadratureGrid& grid);
HVector h_ctt(ResponsePattern pattern, const ItemParams& params, const QuadratureGrid& grid);

// Shared kernel. `ev.scores` must be filled when with_gradient is set.
HVector h_vector(const PatternEvaluation& ev, const QuadratureGrid& grid, Coefficient kind,
                 bool with_gradient);

// A transformation of the moment vector and its gradient.
struct Transform {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

// (x2 - x1^2) / (x2 - x1^2 + x3). Throws DegenerateMomentsError if the
// denominator is not positive.
Transform phi_prmse(const Eigen::VectorXd& eta);

// (sum_q w_q x_{2+q}^2 - x1^2) / (x2 - x1^2). Throws DegenerateMomentsError
// when the EAP variance x2 - x1^2 is not positive.
Transform phi_ctt(const Eigen::VectorXd& eta, const Eigen::VectorXd& weights);

Transform apply_phi(Coefficient kind, const Eigen::VectorXd& eta, const QuadratureGrid& grid);

// How the Jacobian of eta_hat with respect to nu is estimated.
enum class JacobianForm {
    kExplicit,       // (1/n) sum_i dH(Y_i)/dnu
    kWithScoreTerm,  // adds (1/n) sum_i H(Y_i) g_i^T; kept for comparison only
};

struct MomentOptions {
    // false drops the item-parameter term, leaving the plain covariance of H.
    bool parameter_uncertainty = true;
    JacobianForm jacobian = JacobianForm::kExplicit;
};

struct MomentEstimate {
    Coefficient kind = Coefficient::kPrmse;
    Eigen::VectorXd eta_hat;
    Eigen::MatrixXd jacobian;   // num_params x h_length
    Eigen::MatrixXd sigma_hat;  // h_length x h_length, per observation
    std::size_t n = 0;
};

// Sample moments of H at `params` together with the covariance of the
// influence terms A_i = H_i - eta_hat + J^T I^{-1} g_i. `info` must be the
// per-observation information at `params`.
MomentEstimate estimate_moments(const ResponseMatrix& data, const ItemParams& params,
                                const QuadratureGrid& grid, Coefficient kind,
                                const InfoMatrix& info, const MomentOptions& options = {});

// Same, computing the cross-product information from the data.
MomentEstimate estimate_moments(const ResponseMatrix& data, const ItemParams& params,
                                const QuadratureGrid& grid, Coefficient kind,
                                const MomentOptions& options = {});

inline constexpr double kDefaultAlpha = 0.05;

struct ReliabilityReport {
    Coefficient kind = Coefficient::kPrmse;
    double point = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double alpha = kDefaultAlpha;
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t q = 0;
    bool exceeds_one = false;
    std::vector<std::string> flags;
};

// Wald interval point +/- z_{1-alpha/2} se, not truncated to [0, 1].
ReliabilityReport make_report(const MomentEstimate& moments, const QuadratureGrid& grid,
                              std::size_t items, double alpha = kDefaultAlpha);

// Point estimate, asymptotic SE and CI at the fitted parameters. Throws
// NumericalError if the fit did not converge.
ReliabilityReport reliability_with_se(const ResponseMatrix& data, const FitResult& fit,
                                      const QuadratureGrid& grid, Coefficient kind,
                                      double alpha = kDefaultAlpha,
                                      const MomentOptions& options = {});

enum class OracleMode { kEnumerate, kMonteCarlo };

struct OracleOptions {
    OracleMode mode = OracleMode::kEnumerate;
    std::size_t mc_draws = 1'000'000;
    std::uint64_t seed = 20240601;
    double enumerate_cap = 1e7;  // max number of response patterns
};

// Number of distinct response patterns, as a double to avoid overflow.
double pattern_count(const ItemParams& params);

// Population eta(nu): exact sum over all patterns weighted by the quadrature
// marginal, or a Monte Carlo average over simulated respondents. Throws
// ConfigError when enumeration would exceed the cap.
Eigen::VectorXd population_moments(const ItemParams& params, const QuadratureGrid& grid,
                                   Coefficient kind, const OracleOptions& options = {});

double population_oracle(const ItemParams& params, const QuadratureGrid& grid, Coefficient kind,
                         const OracleOptions& options = {});

}  // namespace irtp
