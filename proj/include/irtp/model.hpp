#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace irtp {

// Flat item-major parameter vector: (a_1, c_11..c_1,K1-1, a_2, ...).
using ParamVector = Eigen::VectorXd;

// One respondent's category responses, y_j in {0..K_j-1}.
using ResponsePattern = std::span<const int>;

// Probabilities are floored here before taking logs.
inline constexpr double kProbFloor = 1e-300;

struct Item {
    double slope = 1.0;
    std::vector<double> intercepts;  // strictly decreasing

    int categories() const { return static_cast<int>(intercepts.size()) + 1; }
};

// Graded response model item parameters in slope-intercept form. The 2PL is
// the case where every item has a single intercept.
class ItemParams {
public:
    ItemParams() = default;

    // Throws ConfigError if an item has no intercepts, the intercepts are not
    // strictly decreasing, or any value is not finite.
    explicit ItemParams(std::vector<Item> items);

    static ItemParams unpack(std::span<const int> categories, const ParamVector& nu);

    ParamVector pack() const;
    ItemParams with_vector(const ParamVector& nu) const;

    std::size_t size() const { return items_.size(); }
    const Item& operator[](std::size_t j) const { return items_[j]; }
    const std::vector<Item>& items() const { return items_; }

    int categories(std::size_t j) const { return items_[j].categories(); }
    std::vector<int> category_counts() const;
    Eigen::Index num_params() const { return num_params_; }
    Eigen::Index offset(std::size_t j) const { return offsets_[j]; }

    // b_jk = -c_jk / a_j. Throws ConfigError when a_j == 0.
    std::vector<double> difficulties(std::size_t j) const;

private:
    std::vector<Item> items_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index num_params_ = 0;
};

double logistic(double x);

// P(Y >= k | theta); 1 at k = 0 and 0 at k = K.
double cumulative_prob(const Item& item, int k, double theta);

// P(Y = k | theta).
double category_prob(const Item& item, int k, double theta);
double log_category_prob(const Item& item, int k, double theta);

// Derivatives of log P(Y = k | theta) with respect to the item's local
// parameters (a, c_1, ..., c_{K-1}).
struct CategoryDerivatives {
    double log_prob = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;  // empty unless requested
};

CategoryDerivatives category_log_prob_derivatives(const Item& item, int k, double theta,
                                                  bool with_hessian = false);

// Allocation-free form of the above for inner loops: adds weight times the
// gradient (and Hessian, when hess is non-null) of log P(Y = k | theta) into
// K-sized buffers and returns log P.
double accumulate_category_derivatives(const Item& item, int k, double theta, double weight,
                                       Eigen::Ref<Eigen::VectorXd> grad,
                                       Eigen::MatrixXd* hess);

// Throws CategoryRangeError if the pattern length or any entry is out of range.
void validate_pattern(ResponsePattern pattern, const ItemParams& params);

double conditional_likelihood(ResponsePattern pattern, double theta, const ItemParams& params);
double log_conditional_likelihood(ResponsePattern pattern, double theta,
                                  const ItemParams& params);

// Gradient of log f(y | theta; nu) in ParamVector layout.
ParamVector score_vector(ResponsePattern pattern, double theta, const ItemParams& params);

// Per-node tables of log category probabilities and their first derivatives.
// Every quadrature-based computation goes through this so that the logistic
// is evaluated once per (item, category, node) rather than per respondent.
class ItemGridTable {
public:
    ItemGridTable(const ItemParams& params, std::span<const double> nodes);

    const ItemParams& params() const { return params_; }
    Eigen::Index nodes() const { return q_; }

    double log_prob(std::size_t j, int k, Eigen::Index q) const {
        return log_prob_[index(j, k) + q];
    }

    // out(q) = log f(y | theta_q).
    void log_likelihood(ResponsePattern pattern, Eigen::Ref<Eigen::VectorXd> out) const;

    // Column q of out is score_vector(y, theta_q). out must be
    // num_params x nodes; rows of items not touched are zeroed.
    void score_matrix(ResponsePattern pattern, Eigen::Ref<Eigen::MatrixXd> out) const;

    // Adds weight * sum_q post(q) * score_vector(y, theta_q) into out.
    void accumulate_score(ResponsePattern pattern, const Eigen::VectorXd& post, double weight,
                          Eigen::Ref<Eigen::VectorXd> out) const;

private:
    std::size_t index(std::size_t j, int k) const {
        return static_cast<std::size_t>((cat_offset_[j] + k) * q_);
    }

    ItemParams params_;
    Eigen::Index q_ = 0;
    std::vector<Eigen::Index> cat_offset_;
    std::vector<double> log_prob_;
    std::vector<double> d_slope_;  // d log P / d a
    std::vector<double> d_lower_;  // d log P / d c_k
    std::vector<double> d_upper_;  // d log P / d c_{k+1}
};

}  // namespace irtp
