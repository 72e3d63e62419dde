#include "irtp/model.hpp"

#include "irtp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace irtp {

namespace {

void check_category(int k, int upper) {
    if (k < 0 || k > upper) {
        std::ostringstream os;
        os << "category " << k << " outside [0, " << upper << "]";
        throw CategoryRangeError(os.str());
    }
}

// Linear predictor for cumulative boundary k (1..K-1).
double boundary_eta(const Item& item, int k, double theta) {
    return item.slope * theta + item.intercepts[static_cast<std::size_t>(k - 1)];
}

struct Boundaries {
    // F_k, 1 - F_k and W_k = F_k (1 - F_k) for the two boundaries around a
    // category; boundaries 0 and K are the constants 1 and 0.
    double f_lo, f_hi, w_lo, w_hi, prob;
};

Boundaries boundaries(const Item& item, int k, double theta) {
    const int K = item.categories();
    Boundaries b{};
    double eta_lo = 0.0, eta_hi = 0.0;
    double g_lo = 0.0, g_hi = 1.0;  // 1 - F
    if (k == 0) {
        b.f_lo = 1.0;
        g_lo = 0.0;
    } else {
        eta_lo = boundary_eta(item, k, theta);
        b.f_lo = logistic(eta_lo);
        g_lo = logistic(-eta_lo);
    }
    if (k + 1 == K) {
        b.f_hi = 0.0;
        g_hi = 1.0;
    } else {
        eta_hi = boundary_eta(item, k + 1, theta);
        b.f_hi = logistic(eta_hi);
        g_hi = logistic(-eta_hi);
    }
    b.w_lo = b.f_lo * g_lo;
    b.w_hi = b.f_hi * g_hi;
    // Use whichever difference avoids cancellation near 1.
    if (k + 1 < K && eta_hi > 0.0)
        b.prob = g_hi - g_lo;
    else
        b.prob = b.f_lo - b.f_hi;
    b.prob = std::max(b.prob, 0.0);
    return b;
}

}  // namespace

ItemParams::ItemParams(std::vector<Item> items) : items_(std::move(items)) {
    offsets_.reserve(items_.size());
    for (std::size_t j = 0; j < items_.size(); ++j) {
        const Item& it = items_[j];
        if (it.intercepts.empty())
            throw ConfigError("item " + std::to_string(j) + " has no intercepts (K must be >= 2)");
        if (!std::isfinite(it.slope))
            throw ConfigError("item " + std::to_string(j) + " has a non-finite slope");
        for (std::size_t k = 0; k < it.intercepts.size(); ++k) {
            if (!std::isfinite(it.intercepts[k]))
                throw ConfigError("item " + std::to_string(j) + " has a non-finite intercept");
            if (k > 0 && !(it.intercepts[k] < it.intercepts[k - 1]))
                throw ConfigError("item " + std::to_string(j) +
                                  " intercepts are not strictly decreasing");
        }
        offsets_.push_back(num_params_);
        num_params_ += it.categories();
    }
}

ItemParams ItemParams::unpack(std::span<const int> categories, const ParamVector& nu) {
    Eigen::Index total = 0;
    for (int K : categories) total += K;
    if (total != nu.size())
        throw ConfigError("parameter vector length " + std::to_string(nu.size()) +
                          " does not match category layout " + std::to_string(total));
    std::vector<Item> items;
    items.reserve(categories.size());
    Eigen::Index pos = 0;
    for (int K : categories) {
        Item it;
        it.slope = nu(pos++);
        for (int k = 1; k < K; ++k) it.intercepts.push_back(nu(pos++));
        items.push_back(std::move(it));
    }
    return ItemParams(std::move(items));
}

ParamVector ItemParams::pack() const {
    ParamVector nu(num_params_);
    Eigen::Index pos = 0;
    for (const Item& it : items_) {
        nu(pos++) = it.slope;
        for (double c : it.intercepts) nu(pos++) = c;
    }
    return nu;
}

ItemParams ItemParams::with_vector(const ParamVector& nu) const {
    const auto cats = category_counts();
    return unpack(cats, nu);
}

std::vector<int> ItemParams::category_counts() const {
    std::vector<int> out;
    out.reserve(items_.size());
    for (const Item& it : items_) out.push_back(it.categories());
    return out;
}

std::vector<double> ItemParams::difficulties(std::size_t j) const {
    const Item& it = items_.at(j);
    if (it.slope == 0.0)
        throw ConfigError("difficulty undefined for item " + std::to_string(j) + " with zero slope");
    std::vector<double> b;
    for (double c : it.intercepts) b.push_back(-c / it.slope);
    return b;
}

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double cumulative_prob(const Item& item, int k, double theta) {
    const int K = item.categories();
    check_category(k, K);
    if (k == 0) return 1.0;
    if (k == K) return 0.0;
    return logistic(boundary_eta(item, k, theta));
}

double category_prob(const Item& item, int k, double theta) {
    check_category(k, item.categories() - 1);
    return boundaries(item, k, theta).prob;
}

double log_category_prob(const Item& item, int k, double theta) {
    return std::log(std::max(category_prob(item, k, theta), kProbFloor));
}

double accumulate_category_derivatives(const Item& item, int k, double theta, double weight,
                                       Eigen::Ref<Eigen::VectorXd> grad,
                                       Eigen::MatrixXd* hess) {
    const int K = item.categories();
    const Boundaries b = boundaries(item, k, theta);
    const double p = std::max(b.prob, kProbFloor);

    // Gradient of P itself, divided by P.
    const double ga = theta * (b.w_lo - b.w_hi) / p;
    const double glo = b.w_lo / p;
    const double ghi = -b.w_hi / p;
    const bool has_lo = k >= 1;
    const bool has_hi = k + 1 <= K - 1;
    grad(0) += weight * ga;
    if (has_lo) grad(k) += weight * glo;
    if (has_hi) grad(k + 1) += weight * ghi;

    if (hess != nullptr) {
        // d2 log P = d2 P / P - g g^T, nonzero only on {a, c_k, c_k+1}.
        const double v_lo = b.w_lo * (1.0 - 2.0 * b.f_lo) / p;
        const double v_hi = b.w_hi * (1.0 - 2.0 * b.f_hi) / p;
        Eigen::MatrixXd& h = *hess;
        h(0, 0) += weight * (theta * theta * (v_lo - v_hi) - ga * ga);
        if (has_lo) {
            const double x = weight * (theta * v_lo - ga * glo);
            h(0, k) += x;
            h(k, 0) += x;
            h(k, k) += weight * (v_lo - glo * glo);
        }
        if (has_hi) {
            const double x = weight * (-theta * v_hi - ga * ghi);
            h(0, k + 1) += x;
            h(k + 1, 0) += x;
            h(k + 1, k + 1) += weight * (-v_hi - ghi * ghi);
        }
        if (has_lo && has_hi) {
            const double x = -weight * glo * ghi;
            h(k, k + 1) += x;
            h(k + 1, k) += x;
        }
    }
    return std::log(p);
}

CategoryDerivatives category_log_prob_derivatives(const Item& item, int k, double theta,
                                                  bool with_hessian) {
    const int K = item.categories();
    check_category(k, K - 1);
    CategoryDerivatives d;
    d.gradient = Eigen::VectorXd::Zero(K);
    if (with_hessian) d.hessian = Eigen::MatrixXd::Zero(K, K);
    d.log_prob = accumulate_category_derivatives(item, k, theta, 1.0, d.gradient,
                                                 with_hessian ? &d.hessian : nullptr);
    return d;
}

void validate_pattern(ResponsePattern pattern, const ItemParams& params) {
    if (pattern.size() != params.size()) {
        std::ostringstream os;
        os << "pattern has " << pattern.size() << " responses but the model has "
           << params.size() << " items";
        throw CategoryRangeError(os.str());
    }
    for (std::size_t j = 0; j < pattern.size(); ++j) {
        if (pattern[j] < 0 || pattern[j] >= params.categories(j)) {
            std::ostringstream os;
            os << "item " << j << ": category " << pattern[j] << " outside [0, "
               << params.categories(j) - 1 << "]";
            throw CategoryRangeError(os.str());
        }
    }
}

double log_conditional_likelihood(ResponsePattern pattern, double theta,
                                  const ItemParams& params) {
    validate_pattern(pattern, params);
    double ll = 0.0;
    for (std::size_t j = 0; j < pattern.size(); ++j)
        ll += log_category_prob(params[j], pattern[j], theta);
    return ll;
}

double conditional_likelihood(ResponsePattern pattern, double theta, const ItemParams& params) {
    validate_pattern(pattern, params);
    double p = 1.0;
    for (std::size_t j = 0; j < pattern.size(); ++j)
        p *= category_prob(params[j], pattern[j], theta);
    return p;
}

ParamVector score_vector(ResponsePattern pattern, double theta, const ItemParams& params) {
    validate_pattern(pattern, params);
    ParamVector g = ParamVector::Zero(params.num_params());
    for (std::size_t j = 0; j < pattern.size(); ++j) {
        const auto d = category_log_prob_derivatives(params[j], pattern[j], theta);
        g.segment(params.offset(j), params.categories(j)) = d.gradient;
    }
    return g;
}

ItemGridTable::ItemGridTable(const ItemParams& params, std::span<const double> nodes)
    : params_(params), q_(static_cast<Eigen::Index>(nodes.size())) {
    Eigen::Index total = 0;
    cat_offset_.reserve(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        cat_offset_.push_back(total);
        total += params.categories(j);
    }
    const std::size_t cells = static_cast<std::size_t>(total * q_);
    log_prob_.resize(cells);
    d_slope_.resize(cells);
    d_lower_.resize(cells);
    d_upper_.resize(cells);
    for (std::size_t j = 0; j < params.size(); ++j) {
        const Item& it = params[j];
        const int K = it.categories();
        for (int k = 0; k < K; ++k) {
            const std::size_t base = index(j, k);
            for (Eigen::Index q = 0; q < q_; ++q) {
                const double theta = nodes[static_cast<std::size_t>(q)];
                const Boundaries b = boundaries(it, k, theta);
                const double p = std::max(b.prob, kProbFloor);
                log_prob_[base + q] = std::log(p);
                d_slope_[base + q] = theta * (b.w_lo - b.w_hi) / p;
                d_lower_[base + q] = b.w_lo / p;
                d_upper_[base + q] = -b.w_hi / p;
            }
        }
    }
}

void ItemGridTable::log_likelihood(ResponsePattern pattern,
                                   Eigen::Ref<Eigen::VectorXd> out) const {
    out.setZero();
    for (std::size_t j = 0; j < pattern.size(); ++j) {
        const double* lp = &log_prob_[index(j, pattern[j])];
        for (Eigen::Index q = 0; q < q_; ++q) out(q) += lp[q];
    }
}

void ItemGridTable::score_matrix(ResponsePattern pattern, Eigen::Ref<Eigen::MatrixXd> out) const {
    out.setZero();
    for (std::size_t j = 0; j < pattern.size(); ++j) {
        const int y = pattern[j];
        const int K = params_.categories(j);
        const Eigen::Index off = params_.offset(j);
        const std::size_t base = index(j, y);
        for (Eigen::Index q = 0; q < q_; ++q) {
            out(off, q) = d_slope_[base + q];
            if (y >= 1) out(off + y, q) = d_lower_[base + q];
            if (y + 1 <= K - 1) out(off + y + 1, q) = d_upper_[base + q];
        }
    }
}

void ItemGridTable::accumulate_score(ResponsePattern pattern, const Eigen::VectorXd& post,
                                     double weight, Eigen::Ref<Eigen::VectorXd> out) const {
    for (std::size_t j = 0; j < pattern.size(); ++j) {
        const int y = pattern[j];
        const int K = params_.categories(j);
        const Eigen::Index off = params_.offset(j);
        const std::size_t base = index(j, y);
        double sa = 0.0, slo = 0.0, shi = 0.0;
        for (Eigen::Index q = 0; q < q_; ++q) {
            sa += post(q) * d_slope_[base + q];
            slo += post(q) * d_lower_[base + q];
            shi += post(q) * d_upper_[base + q];
        }
        out(off) += weight * sa;
        if (y >= 1) out(off + y) += weight * slo;
        if (y + 1 <= K - 1) out(off + y + 1) += weight * shi;
    }
}

}  // namespace irtp
