#include "irtp/reliability.hpp"

#include "irtp/errors.hpp"
#include "irtp/rng.hpp"
#include "irtp/simulation.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace irtp {

namespace {

constexpr double kDegenerateVariance = 1e-12;

// Calls fn(pattern) for every response pattern in odometer order.
template <class Fn>
void for_each_pattern(const ItemParams& params, Fn&& fn) {
    const std::size_t m = params.size();
    std::vector<int> y(m, 0);
    while (true) {
        fn(ResponsePattern(y.data(), m));
        std::size_t j = 0;
        for (; j < m; ++j) {
            if (++y[j] < params.categories(j)) break;
            y[j] = 0;
        }
        if (j == m) break;
    }
}

}  // namespace

std::string to_string(Coefficient kind) {
    return kind == Coefficient::kPrmse ? "prmse" : "ctt";
}

Coefficient parse_coefficient(std::string_view name) {
    if (name == "prmse") return Coefficient::kPrmse;
    if (name == "ctt") return Coefficient::kCtt;
    throw ConfigError("unknown coefficient kind '" + std::string(name) + "'");
}

Eigen::Index h_length(Coefficient kind, const QuadratureGrid& grid) {
    return kind == Coefficient::kPrmse ? 3 : 2 + grid.size();
}

HVector h_vector(const PatternEvaluation& ev, const QuadratureGrid& grid, Coefficient kind,
                 bool with_gradient) {
    const Eigen::Index len = h_length(kind, grid);
    HVector h;
    h.kind = kind;
    h.values.resize(len);
    h.values(0) = ev.eap;
    h.values(1) = ev.eap * ev.eap;

    // f(y | theta_q) / f(y), computed in log space.
    Eigen::VectorXd ratio;
    if (kind == Coefficient::kPrmse) {
        h.values(2) = ev.post_var;
    } else {
        ratio = (ev.log_conditional.array() - ev.log_marginal).exp();
        h.values.tail(grid.size()) = ev.eap * ratio;
    }
    if (!with_gradient) return h;

    const Eigen::Index p = ev.scores.rows();
    const Eigen::VectorXd d_eap = eap_gradient(ev, grid);
    h.gradient.resize(len, p);
    h.gradient.row(0) = d_eap.transpose();
    h.gradient.row(1) = 2.0 * ev.eap * d_eap.transpose();
    if (kind == Coefficient::kPrmse) {
        h.gradient.row(2) = postvar_gradient(ev, grid).transpose();
    } else {
        // d ratio_q = ratio_q (s_q - g), with g the marginal score.
        const Eigen::VectorXd g = ev.scores * ev.post;
        Eigen::MatrixXd centered = ev.scores.transpose();  // Q x p
        centered.rowwise() -= g.transpose();
        h.gradient.bottomRows(grid.size()) =
            ratio.asDiagonal() * ((ev.eap * centered).rowwise() + d_eap.transpose());
    }
    return h;
}

HVector h_prmse(ResponsePattern pattern, const ItemParams& params, const QuadratureGrid& grid) {
    validate_pattern(pattern, params);
    const ItemGridTable table(params, grid.node_span());
    return h_vector(evaluate_pattern(table, grid, pattern, true), grid, Coefficient::kPrmse, true);
}

HVector h_ctt(ResponsePattern pattern, const ItemParams& params, const QuadratureGrid& grid) {
    validate_pattern(pattern, params);
    const ItemGridTable table(params, grid.node_span());
    return h_vector(evaluate_pattern(table, grid, pattern, true), grid, Coefficient::kCtt, true);
}

Transform phi_prmse(const Eigen::VectorXd& eta) {
    if (eta.size() != 3) throw ConfigError("PRMSE moments must have length 3");
    const double num = eta(1) - eta(0) * eta(0);
    const double den = num + eta(2);
    if (!(den > 0.0)) throw DegenerateMomentsError("PRMSE denominator is not positive");
    Transform t;
    t.value = num / den;
    const double d2 = den * den;
    t.gradient.resize(3);
    t.gradient << -2.0 * eta(0) * eta(2) / d2, eta(2) / d2, -num / d2;
    return t;
}

Transform phi_ctt(const Eigen::VectorXd& eta, const Eigen::VectorXd& weights) {
    const Eigen::Index Q = weights.size();
    if (eta.size() != Q + 2) throw ConfigError("CTT moments must have length 2 + Q");
    const auto tau = eta.tail(Q);
    const double mean_sq = eta(0) * eta(0);
    const double num = (weights.array() * tau.array().square()).sum() - mean_sq;
    const double den = eta(1) - mean_sq;
    if (!(den > kDegenerateVariance))
        throw DegenerateMomentsError("EAP score variance is zero; CTT reliability undefined");
    Transform t;
    t.value = num / den;
    t.gradient.resize(Q + 2);
    t.gradient(0) = -2.0 * eta(0) * (den - num) / (den * den);
    t.gradient(1) = -num / (den * den);
    t.gradient.tail(Q) = 2.0 * weights.array() * tau.array() / den;
    return t;
}

Transform apply_phi(Coefficient kind, const Eigen::VectorXd& eta, const QuadratureGrid& grid) {
    return kind == Coefficient::kPrmse ? phi_prmse(eta) : phi_ctt(eta, grid.weights());
}

MomentEstimate estimate_moments(const ResponseMatrix& data, const ItemParams& params,
                                const QuadratureGrid& grid, Coefficient kind,
                                const InfoMatrix& info, const MomentOptions& options) {
    if (data.rows() == 0) throw InputError("no respondents");
    data.validate(params);
    const PatternTable patterns(data);
    const ItemGridTable table(params, grid.node_span());
    const Eigen::Index len = h_length(kind, grid);
    const Eigen::Index p = params.num_params();
    const double n = patterns.total();

    // First pass: H values, explicit Jacobian and marginal scores per pattern.
    std::vector<Eigen::VectorXd> hs(patterns.size());
    std::vector<Eigen::VectorXd> gs(patterns.size());
    MomentEstimate est;
    est.kind = kind;
    est.n = data.rows();
    est.eta_hat = Eigen::VectorXd::Zero(len);
    est.jacobian = Eigen::MatrixXd::Zero(p, len);
    const bool need_grad = options.parameter_uncertainty;
    for (std::size_t u = 0; u < patterns.size(); ++u) {
        const auto y = patterns.pattern(u);
        const double w = patterns.count(u) / n;
        const PatternEvaluation ev = evaluate_pattern(table, grid, y, need_grad);
        HVector h = h_vector(ev, grid, kind, need_grad);
        est.eta_hat += w * h.values;
        if (need_grad) {
            gs[u] = ev.scores * ev.post;
            est.jacobian += w * h.gradient.transpose();
            if (options.jacobian == JacobianForm::kWithScoreTerm)
                est.jacobian += w * gs[u] * h.values.transpose();
        }
        hs[u] = std::move(h.values);
    }

    // B = I^{-1} J, so that J^T I^{-1} g_i = B^T g_i.
    Eigen::MatrixXd B;
    if (need_grad) B = invert_information(info) * est.jacobian;

    Eigen::VectorXd mean_a = Eigen::VectorXd::Zero(len);
    std::vector<Eigen::VectorXd> as(patterns.size());
    for (std::size_t u = 0; u < patterns.size(); ++u) {
        as[u] = hs[u] - est.eta_hat;
        if (need_grad) as[u] += B.transpose() * gs[u];
        mean_a += (patterns.count(u) / n) * as[u];
    }
    est.sigma_hat = Eigen::MatrixXd::Zero(len, len);
    for (std::size_t u = 0; u < patterns.size(); ++u) {
        const Eigen::VectorXd d = as[u] - mean_a;
        est.sigma_hat.selfadjointView<Eigen::Lower>().rankUpdate(d, patterns.count(u) / n);
    }
    est.sigma_hat = est.sigma_hat.selfadjointView<Eigen::Lower>();
    return est;
}

MomentEstimate estimate_moments(const ResponseMatrix& data, const ItemParams& params,
                                const QuadratureGrid& grid, Coefficient kind,
                                const MomentOptions& options) {
    InfoMatrix info;
    if (options.parameter_uncertainty) info = observed_information(data, params, grid);
    return estimate_moments(data, params, grid, kind, info, options);
}

ReliabilityReport make_report(const MomentEstimate& moments, const QuadratureGrid& grid,
                              std::size_t items, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const Transform t = apply_phi(moments.kind, moments.eta_hat, grid);
    ReliabilityReport r;
    r.kind = moments.kind;
    r.point = t.value;
    const double var = t.gradient.dot(moments.sigma_hat * t.gradient);
    r.se = std::sqrt(std::max(0.0, var) / static_cast<double>(moments.n));
    const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
    r.ci_lo = r.point - z * r.se;
    r.ci_hi = r.point + z * r.se;
    r.alpha = alpha;
    r.n = moments.n;
    r.m = items;
    r.q = static_cast<std::size_t>(grid.size());
    r.exceeds_one = r.point > 1.0;
    if (r.exceeds_one) r.flags.push_back("estimate_exceeds_one");
    if (r.ci_lo < 0.0 || r.ci_hi > 1.0) r.flags.push_back("ci_outside_unit_interval");
    return r;
}

ReliabilityReport reliability_with_se(const ResponseMatrix& data, const FitResult& fit,
                                      const QuadratureGrid& grid, Coefficient kind, double alpha,
                                      const MomentOptions& options) {
    if (!fit.converged) throw NumericalError("item parameter estimation did not converge");
    if (data.rows() < 2) throw InputError("at least two respondents are required");
    InfoMatrix info = fit.info;
    if (info.rows() != fit.params.num_params())
        info = observed_information(data, fit.params, grid);
    const MomentEstimate est = estimate_moments(data, fit.params, grid, kind, info, options);
    return make_report(est, grid, fit.params.size(), alpha);
}

double pattern_count(const ItemParams& params) {
    double c = 1.0;
    for (std::size_t j = 0; j < params.size(); ++j) c *= params.categories(j);
    return c;
}

Eigen::VectorXd population_moments(const ItemParams& params, const QuadratureGrid& grid,
                                   Coefficient kind, const OracleOptions& options) {
    const ItemGridTable table(params, grid.node_span());
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(h_length(kind, grid));

    if (options.mode == OracleMode::kEnumerate) {
        const double count = pattern_count(params);
        if (count > options.enumerate_cap) {
            std::ostringstream os;
            os << count << " response patterns exceed the enumeration cap of "
               << options.enumerate_cap << "; use monte_carlo mode";
            throw ConfigError(os.str());
        }
        for_each_pattern(params, [&](ResponsePattern y) {
            const PatternEvaluation ev = evaluate_pattern(table, grid, y, false);
            eta += std::exp(ev.log_marginal) * h_vector(ev, grid, kind, false).values;
        });
        return eta;
    }

    if (options.mc_draws == 0) throw ConfigError("monte_carlo mode needs at least one draw");
    Philox4x32 rng = make_stream(options.seed, 0, 0, StreamPurpose::kOracle);
    constexpr std::size_t kChunk = 20000;
    std::size_t left = options.mc_draws;
    while (left > 0) {
        const std::size_t take = std::min(left, kChunk);
        const ResponseMatrix chunk = generate_responses(params, take, rng);
        for (std::size_t i = 0; i < take; ++i) {
            const PatternEvaluation ev = evaluate_pattern(table, grid, chunk.row(i), false);
            eta += h_vector(ev, grid, kind, false).values;
        }
        left -= take;
    }
    return eta / static_cast<double>(options.mc_draws);
}

double population_oracle(const ItemParams& params, const QuadratureGrid& grid, Coefficient kind,
                         const OracleOptions& options) {
    return apply_phi(kind, population_moments(params, grid, kind, options), grid).value;
}

}  // namespace irtp
