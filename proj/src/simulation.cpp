#include "irtp/simulation.hpp"

#include "irtp/errors.hpp"
#include "irtp/quadrature.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

namespace irtp {

std::string to_string(ModelKind model) { return model == ModelKind::k2pl ? "2pl" : "grm"; }

ModelKind parse_model(std::string_view name) {
    if (name == "2pl") return ModelKind::k2pl;
    if (name == "grm") return ModelKind::kGrm;
    throw ConfigError("unknown model '" + std::string(name) + "' (expected 2pl or grm)");
}

SimDesign SimDesign::standard(ModelKind model) {
    SimDesign d;
    d.model = model;
    if (model == ModelKind::k2pl) {
        d.categories = 2;
        d.difficulty_mean = 0.0;
        d.difficulty_sd = 1.0;
        d.conditions = {{250, 8}, {250, 16}, {250, 32}, {500, 8},  {500, 16},
                        {500, 32}, {1000, 8}, {1000, 16}, {1000, 32}};
    } else {
        d.categories = 5;
        d.difficulty_mean = -1.5;
        d.difficulty_sd = 0.5;
        d.conditions = {{250, 4}, {250, 8}, {250, 16}, {500, 4},  {500, 8},
                        {500, 16}, {1000, 4}, {1000, 8}, {1000, 16}};
    }
    return d;
}

void SimDesign::validate() const {
    if (replications < 1) throw ConfigError("replications must be at least 1");
    if (!(slope_lo > 0.0) || !(slope_hi >= slope_lo))
        throw ConfigError("slope range must satisfy 0 < lo <= hi");
    if (!(difficulty_sd >= 0.0) || !(increment_sd >= 0.0))
        throw ConfigError("standard deviations must be nonnegative");
    if (model == ModelKind::k2pl && categories != 2)
        throw ConfigError("the 2pl model has exactly 2 categories");
    if (categories < 2) throw ConfigError("categories must be at least 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (conditions.empty()) throw ConfigError("design has no conditions");
    for (const auto& c : conditions)
        if (c.n < 2 || c.m < 1) throw ConfigError("each condition needs n >= 2 and m >= 1");
    if (kinds.empty()) throw ConfigError("design lists no coefficients");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    build_grid(quad_points, quad_lo, quad_hi);
}

ItemParams draw_item_params(const SimDesign& design, std::size_t m, Philox4x32& rng) {
    std::uniform_real_distribution<double> slope(design.slope_lo, design.slope_hi);
    std::normal_distribution<double> first(design.difficulty_mean, design.difficulty_sd);
    std::normal_distribution<double> step(design.increment_mean, design.increment_sd);
    const int K = design.model == ModelKind::k2pl ? 2 : design.categories;

    std::vector<Item> items;
    items.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        Item it;
        it.slope = slope(rng);
        double b = first(rng);
        it.intercepts.push_back(-it.slope * b);
        for (int k = 2; k < K; ++k) {
            // Thresholds must increase; re-draw an increment that does not.
            double d = step(rng);
            int attempts = 1;
            while (!(d > 0.0)) {
                if (++attempts > 100)
                    throw ConfigError("could not draw an increasing threshold in 100 attempts");
                d = step(rng);
            }
            b += d;
            it.intercepts.push_back(-it.slope * b);
        }
        items.push_back(std::move(it));
    }
    return ItemParams(std::move(items));
}

ResponseMatrix generate_responses(const ItemParams& params, std::size_t n, Philox4x32& rng) {
    std::normal_distribution<double> latent(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t m = params.size();
    std::vector<int> values(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = latent(rng);
        for (std::size_t j = 0; j < m; ++j) {
            const Item& it = params[j];
            const double u = unif(rng);
            // P(Y >= k) decreases in k, so Y counts the boundaries above u.
            int y = 0;
            for (int k = 1; k < it.categories(); ++k) {
                if (u < cumulative_prob(it, k, theta))
                    y = k;
                else
                    break;
            }
            values[i * m + j] = y;
        }
    }
    return ResponseMatrix(n, m, std::move(values));
}

namespace {

ReplicationOutcome run_replication(const SimDesign& design, std::size_t cond_index, int rep,
                                   const ItemParams& truth_params, const QuadratureGrid& grid) {
    ReplicationOutcome out;
    const SimCondition& c = design.conditions[cond_index];
    Philox4x32 rng = make_stream(design.seed, static_cast<std::uint32_t>(cond_index),
                                 static_cast<std::uint32_t>(rep), StreamPurpose::kResponses);
    const ResponseMatrix data = generate_responses(truth_params, c.n, rng);
    try {
        const ItemParams init = default_start(data, truth_params.category_counts());
        const FitResult fit = fit_em(data, init, grid, design.fit);
        out.iterations = fit.iterations;
        out.converged = fit.converged;
        if (!fit.converged) return out;
        for (Coefficient kind : design.kinds)
            out.reports.push_back(reliability_with_se(data, fit, grid, kind, design.alpha));
    } catch (const EstimationError& e) {
        // An unestimable replication (e.g. a category never observed) is
        // treated like a non-converged one.
        out.converged = false;
        out.error = e.what();
    } catch (const NumericalError& e) {
        out.failed = true;
        out.error = e.what();
        out.reports.clear();
    }
    return out;
}

}  // namespace

ConditionSummary summarize(const SimCondition& condition, Coefficient kind, double truth,
                           const std::vector<ReplicationOutcome>& reps, std::size_t kind_index,
                           int planned_replications, double alpha) {
    ConditionSummary s;
    s.condition = condition;
    s.kind = kind;
    s.truth = truth;
    std::vector<double> est;
    double se_sum = 0.0, lo_sum = 0.0, hi_sum = 0.0;
    std::size_t covered = 0;
    for (const auto& r : reps) {
        if (!r.converged) {
            ++s.n_nonconv;
            continue;
        }
        if (r.failed || r.reports.size() <= kind_index) {
            ++s.n_failed;
            continue;
        }
        const ReliabilityReport& rep = r.reports[kind_index];
        est.push_back(rep.point);
        se_sum += rep.se;
        lo_sum += rep.ci_lo;
        hi_sum += rep.ci_hi;
        if (rep.ci_lo <= truth && truth <= rep.ci_hi) ++covered;
        if (rep.exceeds_one) ++s.n_over1;
    }
    s.n_used = est.size();
    const double nominal = 1.0 - alpha;
    const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
    const double band = z * std::sqrt(nominal * alpha / planned_replications);
    s.coverage_band_lo = nominal - band;
    s.coverage_band_hi = nominal + band;
    if (est.empty()) return s;

    const double k = static_cast<double>(est.size());
    double sum = 0.0;
    for (double e : est) sum += e;
    s.mean_est = sum / k;
    double ss = 0.0;
    for (double e : est) ss += (e - s.mean_est) * (e - s.mean_est);
    s.emp_sd = est.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    s.mean_se = se_sum / k;
    s.mean_lo = lo_sum / k;
    s.mean_hi = hi_sum / k;
    s.coverage = static_cast<double>(covered) / k;
    s.max_est = *std::max_element(est.begin(), est.end());
    return s;
}

ConditionRun run_condition(const SimDesign& design, std::size_t index) {
    design.validate();
    if (index >= design.conditions.size()) throw ConfigError("condition index out of range");
    const QuadratureGrid grid = build_grid(design.quad_points, design.quad_lo, design.quad_hi);

    ConditionRun run;
    run.condition = design.conditions[index];
    Philox4x32 prng = make_stream(design.seed, static_cast<std::uint32_t>(index), 0,
                                  StreamPurpose::kItemParams);
    run.params = draw_item_params(design, run.condition.m, prng);

    OracleOptions oracle;
    oracle.enumerate_cap = design.enumerate_cap;
    oracle.mc_draws = design.mc_draws;
    oracle.seed = design.seed ^ (0x9E3779B97F4A7C15ull * (index + 1));
    const bool enumerate = pattern_count(run.params) <= design.enumerate_cap;
    oracle.mode = enumerate ? OracleMode::kEnumerate : OracleMode::kMonteCarlo;
    for (Coefficient kind : design.kinds)
        run.truths.push_back(population_oracle(run.params, grid, kind, oracle));

    // Replications are independent; results land in index order whatever
    // the completion order.
    const int R = design.replications;
    run.replications.resize(static_cast<std::size_t>(R));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (int r = next++; r < R; r = next++) {
            try {
                run.replications[static_cast<std::size_t>(r)] =
                    run_replication(design, index, r, run.params, grid);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };
    const int nthreads = std::min(design.threads, R);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t k = 0; k < design.kinds.size(); ++k) {
        ConditionSummary s = summarize(run.condition, design.kinds[k], run.truths[k],
                                       run.replications, k, R, design.alpha);
        s.truth_mode = enumerate ? "enumerate" : "monte_carlo";
        run.summaries.push_back(s);
    }
    return run;
}

SimSummary run_study(const SimDesign& design) {
    design.validate();
    SimSummary out;
    out.design = design;
    for (std::size_t c = 0; c < design.conditions.size(); ++c) {
        ConditionRun run = run_condition(design, c);
        for (auto& s : run.summaries) out.rows.push_back(std::move(s));
    }
    return out;
}

}  // namespace irtp
