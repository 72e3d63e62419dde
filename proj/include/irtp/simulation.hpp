#pragma once

#include "irtp/estimation.hpp"
#include "irtp/model.hpp"
#include "irtp/reliability.hpp"
#include "irtp/responses.hpp"
#include "irtp/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace irtp {

enum class ModelKind { k2pl, kGrm };

std::string to_string(ModelKind model);
ModelKind parse_model(std::string_view name);

struct SimCondition {
    std::size_t n = 0;
    std::size_t m = 0;
};

// Monte Carlo design. The difficulty fields describe b ~ N(mean, sd^2) for
// the 2PL and the first threshold b_1 for the GRM, whose further thresholds
// add increments d ~ N(increment_mean, increment_sd^2).
struct SimDesign {
    ModelKind model = ModelKind::k2pl;
    std::vector<SimCondition> conditions;
    int replications = 500;
    std::uint64_t seed = 1;
    double slope_lo = 0.5;
    double slope_hi = 2.0;
    double difficulty_mean = 0.0;
    double difficulty_sd = 1.0;
    int categories = 2;
    double increment_mean = 1.0;
    double increment_sd = 0.2;
    double alpha = kDefaultAlpha;
    int quad_points = kDefaultQuadPoints;
    double quad_lo = kDefaultQuadLo;
    double quad_hi = kDefaultQuadHi;
    std::vector<Coefficient> kinds{Coefficient::kPrmse, Coefficient::kCtt};
    std::size_t mc_draws = 1'000'000;
    double enumerate_cap = 1e7;
    FitOptions fit;
    int threads = 1;

    // The published generating distributions for each model.
    static SimDesign standard(ModelKind model);

    // Throws ConfigError on an invalid design.
    void validate() const;
};

ItemParams draw_item_params(const SimDesign& design, std::size_t m, Philox4x32& rng);

// theta ~ N(0, 1) per respondent, then independent category draws.
ResponseMatrix generate_responses(const ItemParams& params, std::size_t n, Philox4x32& rng);

struct ReplicationOutcome {
    bool converged = false;
    bool failed = false;  // numerical error after a converged fit
    std::string error;
    int iterations = 0;
    std::vector<ReliabilityReport> reports;  // one per design kind, in order
};

struct ConditionSummary {
    SimCondition condition;
    Coefficient kind = Coefficient::kPrmse;
    double truth = 0.0;
    std::string truth_mode;  // "enumerate" or "monte_carlo"
    double mean_est = 0.0;
    double emp_sd = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;
    double mean_lo = 0.0;
    double mean_hi = 0.0;
    std::size_t n_used = 0;
    std::size_t n_nonconv = 0;
    std::size_t n_failed = 0;
    std::size_t n_over1 = 0;
    double max_est = 0.0;
    // Normal-approximation Monte Carlo band for the coverage rate.
    double coverage_band_lo = 0.0;
    double coverage_band_hi = 0.0;
};

struct ConditionRun {
    SimCondition condition;
    ItemParams params;
    std::vector<double> truths;  // per design kind
    std::vector<ReplicationOutcome> replications;
    std::vector<ConditionSummary> summaries;  // per design kind
};

ConditionRun run_condition(const SimDesign& design, std::size_t index);

struct SimSummary {
    SimDesign design;
    std::vector<ConditionSummary> rows;
};

SimSummary run_study(const SimDesign& design);

// Aggregates replication outcomes for one kind against a population value.
ConditionSummary summarize(const SimCondition& condition, Coefficient kind, double truth,
                           const std::vector<ReplicationOutcome>& reps, std::size_t kind_index,
                           int planned_replications, double alpha);

}  // namespace irtp
