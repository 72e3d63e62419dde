#pragma once

#include "irtp/estimation.hpp"
#include "irtp/model.hpp"
#include "irtp/quadrature.hpp"
#include "irtp/reliability.hpp"
#include "irtp/responses.hpp"
#include "irtp/scoring.hpp"
#include "irtp/simulation.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace irtp::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// {"items": [{"a": float, "c": [floats, descending]}, ...]}
json params_to_json(const ItemParams& params);
ItemParams params_from_json(const json& j);

struct GridSpec {
    int points = kDefaultQuadPoints;
    double lo = kDefaultQuadLo;
    double hi = kDefaultQuadHi;
};

struct StoredFit {
    std::string model;  // "2pl" or "grm"
    GridSpec grid;
    std::vector<std::string> item_names;
    InfoEstimator info_estimator = InfoEstimator::kCrossProduct;
    FitResult fit;
};

json fit_to_json(const StoredFit& stored);
StoredFit fit_from_json(const json& j);

json report_to_json(const ReliabilityReport& report);
json reports_to_json(const std::vector<ReliabilityReport>& reports);

SimDesign design_from_json(const json& j);
json design_to_json(const SimDesign& design);
json summary_to_json(const SimSummary& summary);
void write_summary_csv(const SimSummary& summary, std::ostream& os);

// Header row of item names, then one row of integer categories per
// respondent. Empty or non-integer cells are rejected with the row and
// column in the message.
ResponseMatrix read_responses_csv(std::istream& is);
ResponseMatrix read_responses_csv(const std::filesystem::path& path);

// Columns: row id, eap, post_var.
void write_scores_csv(const std::vector<PosteriorSummary>& scores, std::ostream& os);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace irtp::io
