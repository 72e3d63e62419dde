#include "irtp/io.hpp"

#include "irtp/errors.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace irtp::io {

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j.at(r).size()) != cols)
            throw InputError("ragged matrix in JSON");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    }
    return m;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            cells.push_back(trim(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    cells.push_back(trim(cell));
    return cells;
}

}  // namespace

json params_to_json(const ItemParams& params) {
    json items = json::array();
    for (const Item& it : params.items()) items.push_back({{"a", it.slope}, {"c", it.intercepts}});
    return {{"items", items}};
}

ItemParams params_from_json(const json& j) {
    try {
        std::vector<Item> items;
        for (const auto& e : j.at("items")) {
            Item it;
            it.slope = e.at("a").get<double>();
            it.intercepts = e.at("c").get<std::vector<double>>();
            items.push_back(std::move(it));
        }
        return ItemParams(std::move(items));
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed parameter JSON: ") + e.what());
    }
}

json fit_to_json(const StoredFit& s) {
    const FitResult& f = s.fit;
    json j = params_to_json(f.params);
    j["schema_version"] = kSchemaVersion;
    j["model"] = s.model;
    j["item_names"] = s.item_names;
    j["quadrature"] = {{"points", s.grid.points}, {"lo", s.grid.lo}, {"hi", s.grid.hi}};
    j["n"] = f.n;
    j["log_likelihood"] = f.log_likelihood;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["last_change"] = f.last_change;
    j["nu"] = std::vector<double>(f.nu_hat.data(), f.nu_hat.data() + f.nu_hat.size());
    j["info_estimator"] = to_string(s.info_estimator);
    j["info"] = matrix_to_json(f.info);
    return j;
}

StoredFit fit_from_json(const json& j) {
    StoredFit s;
    try {
        if (get_or<int>(j, "schema_version", 0) != kSchemaVersion)
            throw InputError("unsupported fit schema version");
        s.fit.params = params_from_json(j);
        s.fit.nu_hat = s.fit.params.pack();
        s.model = get_or<std::string>(j, "model", "grm");
        s.item_names = get_or<std::vector<std::string>>(j, "item_names", {});
        if (const auto q = j.find("quadrature"); q != j.end()) {
            s.grid.points = q->at("points").get<int>();
            s.grid.lo = q->at("lo").get<double>();
            s.grid.hi = q->at("hi").get<double>();
        }
        s.info_estimator = parse_info_estimator(get_or<std::string>(j, "info_estimator", "xpd"));
        s.fit.n = get_or<std::size_t>(j, "n", 0);
        s.fit.log_likelihood = get_or<double>(j, "log_likelihood", 0.0);
        s.fit.converged = get_or<bool>(j, "converged", false);
        s.fit.iterations = get_or<int>(j, "iterations", 0);
        s.fit.last_change = get_or<double>(j, "last_change", 0.0);
        if (const auto info = j.find("info"); info != j.end())
            s.fit.info = matrix_from_json(*info);
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed fit JSON: ") + e.what());
    }
    return s;
}

json report_to_json(const ReliabilityReport& r) {
    return {{"kind", to_string(r.kind)}, {"point", r.point},   {"se", r.se},
            {"ci_lo", r.ci_lo},          {"ci_hi", r.ci_hi},   {"alpha", r.alpha},
            {"n", r.n},                  {"m", r.m},           {"Q", r.q},
            {"exceeds_one", r.exceeds_one}, {"flags", r.flags}};
}

json reports_to_json(const std::vector<ReliabilityReport>& reports) {
    json j;
    j["schema_version"] = kSchemaVersion;
    if (!reports.empty()) {
        j["n"] = reports.front().n;
        j["m"] = reports.front().m;
        j["Q"] = reports.front().q;
        j["alpha"] = reports.front().alpha;
    }
    j["reports"] = json::array();
    for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
    return j;
}

SimDesign design_from_json(const json& j) {
    try {
        SimDesign d = SimDesign::standard(parse_model(get_or<std::string>(j, "model", "2pl")));
        if (const auto c = j.find("conditions"); c != j.end()) {
            d.conditions.clear();
            for (const auto& e : *c)
                d.conditions.push_back({e.at("n").get<std::size_t>(), e.at("m").get<std::size_t>()});
        }
        d.replications = get_or<int>(j, "replications", d.replications);
        d.seed = get_or<std::uint64_t>(j, "seed", d.seed);
        if (const auto s = j.find("slope_range"); s != j.end()) {
            d.slope_lo = s->at(0).get<double>();
            d.slope_hi = s->at(1).get<double>();
        }
        if (const auto b = j.find("difficulty"); b != j.end()) {
            d.difficulty_mean = get_or<double>(*b, "mean", d.difficulty_mean);
            d.difficulty_sd = get_or<double>(*b, "sd", d.difficulty_sd);
        }
        if (const auto b = j.find("increment"); b != j.end()) {
            d.increment_mean = get_or<double>(*b, "mean", d.increment_mean);
            d.increment_sd = get_or<double>(*b, "sd", d.increment_sd);
        }
        d.categories = get_or<int>(j, "categories", d.categories);
        d.alpha = get_or<double>(j, "alpha", d.alpha);
        d.quad_points = get_or<int>(j, "quad_points", d.quad_points);
        d.quad_lo = get_or<double>(j, "quad_lo", d.quad_lo);
        d.quad_hi = get_or<double>(j, "quad_hi", d.quad_hi);
        if (const auto k = j.find("kinds"); k != j.end()) {
            d.kinds.clear();
            for (const auto& e : *k) d.kinds.push_back(parse_coefficient(e.get<std::string>()));
        }
        d.mc_draws = get_or<std::size_t>(j, "mc_draws", d.mc_draws);
        d.enumerate_cap = get_or<double>(j, "enumerate_cap", d.enumerate_cap);
        d.fit.tol = get_or<double>(j, "tol", d.fit.tol);
        d.fit.max_iter = get_or<int>(j, "max_iter", d.fit.max_iter);
        d.fit.info = parse_info_estimator(get_or<std::string>(j, "info", to_string(d.fit.info)));
        d.threads = get_or<int>(j, "threads", d.threads);
        d.validate();
        return d;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed design JSON: ") + e.what());
    }
}

json design_to_json(const SimDesign& d) {
    json conds = json::array();
    for (const auto& c : d.conditions) conds.push_back({{"n", c.n}, {"m", c.m}});
    json kinds = json::array();
    for (auto k : d.kinds) kinds.push_back(to_string(k));
    return {{"model", to_string(d.model)},
            {"conditions", conds},
            {"replications", d.replications},
            {"seed", d.seed},
            {"slope_range", {d.slope_lo, d.slope_hi}},
            {"difficulty", {{"mean", d.difficulty_mean}, {"sd", d.difficulty_sd}}},
            {"increment", {{"mean", d.increment_mean}, {"sd", d.increment_sd}}},
            {"categories", d.categories},
            {"alpha", d.alpha},
            {"quad_points", d.quad_points},
            {"quad_lo", d.quad_lo},
            {"quad_hi", d.quad_hi},
            {"kinds", kinds},
            {"mc_draws", d.mc_draws},
            {"enumerate_cap", d.enumerate_cap},
            {"tol", d.fit.tol},
            {"max_iter", d.fit.max_iter},
            {"info", to_string(d.fit.info)}};
}

json summary_to_json(const SimSummary& s) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        rows.push_back({{"kind", to_string(r.kind)},
                        {"n", r.condition.n},
                        {"m", r.condition.m},
                        {"true", r.truth},
                        {"true_mode", r.truth_mode},
                        {"est", r.mean_est},
                        {"emp_sd", r.emp_sd},
                        {"mean_se", r.mean_se},
                        {"coverage", r.coverage},
                        {"lb", r.mean_lo},
                        {"ub", r.mean_hi},
                        {"max_est", r.max_est},
                        {"n_used", r.n_used},
                        {"n_nonconv", r.n_nonconv},
                        {"n_failed", r.n_failed},
                        {"n_over1", r.n_over1},
                        {"coverage_band", {r.coverage_band_lo, r.coverage_band_hi}}});
    }
    return {{"schema_version", kSchemaVersion}, {"design", design_to_json(s.design)}, {"rows", rows}};
}

void write_summary_csv(const SimSummary& s, std::ostream& os) {
    os << "kind,n,m,true,est,emp_sd,mean_se,coverage,lb,ub,n_nonconv,n_over1\n";
    os << std::setprecision(6) << std::fixed;
    for (const auto& r : s.rows) {
        os << to_string(r.kind) << ',' << r.condition.n << ',' << r.condition.m << ',' << r.truth
           << ',' << r.mean_est << ',' << r.emp_sd << ',' << r.mean_se << ',' << r.coverage << ','
           << r.mean_lo << ',' << r.mean_hi << ',' << r.n_nonconv << ',' << r.n_over1 << '\n';
    }
}

ResponseMatrix read_responses_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InputError("response file is empty");
    std::vector<std::string> names = split_csv_line(line);
    const std::size_t m = names.size();
    if (m == 0 || (m == 1 && names[0].empty())) throw InputError("header row has no item names");

    std::vector<int> values;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto cells = split_csv_line(line);
        if (cells.size() != m) {
            std::ostringstream os;
            os << "row " << row << " has " << cells.size() << " cells, expected " << m;
            throw InputError(os.str());
        }
        for (std::size_t c = 0; c < m; ++c) {
            const std::string& cell = cells[c];
            int v = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || v < 0) {
                std::ostringstream os;
                os << "row " << row << ", column " << c + 1 << " (" << names[c] << "): ";
                os << (cell.empty() ? "missing response" : "'" + cell + "' is not a category");
                throw InputError(os.str());
            }
            values.push_back(v);
        }
    }
    if (row == 0) throw InputError("response file has no data rows");
    return ResponseMatrix(row, m, std::move(values), std::move(names));
}

ResponseMatrix read_responses_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open " + path.string());
    return read_responses_csv(is);
}

void write_scores_csv(const std::vector<PosteriorSummary>& scores, std::ostream& os) {
    os << "row,eap,post_var\n";
    os << std::setprecision(10);
    for (std::size_t i = 0; i < scores.size(); ++i)
        os << i + 1 << ',' << scores[i].eap << ',' << scores[i].post_var << '\n';
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path.string());
    os << text;
    if (!os) throw InputError("failed writing " + path.string());
}

}  // namespace irtp::io
