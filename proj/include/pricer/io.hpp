#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pricer/evaluation.hpp"
#include "pricer/simulator.hpp"

namespace pricer {

/// 17 significant digits: enough for an exact double round trip in text.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

// JSON has no infinity; the degenerate statistics become tagged strings.
inline nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline nlohmann::json wald_to_json(const WaldResult& test) {
    nlohmann::json j;
    j["n"] = test.n;
    j["mean_delta"] = json_number(test.mean_delta);
    j["statistic"] = json_number(test.statistic);
    j["p_value"] = json_number(test.p_value);
    return j;
}

}  // namespace detail

inline void write_revenue_csv(std::ostream& out, std::span<const TrialResult> results) {
    out << "trial,policy,day,basket_revenue\n";
    for (const auto& result : results)
        for (std::size_t t = 0; t < result.revenue_series.size(); ++t)
            out << result.trial << ',' << result.policy << ',' << (t + 1) << ','
                << fmt17(result.revenue_series[t]) << '\n';
}

inline void write_records_jsonl(std::ostream& out, std::span<const TrialResult> results) {
    for (const auto& result : results)
        for (const auto& rec : result.records) {
            nlohmann::json j;
            j["trial"] = result.trial;
            j["policy"] = rec.policy;
            j["day"] = rec.day;
            j["prices"] = rec.prices;
            j["forecasts"] = rec.forecasts;
            j["demands"] = rec.demands;
            j["basket_revenue"] = rec.basket_revenue;
            if (rec.sampled_elasticities)
                j["sampled_elasticities"] = *rec.sampled_elasticities;
            out << j.dump() << '\n';
        }
}

/// One line of records.jsonl.
struct RecordRow {
    long trial = 0;
    ObservationRecord record;

    bool operator==(const RecordRow&) const = default;
};

inline std::vector<RecordRow> read_records_jsonl(std::istream& in) {
    std::vector<RecordRow> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            RecordRow row;
            row.trial = j.at("trial").get<long>();
            row.record.policy = j.at("policy").get<std::string>();
            row.record.day = j.at("day").get<long>();
            row.record.prices = j.at("prices").get<std::vector<double>>();
            row.record.forecasts = j.at("forecasts").get<std::vector<double>>();
            row.record.demands = j.at("demands").get<std::vector<double>>();
            row.record.basket_revenue = j.at("basket_revenue").get<double>();
            if (j.contains("sampled_elasticities"))
                row.record.sampled_elasticities =
                    j.at("sampled_elasticities").get<std::vector<double>>();
            if (row.record.prices.size() != row.record.demands.size() ||
                row.record.prices.size() != row.record.forecasts.size())
                throw std::runtime_error("ragged item vectors");
            rows.push_back(std::move(row));
        } catch (const std::exception& e) {
            throw std::runtime_error("records line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    return rows;
}

inline std::vector<RecordRow> read_records_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_records_jsonl(in);
}

inline void write_figure_csv(
    std::ostream& out,
    std::span<const std::pair<std::string, std::vector<double>>> daily_means) {
    out << "policy,day,mean_revenue\n";
    for (const auto& [policy, series] : daily_means)
        for (std::size_t d = 0; d < series.size(); ++d)
            out << policy << ',' << (d + 1) << ',' << fmt17(series[d]) << '\n';
}

inline void write_summary_json(std::ostream& out, const PolicyComparison& comparison) {
    nlohmann::json j;
    j["window"] = {{"first_day", comparison.window.first_day},
                   {"last_day", comparison.window.last_day}};
    j["trials"] = comparison.trials;
    j["baseline"] = {{"policy", comparison.baseline.policy},
                     {"window_mean", comparison.baseline.mean},
                     {"window_sd", comparison.baseline.sd}};
    j["treatment"] = {{"policy", comparison.treatment.policy},
                      {"window_mean", comparison.treatment.mean},
                      {"window_sd", comparison.treatment.sd}};
    j["paired_diffs"] = comparison.paired_diffs;
    j["test"] = detail::wald_to_json(comparison.test);
    out << j.dump(2) << '\n';
}

/// One row of the per-threshold significance table.
struct WaldTableRow {
    long k = 0;
    std::string variant;
    std::size_t n = 0;
    std::optional<double> mean_delta;
    std::optional<double> statistic;
    std::optional<double> p_value;
    std::string note = "ok";
};

inline void write_report_json(std::ostream& out, std::span<const WaldTableRow> rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json r;
        r["k"] = row.k;
        r["variant"] = row.variant;
        r["n"] = row.n;
        r["note"] = row.note;
        if (row.mean_delta) r["mean_delta"] = detail::json_number(*row.mean_delta);
        if (row.statistic) r["statistic"] = detail::json_number(*row.statistic);
        if (row.p_value) r["p_value"] = detail::json_number(*row.p_value);
        j.push_back(std::move(r));
    }
    out << j.dump(2) << '\n';
}

inline void write_report_csv(std::ostream& out, std::span<const WaldTableRow> rows) {
    out << "k,variant,n,mean_delta,statistic,p_value,note\n";
    for (const auto& row : rows) {
        out << row.k << ',' << row.variant << ',' << row.n << ',';
        if (row.mean_delta) out << fmt17(*row.mean_delta);
        out << ',';
        if (row.statistic) out << fmt17(*row.statistic);
        out << ',';
        if (row.p_value) out << fmt17(*row.p_value);
        out << ',' << row.note << '\n';
    }
}

}  // namespace pricer
