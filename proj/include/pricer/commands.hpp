#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pricer/evaluation.hpp"
#include "pricer/experiment_spec.hpp"
#include "pricer/io.hpp"
#include "pricer/simulator.hpp"

namespace pricer {

struct SimulateOutputs {
    std::filesystem::path revenue_csv;
    std::filesystem::path records_jsonl;
    std::filesystem::path summary_json;
    std::filesystem::path figure_csv;
};

/**
 * Runs the experiment described by the spec and writes the four artifacts
 * into spec.output_dir: revenue.csv, records.jsonl, figure.csv, and
 * summary.json.  The summary compares the first two policies over the
 * second half of the horizon; with a single policy or a single trial it
 * records why no test ran instead.
 */
inline SimulateOutputs run_simulate(const ExperimentSpec& spec, unsigned workers = 1) {
    validate_spec(spec);
    std::filesystem::path dir(spec.output_dir);
    std::filesystem::create_directories(dir);

    auto results = run_experiment(spec.market, spec.trials, spec.policies,
                                  spec.passive, spec.ts, workers);

    SimulateOutputs out;
    out.revenue_csv = dir / "revenue.csv";
    out.records_jsonl = dir / "records.jsonl";
    out.summary_json = dir / "summary.json";
    out.figure_csv = dir / "figure.csv";

    {
        auto f = detail::open_out(out.revenue_csv);
        write_revenue_csv(f, results);
    }
    {
        auto f = detail::open_out(out.records_jsonl);
        write_records_jsonl(f, results);
    }

    std::vector<std::pair<std::string, std::vector<double>>> daily;
    for (PolicyKind kind : spec.policies) {
        std::string name = policy_name(kind);
        std::vector<double> mean(static_cast<std::size_t>(spec.market.horizon), 0.0);
        long count = 0;
        for (const auto& r : results)
            if (r.policy == name) {
                for (std::size_t d = 0; d < mean.size(); ++d)
                    mean[d] += r.revenue_series[d];
                ++count;
            }
        for (auto& v : mean) v /= static_cast<double>(count);
        daily.emplace_back(std::move(name), std::move(mean));
    }
    {
        auto f = detail::open_out(out.figure_csv);
        write_figure_csv(f, daily);
    }

    {
        auto f = detail::open_out(out.summary_json);
        if (spec.policies.size() == 2 && spec.trials >= 2) {
            std::vector<RevenueSeries> series;
            series.reserve(results.size());
            for (const auto& r : results)
                series.push_back({r.trial, r.policy, r.revenue_series});
            DayWindow window{spec.market.horizon / 2 + 1, spec.market.horizon};
            auto comparison =
                compare_policies(series, window, policy_name(spec.policies[0]),
                                 policy_name(spec.policies[1]));
            write_summary_json(f, comparison);
        } else {
            f << "{\n  \"note\": \"policy comparison needs two policies and at "
                 "least two trials\"\n}\n";
        }
    }
    return out;
}

struct ReportOptions {
    std::vector<long> ks = {5, 10, 15, 20, 25, 30};
    std::string baseline_policy = "passive";
    std::string treatment_policy = "ts";
    long baseline_window = 30;
    double forecast_threshold = 2.0;
    std::filesystem::path output_dir = ".";
};

/**
 * Per-item windows for the significance table.  The baseline is each
 * item's revenue over the last baseline_window days of the baseline
 * policy's run; the treatment window is the treatment policy's whole run,
 * with a day flagged when the item's forecast clears the eligibility
 * threshold.  Items are keyed trial by trial so trials pool as independent
 * observations.
 */
inline std::vector<ItemRevenueWindows> build_item_windows(
    std::span<const RecordRow> rows, const ReportOptions& options) {
    if (options.baseline_window < 1)
        throw spec_error("baseline_window must be >= 1");
    if (options.baseline_policy == options.treatment_policy)
        throw spec_error("baseline and treatment policies must differ");

    std::map<std::pair<long, std::string>, std::vector<const ObservationRecord*>>
        grouped;
    for (const auto& row : rows)
        grouped[{row.trial, row.record.policy}].push_back(&row.record);

    std::map<long, const std::vector<const ObservationRecord*>*> baseline_by_trial,
        treatment_by_trial;
    for (auto& [key, records] : grouped) {
        std::sort(records.begin(), records.end(),
                  [](const ObservationRecord* a, const ObservationRecord* b) {
                      return a->day < b->day;
                  });
        for (std::size_t t = 0; t < records.size(); ++t)
            if (records[t]->day != static_cast<long>(t) + 1)
                throw std::runtime_error("trial " + std::to_string(key.first) +
                                         " policy " + key.second +
                                         ": days are not contiguous from 1");
        if (key.second == options.baseline_policy)
            baseline_by_trial[key.first] = &records;
        else if (key.second == options.treatment_policy)
            treatment_by_trial[key.first] = &records;
    }
    if (baseline_by_trial.empty())
        throw std::runtime_error("no records for baseline policy " +
                                 options.baseline_policy);
    if (treatment_by_trial.empty())
        throw std::runtime_error("no records for treatment policy " +
                                 options.treatment_policy);

    std::vector<ItemRevenueWindows> items;
    for (const auto& [trial, baseline_records] : baseline_by_trial) {
        auto treatment_pos = treatment_by_trial.find(trial);
        if (treatment_pos == treatment_by_trial.end())
            throw std::runtime_error("trial " + std::to_string(trial) +
                                     " has no treatment records");
        const auto& base = *baseline_records;
        const auto& treat = *treatment_pos->second;
        long horizon = static_cast<long>(base.size());
        if (options.baseline_window > horizon)
            throw std::runtime_error("baseline_window exceeds the recorded horizon");
        std::size_t basket = base.front()->prices.size();
        for (const auto* rec : base)
            if (rec->prices.size() != basket)
                throw std::runtime_error("trial " + std::to_string(trial) +
                                         ": basket size varies between days");
        for (const auto* rec : treat)
            if (rec->prices.size() != basket)
                throw std::runtime_error("trial " + std::to_string(trial) +
                                         ": basket size differs between policies");

        long first_base_day = horizon - options.baseline_window + 1;
        for (std::size_t i = 0; i < basket; ++i) {
            ItemRevenueWindows item;
            item.item_id =
                "t" + std::to_string(trial) + "/item-" + std::to_string(i);
            for (long d = first_base_day; d <= horizon; ++d) {
                const auto* rec = base[static_cast<std::size_t>(d - 1)];
                item.baseline.push_back(rec->prices[i] * rec->demands[i]);
            }
            for (const auto* rec : treat) {
                item.treatment.push_back(rec->prices[i] * rec->demands[i]);
                item.on_treatment.push_back(
                    rec->forecasts[i] >= options.forecast_threshold ? 1 : 0);
            }
            items.push_back(std::move(item));
        }
    }
    return items;
}

inline std::string variant_name(DeltaVariant variant) {
    return variant == DeltaVariant::treated_days_only ? "treated_days_only"
                                                      : "entire_period";
}

/// The per-threshold significance table, both delta variants per k.
inline std::vector<WaldTableRow> build_wald_table(
    std::span<const ItemRevenueWindows> items, std::span<const long> ks) {
    std::vector<WaldTableRow> rows;
    for (long k : ks) {
        for (auto variant :
             {DeltaVariant::treated_days_only, DeltaVariant::entire_period}) {
            WaldTableRow row;
            row.k = k;
            row.variant = variant_name(variant);
            try {
                auto samples = delta_table(items, k, variant);
                row.n = samples.size();
                std::vector<double> deltas;
                deltas.reserve(samples.size());
                for (const auto& s : samples) deltas.push_back(s.delta);
                double mean = 0.0;
                for (double d : deltas) mean += d;
                row.mean_delta = mean / static_cast<double>(deltas.size());
                try {
                    auto test = wald_test(deltas);
                    row.statistic = test.statistic;
                    row.p_value = test.p_value;
                } catch (const std::domain_error&) {
                    row.note = "degenerate sample";
                }
            } catch (const std::domain_error&) {
                row.note = "empty set";
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

struct ReportOutputs {
    std::filesystem::path report_json;
    std::filesystem::path report_csv;
    std::vector<WaldTableRow> rows;
};

inline ReportOutputs run_report(const std::filesystem::path& records_path,
                                const ReportOptions& options) {
    if (options.ks.empty()) throw spec_error("ks must not be empty");
    for (std::size_t i = 0; i < options.ks.size(); ++i) {
        if (options.ks[i] < 1) throw spec_error("ks must be positive");
        if (i > 0 && options.ks[i] <= options.ks[i - 1])
            throw spec_error("ks must be strictly ascending");
    }
    if (!(options.forecast_threshold >= 0.0))
        throw spec_error("threshold must be nonnegative");

    auto rows = read_records_jsonl(records_path);
    auto items = build_item_windows(rows, options);
    ReportOutputs out;
    out.rows = build_wald_table(items, options.ks);
    std::filesystem::create_directories(options.output_dir);
    out.report_json = options.output_dir / "report.json";
    out.report_csv = options.output_dir / "report.csv";
    {
        auto f = detail::open_out(out.report_json);
        write_report_json(f, out.rows);
    }
    {
        auto f = detail::open_out(out.report_csv);
        write_report_csv(f, out.rows);
    }
    return out;
}

}  // namespace pricer
