#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pricer {

namespace detail {

// Rational erfc after Cody's CALERF, three regions, relative error
// below 1e-15 over the useful range.  Constants are the published ones.
inline constexpr double kErfA[5] = {
    3.16112374387056560e0, 1.13864154151050156e2, 3.77485237685302021e2,
    3.20937758913846947e3, 1.85777706184603153e-1};
inline constexpr double kErfB[4] = {2.36012909523441209e1, 2.44024637934444173e2,
                                    1.28261652607737228e3, 2.84423683343917062e3};
inline constexpr double kErfC[9] = {
    5.64188496988670089e-1, 8.88314979438837594e0, 6.61191906371416295e1,
    2.98635138197400131e2,  8.81952221241769090e2, 1.71204761263407058e3,
    2.05107837782607147e3,  1.23033935479799725e3, 2.15311535474403846e-8};
inline constexpr double kErfD[8] = {
    1.57449261107098347e1, 1.17693950891312499e2, 5.37181101862009858e2,
    1.62138957456669019e3, 3.29079923573345963e3, 4.36261909014324716e3,
    3.43936767414372164e3, 1.23033935480374942e3};
inline constexpr double kErfP[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                                    1.25781726111229246e-1, 1.60837851487422766e-2,
                                    6.58749161529837803e-4, 1.63153871373020978e-2};
inline constexpr double kErfQ[5] = {2.56852019228982242e0, 1.87295284992346047e0,
                                    5.27905102951428412e-1, 6.05183413124413191e-2,
                                    2.33520497626869185e-3};
inline constexpr double kInvSqrtPi = 5.6418958354775628695e-1;
inline constexpr double kErfcUnderflow = 26.543;

}  // namespace detail

/// Complementary error function, rational approximation.
inline double erfc_cody(double x) {
    const double y = std::fabs(x);
    double result;
    if (y <= 0.46875) {
        double ysq = y > 1.11e-16 ? y * y : 0.0;
        double xnum = detail::kErfA[4] * ysq;
        double xden = ysq;
        for (int i = 0; i < 3; ++i) {
            xnum = (xnum + detail::kErfA[i]) * ysq;
            xden = (xden + detail::kErfB[i]) * ysq;
        }
        return 1.0 - x * (xnum + detail::kErfA[3]) / (xden + detail::kErfB[3]);
    }
    if (y <= 4.0) {
        double xnum = detail::kErfC[8] * y;
        double xden = y;
        for (int i = 0; i < 7; ++i) {
            xnum = (xnum + detail::kErfC[i]) * y;
            xden = (xden + detail::kErfD[i]) * y;
        }
        result = (xnum + detail::kErfC[7]) / (xden + detail::kErfD[7]);
        // Split exp(-y^2) so the truncated square is exact in binary.
        double ysq = std::trunc(y * 16.0) / 16.0;
        double del = (y - ysq) * (y + ysq);
        result *= std::exp(-ysq * ysq) * std::exp(-del);
    } else if (y < detail::kErfcUnderflow) {
        double ysq = 1.0 / (y * y);
        double xnum = detail::kErfP[5] * ysq;
        double xden = ysq;
        for (int i = 0; i < 4; ++i) {
            xnum = (xnum + detail::kErfP[i]) * ysq;
            xden = (xden + detail::kErfQ[i]) * ysq;
        }
        result = ysq * (xnum + detail::kErfP[4]) / (xden + detail::kErfQ[4]);
        result = (detail::kInvSqrtPi - result) / y;
        double trunc16 = std::trunc(y * 16.0) / 16.0;
        double del = (y - trunc16) * (y + trunc16);
        result *= std::exp(-trunc16 * trunc16) * std::exp(-del);
    } else {
        result = 0.0;
    }
    return x < 0.0 ? 2.0 - result : result;
}

/// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * erfc_cody(-x * 0.70710678118654752440);
}

/// Two-sided p-value for a standard-normal statistic.
inline double two_sided_p(double statistic) {
    if (std::isinf(statistic)) return 0.0;
    return erfc_cody(std::fabs(statistic) * 0.70710678118654752440);
}

struct WaldResult {
    std::size_t n = 0;
    double mean_delta = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;

    bool operator==(const WaldResult&) const = default;
};

/**
 * Z-type test of zero mean: W = mean / (sd / sqrt(n)) with the n-1
 * denominator standard deviation, two-sided normal p-value.
 */
inline WaldResult wald_test(std::span<const double> deltas) {
    if (deltas.size() < 2)
        throw std::domain_error("wald_test: need at least two deltas");
    WaldResult out;
    out.n = deltas.size();
    double mean = 0.0;
    for (double d : deltas) {
        if (!std::isfinite(d)) throw std::invalid_argument("wald_test: non-finite delta");
        mean += d;
    }
    mean /= static_cast<double>(out.n);
    double ss = 0.0;
    for (double d : deltas) ss += (d - mean) * (d - mean);
    double sd = std::sqrt(ss / static_cast<double>(out.n - 1));
    if (sd == 0.0)
        throw std::domain_error("wald_test: degenerate sample with zero variance");
    out.mean_delta = mean;
    out.statistic = mean / (sd / std::sqrt(static_cast<double>(out.n)));
    out.p_value = two_sided_p(out.statistic);
    return out;
}

struct DeltaSample {
    std::string item_id;
    double delta = 0.0;
    long days_on_treatment = 0;
};

/**
 * Per-item revenue in the pre-period and the treatment period.  The
 * on_treatment flags mark which treatment days the item was actually
 * priced by the treatment policy; they align with the treatment series.
 */
struct ItemRevenueWindows {
    std::string item_id;
    std::vector<double> baseline;
    std::vector<double> treatment;
    std::vector<std::uint8_t> on_treatment;
};

enum class DeltaVariant {
    treated_days_only,  // average revenue over flagged days only
    entire_period,      // average over the whole treatment window
};

/**
 * Revenue deltas for items treated at least min_days times.  delta is the
 * treatment-window average minus the baseline-window average; the variant
 * picks which treatment days enter the average.  Throws when no item
 * qualifies.
 */
inline std::vector<DeltaSample> delta_table(std::span<const ItemRevenueWindows> items,
                                            long min_days, DeltaVariant variant) {
    if (min_days < 0) throw std::invalid_argument("delta_table: negative min_days");
    std::vector<DeltaSample> out;
    for (const auto& item : items) {
        if (item.baseline.empty() || item.treatment.empty())
            throw std::invalid_argument("delta_table: empty window for item " +
                                        item.item_id);
        if (item.on_treatment.size() != item.treatment.size())
            throw std::invalid_argument("delta_table: flag length mismatch for item " +
                                        item.item_id);
        long days_on = 0;
        for (auto f : item.on_treatment) days_on += f ? 1 : 0;
        long needed = variant == DeltaVariant::treated_days_only
                          ? std::max(1L, min_days)
                          : min_days;
        if (days_on < needed) continue;

        double base = 0.0;
        for (double r : item.baseline) base += r;
        base /= static_cast<double>(item.baseline.size());

        double treat = 0.0;
        if (variant == DeltaVariant::treated_days_only) {
            for (std::size_t d = 0; d < item.treatment.size(); ++d)
                if (item.on_treatment[d]) treat += item.treatment[d];
            treat /= static_cast<double>(days_on);
        } else {
            for (double r : item.treatment) treat += r;
            treat /= static_cast<double>(item.treatment.size());
        }
        out.push_back({item.item_id, treat - base, days_on});
    }
    if (out.empty())
        throw std::domain_error("delta_table: no item treated at least " +
                                std::to_string(min_days) + " days");
    return out;
}

/// One policy's revenue trajectory in one simulated trial.
struct RevenueSeries {
    long trial = 0;
    std::string policy;
    std::vector<double> revenue;  // index d is day d+1
};

/// Inclusive 1-based day range.
struct DayWindow {
    long first_day = 1;
    long last_day = 1;

    bool operator==(const DayWindow&) const = default;
};

struct PolicyWindowStats {
    std::string policy;
    double mean = 0.0;
    double sd = 0.0;
};

struct PolicyComparison {
    DayWindow window;
    std::size_t trials = 0;
    std::vector<double> baseline_daily_mean;
    std::vector<double> treatment_daily_mean;
    PolicyWindowStats baseline;
    PolicyWindowStats treatment;
    std::vector<double> paired_diffs;  // per-trial treatment minus baseline
    WaldResult test;
};

namespace detail {

inline double window_mean(const std::vector<double>& series, DayWindow w) {
    double sum = 0.0;
    for (long d = w.first_day; d <= w.last_day; ++d)
        sum += series[static_cast<std::size_t>(d - 1)];
    return sum / static_cast<double>(w.last_day - w.first_day + 1);
}

inline PolicyWindowStats window_stats(const std::string& policy,
                                      const std::vector<double>& per_trial_means) {
    PolicyWindowStats out;
    out.policy = policy;
    for (double m : per_trial_means) out.mean += m;
    out.mean /= static_cast<double>(per_trial_means.size());
    if (per_trial_means.size() > 1) {
        double ss = 0.0;
        for (double m : per_trial_means) ss += (m - out.mean) * (m - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(per_trial_means.size() - 1));
    }
    return out;
}

}  // namespace detail

/**
 * Paired comparison of two policies run on shared market draws.  Produces
 * per-day cross-trial mean revenue for each policy and a Wald test of the
 * per-trial difference of window means.  Trials must match one-to-one.
 *
 * Degenerate samples are folded into the result instead of throwing: an
 * all-zero difference reports a unit p-value and a zero-variance nonzero
 * difference reports an infinite statistic with a zero p-value.
 */
inline PolicyComparison compare_policies(std::span<const RevenueSeries> results,
                                         DayWindow window,
                                         const std::string& baseline_policy,
                                         const std::string& treatment_policy) {
    if (baseline_policy == treatment_policy)
        throw std::invalid_argument("compare_policies: policies must differ");
    if (window.first_day < 1 || window.last_day < window.first_day)
        throw std::invalid_argument("compare_policies: bad day window");

    std::map<long, const RevenueSeries*> base_by_trial, treat_by_trial;
    for (const auto& rs : results) {
        std::map<long, const RevenueSeries*>* bucket = nullptr;
        if (rs.policy == baseline_policy)
            bucket = &base_by_trial;
        else if (rs.policy == treatment_policy)
            bucket = &treat_by_trial;
        else
            continue;
        if (!bucket->emplace(rs.trial, &rs).second)
            throw std::invalid_argument("compare_policies: duplicate series for trial " +
                                        std::to_string(rs.trial) + " policy " + rs.policy);
    }
    if (base_by_trial.empty())
        throw std::invalid_argument("compare_policies: no series for policy " +
                                    baseline_policy);
    if (base_by_trial.size() != treat_by_trial.size())
        throw std::invalid_argument("compare_policies: trial counts differ");
    for (const auto& [trial, rs] : base_by_trial)
        if (!treat_by_trial.count(trial))
            throw std::invalid_argument("compare_policies: trial " +
                                        std::to_string(trial) + " lacks a " +
                                        treatment_policy + " series");
    if (base_by_trial.size() < 2)
        throw std::domain_error("compare_policies: need at least two trials");

    std::size_t horizon = base_by_trial.begin()->second->revenue.size();
    for (const auto& bucket : {base_by_trial, treat_by_trial})
        for (const auto& [trial, rs] : bucket)
            if (rs->revenue.size() != horizon)
                throw std::invalid_argument("compare_policies: ragged revenue series");
    if (static_cast<std::size_t>(window.last_day) > horizon)
        throw std::invalid_argument("compare_policies: window exceeds the horizon");

    PolicyComparison out;
    out.window = window;
    out.trials = base_by_trial.size();
    out.baseline_daily_mean.assign(horizon, 0.0);
    out.treatment_daily_mean.assign(horizon, 0.0);
    std::vector<double> base_means, treat_means;
    for (const auto& [trial, rs] : base_by_trial) {
        for (std::size_t d = 0; d < horizon; ++d)
            out.baseline_daily_mean[d] += rs->revenue[d];
        base_means.push_back(detail::window_mean(rs->revenue, window));
        const auto* ts = treat_by_trial.at(trial);
        for (std::size_t d = 0; d < horizon; ++d)
            out.treatment_daily_mean[d] += ts->revenue[d];
        treat_means.push_back(detail::window_mean(ts->revenue, window));
        out.paired_diffs.push_back(treat_means.back() - base_means.back());
    }
    for (std::size_t d = 0; d < horizon; ++d) {
        out.baseline_daily_mean[d] /= static_cast<double>(out.trials);
        out.treatment_daily_mean[d] /= static_cast<double>(out.trials);
    }
    out.baseline = detail::window_stats(baseline_policy, base_means);
    out.treatment = detail::window_stats(treatment_policy, treat_means);

    try {
        out.test = wald_test(out.paired_diffs);
    } catch (const std::domain_error&) {
        double mean = 0.0;
        for (double d : out.paired_diffs) mean += d;
        mean /= static_cast<double>(out.paired_diffs.size());
        out.test.n = out.paired_diffs.size();
        out.test.mean_delta = mean;
        if (mean == 0.0) {
            out.test.statistic = 0.0;
            out.test.p_value = 1.0;
        } else {
            out.test.statistic = mean > 0.0
                                     ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
            out.test.p_value = 0.0;
        }
    }
    return out;
}

}  // namespace pricer
