#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace pricer {

/**
 * Exponentially decayed demand history with an additive base level.
 *
 * For an item whose realized demands d_tau have been recorded for days
 * tau < t, the forecast for day t is
 *
 *     f_t = base + sum_tau decay^(t - tau) * d_tau.
 *
 * The weighted sum is carried incrementally: with S_t denoting the sum for
 * day t, recording d_t advances it as S_{t+1} = decay * (S_t + d_t), so a
 * day costs O(1) per item regardless of history length.
 *
 * Demands must be recorded contiguously, one day at a time.  Forecasts can
 * only be asked for the day immediately after the recorded history (or any
 * day at all while an item has no history, in which case the forecast is
 * just the base level).
 */
class DecayForecaster {
  public:
    DecayForecaster(double decay, double base) : decay_(decay), base_(base) {
        if (!(decay > 0.0) || !(decay < 1.0))
            throw std::invalid_argument("DecayForecaster: decay must lie in (0, 1)");
        if (!(base >= 0.0))
            throw std::invalid_argument("DecayForecaster: base must be nonnegative");
    }

    double decay() const { return decay_; }
    double base() const { return base_; }

    void record_demand(const std::string& item_id, long day, double demand) {
        if (!(demand >= 0.0))
            throw std::invalid_argument("DecayForecaster::record_demand: negative demand");
        if (day < 0)
            throw std::invalid_argument("DecayForecaster::record_demand: negative day");
        auto [pos, inserted] = history_.try_emplace(item_id, Entry{day + 1, 0.0});
        Entry& e = pos->second;
        if (!inserted) {
            if (day < e.next_day)
                throw std::domain_error(
                    "DecayForecaster::record_demand: day " + std::to_string(day) +
                    " already recorded for " + item_id);
            if (day > e.next_day)
                throw std::domain_error(
                    "DecayForecaster::record_demand: day " + std::to_string(day) +
                    " skips unrecorded days for " + item_id);
            e.next_day = day + 1;
        }
        e.weighted_sum = decay_ * (e.weighted_sum + demand);
    }

    double forecast(const std::string& item_id, long day) const {
        auto pos = history_.find(item_id);
        if (pos == history_.end()) return base_;
        const Entry& e = pos->second;
        if (day < e.next_day)
            throw std::domain_error(
                "DecayForecaster::forecast: day " + std::to_string(day) +
                " is already covered by recorded history for " + item_id);
        if (day > e.next_day)
            throw std::domain_error(
                "DecayForecaster::forecast: missing recorded demand before day " +
                std::to_string(day) + " for " + item_id);
        return base_ + e.weighted_sum;
    }

    bool has_history(const std::string& item_id) const {
        return history_.count(item_id) != 0;
    }

  private:
    struct Entry {
        long next_day;        // first day not yet recorded
        double weighted_sum;  // decayed sum valid for forecasting next_day
    };

    double decay_;
    double base_;
    std::unordered_map<std::string, Entry> history_;
};

}  // namespace pricer
