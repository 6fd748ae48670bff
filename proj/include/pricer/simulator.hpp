#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pricer/demand.hpp"
#include "pricer/elasticity.hpp"
#include "pricer/forecast.hpp"
#include "pricer/rng.hpp"
#include "pricer/solver.hpp"
#include "pricer/thompson.hpp"

namespace pricer {

enum class PolicyKind { passive, ts };

inline std::string policy_name(PolicyKind kind) {
    return kind == PolicyKind::passive ? "passive" : "ts";
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const Interval&) const = default;
};

/**
 * Synthetic market: a basket of items with hidden constant elasticities,
 * demand forecasts driven by an exponentially decayed autoregression on
 * realized demand, and Gaussian noise on both the forecast and the demand.
 *
 * When elasticity_true is empty each trial draws its own vector uniformly
 * from elasticity_range; a nonempty vector pins the hidden elasticities
 * for every trial.
 */
struct MarketConfig {
    std::size_t basket_size = 100;
    long horizon = 100;
    Interval elasticity_range{-3.0, -1.0};
    std::vector<double> elasticity_true;
    double initial_price = 12.0;
    Interval initial_forecast_range{0.5, 5.0};
    Interval price_box{10.0, 20.0};
    double forecast_decay = 0.5;
    double forecast_base = 0.5;
    double noise_std = 1.0;
    std::uint64_t seed = 0;

    bool operator==(const MarketConfig&) const = default;
};

inline void validate_market(const MarketConfig& config) {
    if (config.basket_size < 1)
        throw std::invalid_argument("MarketConfig: basket_size must be >= 1");
    if (config.horizon < 1)
        throw std::invalid_argument("MarketConfig: horizon must be >= 1");
    if (!(config.elasticity_range.lo <= config.elasticity_range.hi))
        throw std::invalid_argument("MarketConfig: elasticity range is inverted");
    if (!(config.elasticity_range.hi < 0.0))
        throw std::invalid_argument("MarketConfig: elasticities must be negative");
    if (!config.elasticity_true.empty()) {
        if (config.elasticity_true.size() != config.basket_size)
            throw std::invalid_argument(
                "MarketConfig: elasticity_true size differs from basket_size");
        for (double g : config.elasticity_true)
            if (!std::isfinite(g) || !(g < 0.0))
                throw std::invalid_argument(
                    "MarketConfig: elasticity_true entries must be negative");
    }
    if (!(config.price_box.lo > 0.0) || !(config.price_box.lo <= config.price_box.hi))
        throw std::invalid_argument("MarketConfig: bad price box");
    if (config.initial_price < config.price_box.lo ||
        config.initial_price > config.price_box.hi)
        throw std::invalid_argument("MarketConfig: initial_price outside the price box");
    if (!(config.initial_forecast_range.lo >= 0.0) ||
        !(config.initial_forecast_range.lo <= config.initial_forecast_range.hi))
        throw std::invalid_argument("MarketConfig: bad initial forecast range");
    if (!(config.forecast_decay > 0.0) || !(config.forecast_decay < 1.0))
        throw std::invalid_argument("MarketConfig: forecast_decay must lie in (0, 1)");
    if (!(config.forecast_base > 0.0))
        throw std::invalid_argument("MarketConfig: forecast_base must be positive");
    if (!(config.noise_std >= 0.0))
        throw std::invalid_argument("MarketConfig: noise_std must be nonnegative");
}

/// Passive policy: re-estimate elasticity per item from a trailing window.
struct PassivePolicyConfig {
    EstimatorKind estimator = EstimatorKind::ols;
    int window = 60;
    double initial_elasticity = -1.5;
    double huber_delta = 0.0;  // nonpositive selects the adaptive threshold
    ElasticityBounds bounds{};

    bool operator==(const PassivePolicyConfig&) const = default;
};

/// Sampling policy: Gaussian posterior over the basket elasticity vector.
struct TsPolicyConfig {
    double prior_mean = -2.0;
    double prior_scale = 0.25;
    double noise_var = 10000.0;
    double ridge = 0.0;
    int max_rejections = 1000;
    int update_period = 1;
    std::optional<CovarianceMode> mode;

    bool operator==(const TsPolicyConfig&) const = default;
};

inline void validate_policy(const PassivePolicyConfig& config) {
    if (config.window < 2)
        throw std::invalid_argument("PassivePolicyConfig: window must be >= 2");
    if (!(config.initial_elasticity < 0.0))
        throw std::invalid_argument(
            "PassivePolicyConfig: initial_elasticity must be negative");
    if (!(config.bounds.lo < config.bounds.hi) || !(config.bounds.hi < 0.0))
        throw std::invalid_argument("PassivePolicyConfig: bad elasticity bounds");
}

inline void validate_policy(const TsPolicyConfig& config) {
    if (!std::isfinite(config.prior_mean))
        throw std::invalid_argument("TsPolicyConfig: prior_mean must be finite");
    if (!(config.prior_scale > 0.0))
        throw std::invalid_argument("TsPolicyConfig: prior_scale must be positive");
    if (!(config.noise_var > 0.0))
        throw std::invalid_argument("TsPolicyConfig: noise_var must be positive");
    if (!(config.ridge >= 0.0))
        throw std::invalid_argument("TsPolicyConfig: ridge must be nonnegative");
    if (config.max_rejections < 1)
        throw std::invalid_argument("TsPolicyConfig: max_rejections must be >= 1");
    if (config.update_period < 1)
        throw std::invalid_argument("TsPolicyConfig: update_period must be >= 1");
}

inline TsConfig make_ts_config(const TsPolicyConfig& config, std::size_t basket_size) {
    TsConfig out;
    out.prior_mean.assign(basket_size, config.prior_mean);
    out.prior_scale = config.prior_scale;
    out.noise_var = config.noise_var;
    out.ridge = config.ridge;
    out.max_rejections = config.max_rejections;
    out.update_period = config.update_period;
    out.mode = config.mode;
    return out;
}

struct ObservationRecord {
    long day = 0;
    std::vector<double> prices;
    std::vector<double> forecasts;
    std::vector<double> demands;
    double basket_revenue = 0.0;
    std::string policy;
    std::optional<std::vector<double>> sampled_elasticities;

    bool operator==(const ObservationRecord&) const = default;
};

struct TrialResult {
    long trial = 0;
    std::string policy;
    std::vector<double> revenue_series;
    std::vector<ObservationRecord> records;

    bool operator==(const TrialResult&) const = default;
};

/// Hidden elasticities and day-1 forecasts, drawn once per trial and shared
/// by every policy run on that trial.
struct TrialSetup {
    std::vector<double> gamma_true;
    std::vector<double> initial_forecasts;
};

inline TrialSetup make_trial_setup(const MarketConfig& config, long trial) {
    validate_market(config);
    if (trial < 0) throw std::invalid_argument("make_trial_setup: negative trial");
    auto rng = make_stream(config.seed, static_cast<std::uint64_t>(trial), 0, 0);
    TrialSetup out;
    out.gamma_true.resize(config.basket_size);
    if (config.elasticity_true.empty()) {
        std::uniform_real_distribution<double> gamma_dist(config.elasticity_range.lo,
                                                          config.elasticity_range.hi);
        for (auto& g : out.gamma_true) g = gamma_dist(rng);
    } else {
        out.gamma_true = config.elasticity_true;
    }
    std::uniform_real_distribution<double> f_dist(config.initial_forecast_range.lo,
                                                  config.initial_forecast_range.hi);
    out.initial_forecasts.resize(config.basket_size);
    for (auto& f : out.initial_forecasts) f = f_dist(rng);
    return out;
}

/**
 * One item's realized demand: the ratio-form exponential model evaluated at
 * the hidden elasticity, plus Gaussian noise, clamped at zero.  Reads the
 * hidden elasticity from config.elasticity_true.
 */
inline double realize_demand(const MarketConfig& config, std::size_t item,
                             double forecast, double price, double prev_price,
                             std::mt19937_64& rng) {
    if (item >= config.elasticity_true.size())
        throw std::invalid_argument("realize_demand: item index outside elasticity_true");
    if (!(price > 0.0) || !(prev_price > 0.0))
        throw std::invalid_argument("realize_demand: prices must be positive");
    if (!(forecast >= 0.0))
        throw std::invalid_argument("realize_demand: negative forecast");
    double level =
        forecast * std::pow(price / prev_price, config.elasticity_true[item]);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double noise = config.noise_std * gauss(rng);
    return std::max(level + noise, 0.0);
}

namespace detail {

inline std::vector<std::string> default_item_ids(std::size_t basket_size) {
    std::vector<std::string> ids;
    ids.reserve(basket_size);
    for (std::size_t i = 0; i < basket_size; ++i)
        ids.push_back("item-" + std::to_string(i));
    return ids;
}

// Stream purposes: 0 = trial setup (policy-independent), then per policy
// 1 = forecast noise, 2 = demand noise, 3 = posterior sampling.
inline std::uint64_t policy_code(PolicyKind kind) {
    return kind == PolicyKind::passive ? 1 : 2;
}

inline TrialResult run_trial_impl(MarketConfig market, long trial, PolicyKind kind,
                                  const PassivePolicyConfig& passive_cfg,
                                  const TsPolicyConfig& ts_cfg) {
    validate_market(market);
    if (trial < 0) throw std::invalid_argument("run_trial: negative trial");
    if (kind == PolicyKind::passive)
        validate_policy(passive_cfg);
    else
        validate_policy(ts_cfg);

    const std::size_t basket = market.basket_size;
    TrialSetup setup = make_trial_setup(market, trial);
    market.elasticity_true = setup.gamma_true;

    const std::uint64_t pol = policy_code(kind);
    const std::uint64_t trial_u = static_cast<std::uint64_t>(trial);
    auto forecast_rng = make_stream(market.seed, trial_u, pol, 1);
    auto demand_rng = make_stream(market.seed, trial_u, pol, 2);
    auto sampling_rng = make_stream(market.seed, trial_u, pol, 3);

    const std::vector<std::string> ids = default_item_ids(basket);
    DecayForecaster forecaster(market.forecast_decay, market.forecast_base);

    std::vector<ElasticityDataset> datasets;
    std::vector<double> estimates;
    ElasticityPosterior posterior;
    std::vector<std::pair<LikelihoodFeatures, double>> pending;
    if (kind == PolicyKind::passive) {
        datasets.assign(basket,
                        ElasticityDataset(static_cast<std::size_t>(passive_cfg.window)));
        estimates.assign(basket, passive_cfg.initial_elasticity);
    } else {
        posterior = init_posterior(make_ts_config(ts_cfg, basket));
    }

    std::vector<double> prev_prices(basket, market.initial_price);
    TrialResult out;
    out.trial = trial;
    out.policy = policy_name(kind);
    out.revenue_series.reserve(static_cast<std::size_t>(market.horizon));
    out.records.reserve(static_cast<std::size_t>(market.horizon));

    for (long day = 1; day <= market.horizon; ++day) {
        try {
            std::vector<double> forecasts(basket);
            if (day == 1) {
                forecasts = setup.initial_forecasts;
            } else {
                std::normal_distribution<double> gauss(0.0, 1.0);
                for (std::size_t i = 0; i < basket; ++i) {
                    double noise = market.noise_std * gauss(forecast_rng);
                    forecasts[i] =
                        std::max(0.0, forecaster.forecast(ids[i], day) + noise);
                }
            }

            std::vector<std::size_t> active;
            for (std::size_t i = 0; i < basket; ++i)
                if (forecasts[i] > kForecastFloor) active.push_back(i);

            std::optional<std::vector<double>> sampled;
            if (kind == PolicyKind::ts) {
                try {
                    sampled = sample_elasticities(posterior, sampling_rng);
                } catch (const rejection_overflow&) {
                    sampled = truncated_mean_elasticities(posterior);
                }
            } else {
                for (std::size_t i : active)
                    if (datasets[i].estimable()) {
                        if (passive_cfg.estimator == EstimatorKind::ols)
                            estimates[i] = estimate_ols(datasets[i], passive_cfg.bounds);
                        else
                            estimates[i] = estimate_rls(datasets[i],
                                                        passive_cfg.huber_delta,
                                                        passive_cfg.bounds)
                                               .elasticity;
                    }
            }

            std::vector<double> prices = prev_prices;
            if (!active.empty()) {
                std::vector<ItemState> active_items;
                active_items.reserve(active.size());
                for (std::size_t i : active)
                    active_items.push_back({ids[i], prev_prices[i], forecasts[i],
                                            sampled ? (*sampled)[i] : estimates[i]});
                auto solution = solve(
                    active_items,
                    uniform_box(active.size(), market.price_box.lo, market.price_box.hi));
                for (std::size_t k = 0; k < active.size(); ++k)
                    prices[active[k]] = solution.prices[k];
            }

            std::vector<double> demands(basket);
            double revenue = 0.0;
            for (std::size_t i = 0; i < basket; ++i) {
                demands[i] = realize_demand(market, i, forecasts[i], prices[i],
                                            prev_prices[i], demand_rng);
                revenue += prices[i] * demands[i];
            }

            ObservationRecord record;
            record.day = day;
            record.prices = prices;
            record.forecasts = forecasts;
            record.demands = demands;
            record.basket_revenue = revenue;
            record.policy = out.policy;
            record.sampled_elasticities = sampled;
            out.revenue_series.push_back(revenue);
            out.records.push_back(std::move(record));

            for (std::size_t i = 0; i < basket; ++i)
                forecaster.record_demand(ids[i], day, demands[i]);
            if (kind == PolicyKind::passive) {
                for (std::size_t i = 0; i < basket; ++i)
                    datasets[i].add(
                        {prev_prices[i], forecasts[i], prices[i], demands[i]});
            } else {
                std::vector<ItemState> full_items;
                full_items.reserve(basket);
                for (std::size_t i = 0; i < basket; ++i)
                    full_items.push_back({ids[i], prev_prices[i], forecasts[i], -1.0});
                pending.emplace_back(likelihood_features(full_items, prices), revenue);
                if (day % ts_cfg.update_period == 0) {
                    for (const auto& [features, observed] : pending)
                        posterior_update(posterior, features, observed);
                    pending.clear();
                }
            }
            prev_prices = std::move(prices);
        } catch (const std::exception& e) {
            throw std::runtime_error("trial " + std::to_string(trial) + " day " +
                                     std::to_string(day) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace detail

inline TrialResult run_trial(const MarketConfig& market, long trial,
                             const PassivePolicyConfig& config) {
    return detail::run_trial_impl(market, trial, PolicyKind::passive, config, {});
}

inline TrialResult run_trial(const MarketConfig& market, long trial,
                             const TsPolicyConfig& config) {
    return detail::run_trial_impl(market, trial, PolicyKind::ts, {}, config);
}

/**
 * Runs every (trial, policy) pair.  Results are ordered trial-major with
 * policies in the given order; worker scheduling cannot affect content
 * because every random stream is derived from (seed, trial, policy).
 */
inline std::vector<TrialResult> run_experiment(const MarketConfig& market, long trials,
                                               std::span<const PolicyKind> policies,
                                               const PassivePolicyConfig& passive_cfg,
                                               const TsPolicyConfig& ts_cfg,
                                               unsigned workers = 1) {
    validate_market(market);
    if (trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
    if (policies.empty())
        throw std::invalid_argument("run_experiment: no policies requested");
    for (std::size_t i = 0; i < policies.size(); ++i)
        for (std::size_t j = i + 1; j < policies.size(); ++j)
            if (policies[i] == policies[j])
                throw std::invalid_argument("run_experiment: duplicate policy");

    const std::size_t jobs =
        static_cast<std::size_t>(trials) * policies.size();
    std::vector<TrialResult> results(jobs);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            std::size_t j = next.fetch_add(1);
            if (j >= jobs) return;
            try {
                long trial = static_cast<long>(j / policies.size());
                PolicyKind kind = policies[j % policies.size()];
                results[j] = detail::run_trial_impl(market, trial, kind, passive_cfg,
                                                    ts_cfg);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    unsigned count = std::max(1u, std::min<unsigned>(workers,
                                                     static_cast<unsigned>(jobs)));
    if (count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(count);
        for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

/// View of an item used by the production-style basket split.
struct PartitionItem {
    std::string item_id;
    double forecast = 0.0;
    bool fixed_price = false;
};

struct BasketPartition {
    std::vector<std::size_t> fixed;
    std::vector<std::size_t> passive_only;
    std::vector<std::size_t> ts_eligible;
};

/// Exhaustive, disjoint split: the fixed-price flag dominates, then items
/// below the forecast threshold go to the passive-only set.
inline BasketPartition partition_basket(std::span<const PartitionItem> items,
                                        double forecast_threshold) {
    BasketPartition out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].fixed_price)
            out.fixed.push_back(i);
        else if (items[i].forecast < forecast_threshold)
            out.passive_only.push_back(i);
        else
            out.ts_eligible.push_back(i);
    }
    return out;
}

/// Revenue slice consumed by the policy-comparison harness.
inline std::vector<double> item_revenue(const ObservationRecord& record) {
    std::vector<double> out(record.prices.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = record.prices[i] * record.demands[i];
    return out;
}

}  // namespace pricer
