#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pricer {

/**
 * Per-item market state for one pricing day.
 *
 * prev_price is the price that was in effect on the previous day.  forecast
 * is the expected demand for today under an unchanged price, and elasticity
 * is the (strictly negative) price elasticity of demand.
 */
struct ItemState {
    std::string item_id;
    double prev_price = 0.0;
    double forecast = 0.0;
    double elasticity = -1.0;
};

/**
 * Features of one day's revenue observation for the posterior update.
 *
 * With prices p, forecasts f and previous prices q, component i of theta is
 * p_i^2 f_i / q_i - p_i f_i, and baseline_revenue is sum_i p_i f_i.  Total
 * linearized revenue then decomposes as dot(elasticity, theta) +
 * baseline_revenue.
 */
struct LikelihoodFeatures {
    std::vector<double> theta;
    double baseline_revenue = 0.0;
};

inline void validate_item(const ItemState& item, const char* where) {
    if (!(item.prev_price > 0.0))
        throw std::invalid_argument(std::string(where) + ": prev_price must be positive");
    if (!(item.forecast >= 0.0))
        throw std::invalid_argument(std::string(where) + ": forecast must be nonnegative");
    if (!(item.elasticity < 0.0))
        throw std::invalid_argument(std::string(where) + ": elasticity must be negative");
}

inline void validate_price(double price, const char* where) {
    if (!(price > 0.0))
        throw std::invalid_argument(std::string(where) + ": price must be positive");
}

/// Demand under a constant-elasticity response to a price move:
/// forecast * (price / prev_price)^elasticity.
inline double demand_exponential(const ItemState& item, double price) {
    validate_item(item, "demand_exponential");
    validate_price(price, "demand_exponential");
    return item.forecast * std::pow(price / item.prev_price, item.elasticity);
}

/// First-order expansion of demand_exponential around prev_price:
/// forecast + (price - prev_price) * forecast * elasticity / prev_price.
/// Not clamped at zero; far from prev_price it can go negative.
inline double demand_linear(const ItemState& item, double price) {
    validate_item(item, "demand_linear");
    validate_price(price, "demand_linear");
    return item.forecast
         + (price - item.prev_price) * item.forecast * item.elasticity / item.prev_price;
}

/// price * demand_linear(price).  Concave quadratic in price for negative
/// elasticity, which is what the basket optimizer relies on.
inline double revenue_item(const ItemState& item, double price) {
    validate_item(item, "revenue_item");
    validate_price(price, "revenue_item");
    return price * demand_linear(item, price);
}

/**
 * Decomposes the basket's linearized revenue at the given prices into the
 * part that scales with the elasticity vector and the part that does not.
 *
 * Items and prices are matched by position.  Elasticities carried in the
 * item states do not enter the result.
 */
inline LikelihoodFeatures likelihood_features(std::span<const ItemState> items,
                                              std::span<const double> prices) {
    if (items.size() != prices.size())
        throw std::invalid_argument("likelihood_features: items and prices differ in length");
    LikelihoodFeatures out;
    out.theta.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const ItemState& it = items[i];
        if (!(it.prev_price > 0.0))
            throw std::invalid_argument("likelihood_features: prev_price must be positive");
        if (!(it.forecast >= 0.0))
            throw std::invalid_argument("likelihood_features: forecast must be nonnegative");
        validate_price(prices[i], "likelihood_features");
        const double p = prices[i];
        out.theta[i] = p * p * it.forecast / it.prev_price - p * it.forecast;
        out.baseline_revenue += p * it.forecast;
    }
    return out;
}

}  // namespace pricer
