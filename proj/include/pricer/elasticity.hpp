#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace pricer {

// Rows whose forecast falls at or below this floor carry no usable signal
// and are dropped on insertion.
inline constexpr double kForecastFloor = 1e-6;

/// One day of pricing evidence for a single item.
struct PriceObservation {
    double prev_price = 0.0;
    double forecast = 0.0;
    double price = 0.0;
    double demand = 0.0;
};

/// Admissible elasticity interval; estimates are clamped into it, which
/// keeps every estimate strictly negative.
struct ElasticityBounds {
    double lo = -10.0;
    double hi = -0.1;

    bool operator==(const ElasticityBounds&) const = default;
};

/**
 * Sliding window of per-item pricing observations.
 *
 * Only the most recent `window` retained rows are kept.  Retained rows
 * always have positive prices and forecasts above the floor.
 */
class ElasticityDataset {
  public:
    explicit ElasticityDataset(std::size_t window = 60) : window_(window) {
        if (window_ == 0)
            throw std::invalid_argument("ElasticityDataset: window must be positive");
    }

    /// Returns false when the row was dropped by the forecast floor.
    bool add(const PriceObservation& row) {
        if (!(row.prev_price > 0.0) || !(row.price > 0.0))
            throw std::invalid_argument("ElasticityDataset::add: prices must be positive");
        if (!(row.demand >= 0.0))
            throw std::invalid_argument("ElasticityDataset::add: negative demand");
        if (!(row.forecast > kForecastFloor)) return false;
        if (rows_.size() == window_) rows_.erase(rows_.begin());
        rows_.push_back(row);
        return true;
    }

    std::size_t size() const { return rows_.size(); }
    std::size_t window() const { return window_; }
    std::span<const PriceObservation> rows() const { return rows_; }

    /// True when a through-origin slope is identified: at least two rows,
    /// at least two distinct prices, and nonzero design variation.
    bool estimable() const {
        if (rows_.size() < 2) return false;
        bool distinct = false;
        double sxx = 0.0;
        for (const PriceObservation& r : rows_) {
            if (r.price != rows_.front().price) distinct = true;
            double x = design_x(r);
            sxx += x * x;
        }
        return distinct && sxx > 0.0;
    }

    /// Regressor: forecast-scaled relative price change.
    static double design_x(const PriceObservation& r) {
        return r.forecast * (r.price - r.prev_price) / r.prev_price;
    }

    /// Response: demand shortfall against the forecast.
    static double design_y(const PriceObservation& r) {
        return r.demand - r.forecast;
    }

  private:
    std::vector<PriceObservation> rows_;
    std::size_t window_;
};

inline double clamp_elasticity(double value, ElasticityBounds bounds) {
    if (!(bounds.lo < bounds.hi) || !(bounds.hi < 0.0))
        throw std::invalid_argument("clamp_elasticity: bounds must be negative and ordered");
    return std::clamp(value, bounds.lo, bounds.hi);
}

enum class EstimatorKind { ols, rls };

/**
 * Least-squares elasticity: the through-origin slope of demand shortfall on
 * the forecast-scaled relative price change, clamped into `bounds`.
 */
inline double estimate_ols(const ElasticityDataset& data, ElasticityBounds bounds = {}) {
    if (!data.estimable())
        throw std::domain_error("estimate_ols: dataset has no usable price variation");
    double sxy = 0.0, sxx = 0.0;
    for (const PriceObservation& r : data.rows()) {
        double x = ElasticityDataset::design_x(r);
        sxy += x * ElasticityDataset::design_y(r);
        sxx += x * x;
    }
    return clamp_elasticity(sxy / sxx, bounds);
}

struct RobustFit {
    double elasticity = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::size_t n = v.size();
    auto mid = v.begin() + n / 2;
    std::nth_element(v.begin(), mid, v.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace detail

/**
 * Huber-weighted reweighted least squares on the same through-origin model.
 *
 * Residuals beyond the Huber threshold are downweighted by threshold/|r|.
 * When `huber_delta` is nonpositive the threshold is refreshed each
 * iteration as 1.345 times the median-absolute-deviation scale of the
 * current residuals.  Iterates until the slope moves by less than 1e-8,
 * up to 100 rounds; a run that stops at the cap reports converged=false
 * and returns the last iterate.
 */
inline RobustFit estimate_rls(const ElasticityDataset& data, double huber_delta = 0.0,
                              ElasticityBounds bounds = {}) {
    if (!data.estimable())
        throw std::domain_error("estimate_rls: dataset has no usable price variation");
    const auto rows = data.rows();
    std::vector<double> xs(rows.size()), ys(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        xs[i] = ElasticityDataset::design_x(rows[i]);
        ys[i] = ElasticityDataset::design_y(rows[i]);
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sxy += xs[i] * ys[i];
        sxx += xs[i] * xs[i];
    }
    double slope = sxy / sxx;

    RobustFit fit;
    std::vector<double> resid(rows.size());
    for (int iter = 1; iter <= 100; ++iter) {
        fit.iterations = iter;
        for (std::size_t i = 0; i < rows.size(); ++i) resid[i] = ys[i] - slope * xs[i];
        double delta = huber_delta;
        if (!(delta > 0.0)) {
            std::vector<double> absdev(rows.size());
            double med = detail::median_of(resid);
            for (std::size_t i = 0; i < rows.size(); ++i)
                absdev[i] = std::abs(resid[i] - med);
            // 1.4826 rescales the MAD to a normal sigma.
            double scale = 1.4826 * detail::median_of(absdev);
            if (scale < 1e-12) {
                fit.converged = true;
                break;
            }
            delta = 1.345 * scale;
        }
        double swxy = 0.0, swxx = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            double a = std::abs(resid[i]);
            double w = a <= delta ? 1.0 : delta / a;
            swxy += w * xs[i] * ys[i];
            swxx += w * xs[i] * xs[i];
        }
        if (!(swxx > 0.0)) break;
        double next = swxy / swxx;
        bool done = std::abs(next - slope) < 1e-8;
        slope = next;
        if (done) {
            fit.converged = true;
            break;
        }
    }
    fit.elasticity = clamp_elasticity(slope, bounds);
    return fit;
}

}  // namespace pricer
