#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pricer/demand.hpp"
#include "pricer/solver.hpp"

namespace pricer {

enum class CovarianceMode { full, diagonal };

/**
 * Knobs for the sampled-elasticity pricing policy.
 *
 * prior_mean seeds the Gaussian belief over the basket's elasticity vector
 * and prior_scale is the shared prior variance (the prior covariance is
 * prior_scale times the identity).  noise_var is the variance of the
 * revenue observation noise, ridge an optional precision increment added on
 * every update, and update_period the number of days batched between
 * posterior refreshes.  Leaving mode unset picks diagonal covariance for
 * baskets larger than 500 items and full covariance otherwise.
 */
struct TsConfig {
    std::vector<double> prior_mean;
    double prior_scale = 0.25;
    double noise_var = 1.0;
    double ridge = 0.0;
    int max_rejections = 1000;
    int update_period = 1;
    std::optional<CovarianceMode> mode;

    bool operator==(const TsConfig&) const = default;
};

/// Thrown when rejection sampling burns through its attempt budget.
class rejection_overflow : public std::runtime_error {
  public:
    explicit rejection_overflow(int attempts)
        : std::runtime_error("sample_elasticities: no all-negative draw in " +
                             std::to_string(attempts) + " attempts"),
          attempts_(attempts) {}
    int attempts() const { return attempts_; }

  private:
    int attempts_;
};

inline constexpr std::size_t kDiagonalDefaultThreshold = 500;

/**
 * Gaussian belief over the basket elasticity vector, conjugate to the
 * linear-Gaussian revenue observation model.
 */
class ElasticityPosterior {
  public:
    ElasticityPosterior() = default;

    std::size_t size() const { return static_cast<std::size_t>(mean_.size()); }
    CovarianceMode mode() const { return mode_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    double noise_var() const { return noise_var_; }
    double ridge() const { return ridge_; }
    int max_rejections() const { return max_rejections_; }
    long day() const { return day_; }

    /// Full covariance matrix in either mode (diagonal mode expands).
    Eigen::MatrixXd covariance_matrix() const {
        if (mode_ == CovarianceMode::full) return cov_;
        return diag_.asDiagonal();
    }

    /// Per-coordinate variances in either mode.
    Eigen::VectorXd covariance_diagonal() const {
        if (mode_ == CovarianceMode::full) return cov_.diagonal();
        return diag_;
    }

    friend ElasticityPosterior init_posterior(const TsConfig&);
    friend std::vector<double> sample_elasticities(const ElasticityPosterior&,
                                                   std::mt19937_64&);
    friend void posterior_update(ElasticityPosterior&, const LikelihoodFeatures&,
                                 double);
    friend ElasticityPosterior posterior_from_json(const nlohmann::json&);

  private:
    CovarianceMode mode_ = CovarianceMode::full;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;    // full mode
    Eigen::VectorXd diag_;   // diagonal mode
    double noise_var_ = 1.0;
    double ridge_ = 0.0;
    int max_rejections_ = 1000;
    long day_ = 0;

    mutable Eigen::MatrixXd chol_;  // cached lower factor, full mode
    mutable bool chol_valid_ = false;

    const Eigen::MatrixXd& cholesky() const {
        if (!chol_valid_) {
            Eigen::LLT<Eigen::MatrixXd> llt(cov_);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error(
                    "ElasticityPosterior: covariance is not positive definite");
            chol_ = llt.matrixL();
            chol_valid_ = true;
        }
        return chol_;
    }
};

inline ElasticityPosterior init_posterior(const TsConfig& config) {
    if (config.prior_mean.empty())
        throw std::invalid_argument("init_posterior: empty prior mean");
    for (double m : config.prior_mean)
        if (!std::isfinite(m))
            throw std::invalid_argument("init_posterior: non-finite prior mean");
    if (!(config.prior_scale > 0.0))
        throw std::invalid_argument("init_posterior: prior_scale must be positive");
    if (!(config.noise_var > 0.0))
        throw std::invalid_argument("init_posterior: noise_var must be positive");
    if (!(config.ridge >= 0.0))
        throw std::invalid_argument("init_posterior: ridge must be nonnegative");
    if (config.max_rejections < 1)
        throw std::invalid_argument("init_posterior: max_rejections must be >= 1");
    if (config.update_period < 1)
        throw std::invalid_argument("init_posterior: update_period must be >= 1");

    ElasticityPosterior post;
    std::size_t n = config.prior_mean.size();
    post.mode_ = config.mode.value_or(n > kDiagonalDefaultThreshold
                                          ? CovarianceMode::diagonal
                                          : CovarianceMode::full);
    post.mean_ = Eigen::Map<const Eigen::VectorXd>(config.prior_mean.data(),
                                                   static_cast<Eigen::Index>(n));
    if (post.mode_ == CovarianceMode::full)
        post.cov_ = config.prior_scale *
                    Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    else
        post.diag_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                               config.prior_scale);
    post.noise_var_ = config.noise_var;
    post.ridge_ = config.ridge;
    post.max_rejections_ = config.max_rejections;
    return post;
}

/**
 * Draws elasticity vectors until one is strictly negative in every
 * coordinate.  Throws rejection_overflow after max_rejections failed draws.
 * Deterministic for a given engine state.
 */
inline std::vector<double> sample_elasticities(const ElasticityPosterior& post,
                                               std::mt19937_64& rng) {
    if (post.size() == 0)
        throw std::logic_error("sample_elasticities: uninitialized posterior");
    const Eigen::Index n = static_cast<Eigen::Index>(post.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(n), draw(n);
    for (int attempt = 1; attempt <= post.max_rejections(); ++attempt) {
        for (Eigen::Index i = 0; i < n; ++i) z[i] = gauss(rng);
        if (post.mode() == CovarianceMode::full) {
            draw = post.mean() + post.cholesky() * z;
        } else {
            const Eigen::VectorXd& d = post.diag_;
            for (Eigen::Index i = 0; i < n; ++i)
                draw[i] = post.mean()[i] + std::sqrt(d[i]) * z[i];
        }
        if ((draw.array() < 0.0).all())
            return std::vector<double>(draw.data(), draw.data() + n);
    }
    throw rejection_overflow(post.max_rejections());
}

/**
 * Conjugate refresh from one revenue observation.
 *
 * With precision P = Sigma^-1, theta the observation features and r the
 * observed minus baseline revenue, the posterior becomes
 *
 *     Sigma' = (P + theta theta^T / noise_var + ridge I)^-1
 *     mu'    = Sigma' (P mu + (r / noise_var) theta)
 *
 * At ridge zero the full-mode update uses the rank-one downdate form, which
 * is algebraically identical and avoids forming the precision.  Diagonal
 * mode keeps only the diagonal of the data term, costing O(n).
 */
inline void posterior_update(ElasticityPosterior& post, const LikelihoodFeatures& lf,
                             double observed_revenue) {
    const std::size_t n = post.size();
    if (n == 0) throw std::logic_error("posterior_update: uninitialized posterior");
    if (lf.theta.size() != n)
        throw std::invalid_argument("posterior_update: feature dimension mismatch");
    if (!std::isfinite(observed_revenue) || !std::isfinite(lf.baseline_revenue))
        throw std::invalid_argument("posterior_update: non-finite revenue");
    for (double t : lf.theta)
        if (!std::isfinite(t))
            throw std::invalid_argument("posterior_update: non-finite features");

    const double r = observed_revenue - lf.baseline_revenue;
    const double s2 = post.noise_var_;
    const Eigen::Index ni = static_cast<Eigen::Index>(n);
    Eigen::Map<const Eigen::VectorXd> theta(lf.theta.data(), ni);

    if (post.mode_ == CovarianceMode::diagonal) {
        for (Eigen::Index i = 0; i < ni; ++i) {
            double prec = 1.0 / post.diag_[i] + theta[i] * theta[i] / s2 + post.ridge_;
            double var = 1.0 / prec;
            post.mean_[i] = var * (post.mean_[i] / post.diag_[i] + (r / s2) * theta[i]);
            post.diag_[i] = var;
        }
    } else if (post.ridge_ == 0.0) {
        Eigen::VectorXd v = post.cov_ * theta;
        double denom = s2 + theta.dot(v);
        post.mean_ += v * ((r - theta.dot(post.mean_)) / denom);
        post.cov_ -= (v * v.transpose()) / denom;
        post.cov_ = 0.5 * (post.cov_ + post.cov_.transpose().eval());
    } else {
        Eigen::LLT<Eigen::MatrixXd> llt(post.cov_);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("posterior_update: covariance is not positive definite");
        Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(ni, ni);
        Eigen::MatrixXd precision = llt.solve(identity);
        Eigen::VectorXd natural = precision * post.mean_;
        precision += theta * theta.transpose() / s2;
        precision += post.ridge_ * identity;
        Eigen::LLT<Eigen::MatrixXd> llt2(precision);
        if (llt2.info() != Eigen::Success)
            throw std::runtime_error("posterior_update: updated precision is singular");
        post.cov_ = llt2.solve(identity);
        post.cov_ = 0.5 * (post.cov_ + post.cov_.transpose().eval());
        post.mean_ = llt2.solve(natural + (r / s2) * theta);
    }
    post.chol_valid_ = false;
    ++post.day_;
}

/// Fallback pricing signal when sampling cannot produce a negative vector:
/// the posterior mean truncated coordinatewise to at most -0.1.
inline std::vector<double> truncated_mean_elasticities(const ElasticityPosterior& post) {
    std::vector<double> out(post.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::min(post.mean()[static_cast<Eigen::Index>(i)], -0.1);
    return out;
}

struct TsDecision {
    std::vector<double> prices;
    std::vector<double> sampled_elasticities;
    bool used_fallback = false;
    int rejections = 0;
};

/**
 * One pricing decision: sample an elasticity vector from the posterior and
 * maximize the linearized basket revenue under it.  Falls back to the
 * truncated posterior mean when the rejection budget runs out.  Does not
 * update the posterior.
 */
inline TsDecision ts_step(const ElasticityPosterior& post,
                          std::span<const ItemState> items, const ConstraintSet& cs,
                          std::mt19937_64& rng) {
    if (items.size() != post.size())
        throw std::invalid_argument("ts_step: basket and posterior sizes differ");
    TsDecision out;
    try {
        out.sampled_elasticities = sample_elasticities(post, rng);
    } catch (const rejection_overflow& overflow) {
        out.sampled_elasticities = truncated_mean_elasticities(post);
        out.used_fallback = true;
        out.rejections = overflow.attempts();
    }
    std::vector<ItemState> priced(items.begin(), items.end());
    for (std::size_t i = 0; i < priced.size(); ++i)
        priced[i].elasticity = out.sampled_elasticities[i];
    out.prices = solve(priced, cs).prices;
    return out;
}

/// Unbiased sample variance of a revenue history.
inline double estimate_noise_var(std::span<const double> revenues) {
    if (revenues.size() < 2)
        throw std::domain_error("estimate_noise_var: need at least two observations");
    double mean = 0.0;
    for (double x : revenues) mean += x;
    mean /= static_cast<double>(revenues.size());
    double ss = 0.0;
    for (double x : revenues) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(revenues.size() - 1);
}

/// Checkpoint layout: mode, basket size, mean, covariance entries (full
/// row-major or just the diagonal), noise variance, ridge and day counter.
inline nlohmann::json posterior_to_json(const ElasticityPosterior& post) {
    nlohmann::json j;
    j["mode"] = post.mode() == CovarianceMode::full ? "full" : "diagonal";
    j["basket_size"] = post.size();
    j["mean"] = std::vector<double>(post.mean().data(), post.mean().data() + post.size());
    if (post.mode() == CovarianceMode::full) {
        Eigen::MatrixXd cov = post.covariance_matrix();
        std::vector<double> entries;
        entries.reserve(post.size() * post.size());
        for (Eigen::Index r = 0; r < cov.rows(); ++r)
            for (Eigen::Index c = 0; c < cov.cols(); ++c) entries.push_back(cov(r, c));
        j["covariance"] = entries;
    } else {
        Eigen::VectorXd d = post.covariance_diagonal();
        j["covariance"] = std::vector<double>(d.data(), d.data() + d.size());
    }
    j["noise_var"] = post.noise_var();
    j["ridge"] = post.ridge();
    j["day"] = post.day();
    return j;
}

inline ElasticityPosterior posterior_from_json(const nlohmann::json& j) {
    ElasticityPosterior post;
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "full")
        post.mode_ = CovarianceMode::full;
    else if (mode == "diagonal")
        post.mode_ = CovarianceMode::diagonal;
    else
        throw std::invalid_argument("posterior_from_json: unknown mode " + mode);
    std::size_t n = j.at("basket_size").get<std::size_t>();
    std::vector<double> mean = j.at("mean").get<std::vector<double>>();
    std::vector<double> cov = j.at("covariance").get<std::vector<double>>();
    if (mean.size() != n)
        throw std::invalid_argument("posterior_from_json: mean length mismatch");
    Eigen::Index ni = static_cast<Eigen::Index>(n);
    post.mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), ni);
    if (post.mode_ == CovarianceMode::full) {
        if (cov.size() != n * n)
            throw std::invalid_argument("posterior_from_json: covariance length mismatch");
        post.cov_.resize(ni, ni);
        for (Eigen::Index r = 0; r < ni; ++r)
            for (Eigen::Index c = 0; c < ni; ++c)
                post.cov_(r, c) = cov[static_cast<std::size_t>(r) * n +
                                      static_cast<std::size_t>(c)];
    } else {
        if (cov.size() != n)
            throw std::invalid_argument("posterior_from_json: covariance length mismatch");
        post.diag_ = Eigen::Map<const Eigen::VectorXd>(cov.data(), ni);
    }
    post.noise_var_ = j.at("noise_var").get<double>();
    post.ridge_ = j.at("ridge").get<double>();
    post.day_ = j.at("day").get<long>();
    if (!(post.noise_var_ > 0.0))
        throw std::invalid_argument("posterior_from_json: noise_var must be positive");
    if (!(post.ridge_ >= 0.0))
        throw std::invalid_argument("posterior_from_json: ridge must be nonnegative");
    return post;
}

}  // namespace pricer
