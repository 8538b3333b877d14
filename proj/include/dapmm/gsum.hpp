#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dapmm/error.hpp"
#include "dapmm/numeric.hpp"
#include "dapmm/random.hpp"

namespace dapmm {

/**
 * Weighted mixture of univariate Gaussians.
 *
 * Construction validates the invariants (G >= 1, nonnegative weights summing to one
 * within 1e-12, strictly positive variances); instances are immutable afterwards.
 */
class GaussianSum {
public:
    GaussianSum(std::vector<double> weights, std::vector<double> means, std::vector<double> variances)
        : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances))
    {
        if (weights_.empty())
            throw InvalidArgument("GaussianSum: at least one component required");
        if (weights_.size() != means_.size() || weights_.size() != variances_.size())
            throw InvalidArgument("GaussianSum: weights, means and variances differ in length");
        double total = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i]))
                throw InvalidArgument("GaussianSum: weights must be finite and nonnegative");
            if (!(variances_[i] > 0.0) || !std::isfinite(variances_[i]))
                throw InvalidArgument("GaussianSum: variances must be finite and positive");
            if (!std::isfinite(means_[i]))
                throw InvalidArgument("GaussianSum: means must be finite");
            total += weights_[i];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw InvalidArgument("GaussianSum: weights must sum to 1");
    }

    static GaussianSum single(double mean, double variance) { return {{1.0}, {mean}, {variance}}; }

    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
    [[nodiscard]] const std::vector<double>& means() const noexcept { return means_; }
    [[nodiscard]] const std::vector<double>& variances() const noexcept { return variances_; }

    friend bool operator==(const GaussianSum&, const GaussianSum&) = default;

private:
    std::vector<double> weights_;
    std::vector<double> means_;
    std::vector<double> variances_;
};

struct Moments {
    double mean;
    double variance;
};

enum class WeightScheme { UniformNormalized, Equal };

/// Distribution of random mixtures used by the Monte-Carlo experiments.
struct GsRandomConfig {
    int max_components = 10;
    double mean_lo = -5.0;
    double mean_hi = 5.0;
    double variance_lo = 0.1;
    double variance_hi = 1.0;
    WeightScheme weights = WeightScheme::UniformNormalized;

    void validate() const
    {
        if (max_components < 1)
            throw InvalidArgument("GsRandomConfig: max_components must be >= 1");
        if (!(variance_lo > 0.0) || variance_hi < variance_lo)
            throw InvalidArgument("GsRandomConfig: variance range must be positive and ordered");
        if (mean_hi < mean_lo)
            throw InvalidArgument("GsRandomConfig: mean range must be ordered");
    }
};

inline double gs_eval(const GaussianSum& gs, double x) noexcept
{
    double p = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i)
        p += gs.weights()[i] * normal_pdf(x, gs.means()[i], gs.variances()[i]);
    return p;
}

inline Moments gs_moments(const GaussianSum& gs) noexcept
{
    double mean = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i)
        mean += gs.weights()[i] * gs.means()[i];
    // Central form of the law of total variance; avoids cancellation in E[x^2] - mean^2.
    double variance = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const double d = gs.means()[i] - mean;
        variance += gs.weights()[i] * (gs.variances()[i] + d * d);
    }
    return {mean, variance};
}

/// Exact predictive density of x' = F x + w, w ~ N(0, Q), for a Gaussian-sum prior.
inline GaussianSum gs_predict_exact(const GaussianSum& gs, double gain, double noise_variance)
{
    if (!(noise_variance > 0.0))
        throw InvalidArgument("gs_predict_exact: noise variance must be positive");
    std::vector<double> means(gs.size());
    std::vector<double> variances(gs.size());
    for (std::size_t i = 0; i < gs.size(); ++i) {
        means[i] = gain * gs.means()[i];
        variances[i] = gain * gain * gs.variances()[i] + noise_variance;
    }
    return {gs.weights(), std::move(means), std::move(variances)};
}

inline GaussianSum gs_sample_random(Rng& rng, const GsRandomConfig& cfg)
{
    cfg.validate();
    std::uniform_int_distribution<int> count_dist(1, cfg.max_components);
    std::uniform_real_distribution<double> mean_dist(cfg.mean_lo, cfg.mean_hi);
    std::uniform_real_distribution<double> var_dist(cfg.variance_lo, cfg.variance_hi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const auto g = static_cast<std::size_t>(count_dist(rng));
    std::vector<double> weights(g), means(g), variances(g);
    for (std::size_t i = 0; i < g; ++i) {
        means[i] = mean_dist(rng);
        variances[i] = var_dist(rng);
        weights[i] = cfg.weights == WeightScheme::Equal ? 1.0 : unit(rng);
    }
    double total = 0.0;
    for (double w : weights)
        total += w;
    if (!(total > 0.0)) {
        // All-zero uniform draws; probability ~2^-53 per component.
        std::fill(weights.begin(), weights.end(), 1.0);
        total = static_cast<double>(g);
    }
    for (double& w : weights)
        w /= total;
    return {std::move(weights), std::move(means), std::move(variances)};
}

inline void to_json(nlohmann::json& j, const GaussianSum& gs)
{
    j = nlohmann::json{{"weights", gs.weights()}, {"means", gs.means()}, {"variances", gs.variances()}};
}

inline GaussianSum gaussian_sum_from_json(const nlohmann::json& j)
{
    try {
        return {j.at("weights").get<std::vector<double>>(), j.at("means").get<std::vector<double>>(),
                j.at("variances").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("GaussianSum JSON: ") + e.what());
    }
}

inline void to_json(nlohmann::json& j, const GsRandomConfig& cfg)
{
    j = nlohmann::json{{"max_components", cfg.max_components},
                       {"mean_range", {cfg.mean_lo, cfg.mean_hi}},
                       {"variance_range", {cfg.variance_lo, cfg.variance_hi}},
                       {"weights", cfg.weights == WeightScheme::Equal ? "equal" : "uniform"}};
}

inline void from_json(const nlohmann::json& j, GsRandomConfig& cfg)
{
    cfg.max_components = j.value("max_components", cfg.max_components);
    if (j.contains("mean_range")) {
        cfg.mean_lo = j["mean_range"].at(0).get<double>();
        cfg.mean_hi = j["mean_range"].at(1).get<double>();
    }
    if (j.contains("variance_range")) {
        cfg.variance_lo = j["variance_range"].at(0).get<double>();
        cfg.variance_hi = j["variance_range"].at(1).get<double>();
    }
    if (j.contains("weights")) {
        const auto scheme = j["weights"].get<std::string>();
        if (scheme == "equal")
            cfg.weights = WeightScheme::Equal;
        else if (scheme == "uniform")
            cfg.weights = WeightScheme::UniformNormalized;
        else
            throw InvalidArgument("GsRandomConfig: unknown weight scheme '" + scheme + "'");
    }
    cfg.validate();
}

} // namespace dapmm
