#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dapmm/error.hpp"
#include "dapmm/grid.hpp"

namespace dapmm {

using FeatureVector = std::vector<double>;

/// Length of the analytical feature vector for an N-node PMD: N + 2(N-2) + 1.
constexpr std::size_t analytical_feature_count(std::size_t n) noexcept { return 3 * n - 3; }

/// Per-entry standardization statistics, estimated on a training split.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> std;

    static FeatureStats identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

    /// Mean and population standard deviation per column; zero-variance columns get std 1.
    static FeatureStats estimate(std::span<const FeatureVector> rows)
    {
        if (rows.empty())
            throw EmptyInput("FeatureStats::estimate: no rows");
        const std::size_t n = rows.front().size();
        FeatureStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
        for (const auto& r : rows) {
            if (r.size() != n)
                throw DimensionMismatch("FeatureStats::estimate: ragged rows");
            for (std::size_t i = 0; i < n; ++i)
                s.mean[i] += r[i];
        }
        const double count = static_cast<double>(rows.size());
        for (double& m : s.mean)
            m /= count;
        for (const auto& r : rows)
            for (std::size_t i = 0; i < n; ++i) {
                const double d = r[i] - s.mean[i];
                s.std[i] += d * d;
            }
        for (double& v : s.std) {
            v = std::sqrt(v / count);
            if (!(v > 0.0))
                v = 1.0;
        }
        return s;
    }

    [[nodiscard]] std::size_t size() const noexcept { return mean.size(); }
};

/**
 * Interior central differences of the PMD weights.
 *
 * order 1: (w[i+1] - w[i-1]) / (2*spacing); order 2: (w[i+1] - 2w[i] + w[i-1]) / spacing^2.
 * Returns N-2 entries, one per interior node.
 */
inline std::vector<double> central_differences(const PointMassDensity& pmd, int order)
{
    const auto& w = pmd.weights;
    if (w.size() < Grid::min_count)
        throw InvalidArgument("central_differences: at least 4 nodes required");
    if (order != 1 && order != 2)
        throw InvalidArgument("central_differences: order must be 1 or 2");
    const double h = pmd.grid.spacing();
    std::vector<double> out(w.size() - 2);
    for (std::size_t i = 1; i + 1 < w.size(); ++i)
        out[i - 1] = order == 1 ? (w[i + 1] - w[i - 1]) / (2.0 * h) : (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h);
    return out;
}

/// Target position relative to the prior grid: -1 at the lower edge, +1 at the upper edge.
inline double relative_target(const Grid& grid, double target) noexcept
{
    return (target - grid.center()) / grid.half_width();
}

/// [weights] ++ [first differences] ++ [second differences] ++ [relative target].
inline FeatureVector extract_features(const PointMassDensity& pmd, double target)
{
    const std::size_t n = pmd.size();
    FeatureVector v;
    v.reserve(analytical_feature_count(n));
    v.insert(v.end(), pmd.weights.begin(), pmd.weights.end());
    const auto d1 = central_differences(pmd, 1);
    const auto d2 = central_differences(pmd, 2);
    v.insert(v.end(), d1.begin(), d1.end());
    v.insert(v.end(), d2.begin(), d2.end());
    v.push_back(relative_target(pmd.grid, target));
    return v;
}

inline FeatureVector extract_features(const PointMassDensity& pmd, double target, std::size_t expected_nodes)
{
    if (pmd.size() != expected_nodes)
        throw DimensionMismatch("extract_features: PMD has " + std::to_string(pmd.size()) + " nodes, expected " +
                                std::to_string(expected_nodes));
    return extract_features(pmd, target);
}

/// [N] ++ raw moments 1..max_order ++ central moments 2..max_order ++ [relative target].
inline std::vector<double> statistical_features(const PointMassDensity& pmd, double target, int max_order = 4)
{
    if (max_order < 2)
        throw InvalidArgument("statistical_features: max_order must be >= 2");
    const auto& x = pmd.grid.points();
    const double h = pmd.grid.spacing();
    std::vector<double> v;
    v.push_back(static_cast<double>(pmd.size()));
    double mean = 0.0;
    for (int p = 1; p <= max_order; ++p) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            m += pmd.weights[i] * h * std::pow(x[i], p);
        if (p == 1)
            mean = m;
        v.push_back(m);
    }
    for (int p = 2; p <= max_order; ++p) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            m += pmd.weights[i] * h * std::pow(x[i] - mean, p);
        v.push_back(m);
    }
    v.push_back(relative_target(pmd.grid, target));
    return v;
}

inline FeatureVector standardize(std::span<const double> v, const FeatureStats& stats)
{
    if (v.size() != stats.size())
        throw DimensionMismatch("standardize: feature length " + std::to_string(v.size()) + " vs stats length " +
                                std::to_string(stats.size()));
    FeatureVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = (v[i] - stats.mean[i]) / stats.std[i];
    return out;
}

inline FeatureVector unstandardize(std::span<const double> z, const FeatureStats& stats)
{
    if (z.size() != stats.size())
        throw DimensionMismatch("unstandardize: length mismatch");
    FeatureVector out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = z[i] * stats.std[i] + stats.mean[i];
    return out;
}

inline void to_json(nlohmann::json& j, const FeatureStats& s) { j = nlohmann::json{{"mean", s.mean}, {"std", s.std}}; }

inline void from_json(const nlohmann::json& j, FeatureStats& s)
{
    j.at("mean").get_to(s.mean);
    j.at("std").get_to(s.std);
    if (s.mean.size() != s.std.size())
        throw DimensionMismatch("FeatureStats: mean/std length mismatch");
}

} // namespace dapmm
