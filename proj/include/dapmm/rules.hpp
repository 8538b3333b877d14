#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "dapmm/dynamics.hpp"
#include "dapmm/error.hpp"
#include "dapmm/grid.hpp"
#include "dapmm/gsum.hpp"
#include "dapmm/parallel.hpp"

namespace dapmm {

/// Candidate integration rules; the underlying value is the 1-based rule index.
enum class RuleId : int { Midpoint = 1, Richardson = 2 };

inline constexpr std::size_t rule_count = 2;

constexpr std::string_view rule_name(RuleId id) noexcept
{
    return id == RuleId::Midpoint ? "midpoint" : "richardson";
}

constexpr std::size_t rule_slot(RuleId id) noexcept { return static_cast<std::size_t>(id) - 1; }

struct RuleOutput {
    double value;
    RuleId rule;
};

/// Order of the midpoint rule; the Richardson weight is 1 / (2^order - 1).
inline constexpr int midpoint_order = 2;

namespace detail {

// Midpoint quadrature of the convolution using every `stride`-th node of the PMD,
// each carrying a cell volume of stride * spacing.
inline double strided_midpoint(const PointMassDensity& pmd, const DynamicsModel& model, double target,
                               std::size_t stride)
{
    const auto& nodes = pmd.grid.points();
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); i += stride)
        sum += transition_density(model, target, nodes[i]) * pmd.weights[i];
    return sum * pmd.grid.spacing() * static_cast<double>(stride);
}

inline void require_coarsenable(std::size_t count)
{
    if (count % 2 != 0)
        throw InvalidArgument("coarsen: grid size must be even");
    if (count / 2 < Grid::min_count)
        throw InvalidArgument("coarsen: grid size must be at least 8");
}

inline double extrapolate(double fine, double coarse) noexcept
{
    constexpr double denom = static_cast<double>((1 << midpoint_order) - 1);
    return fine + (fine - coarse) / denom;
}

} // namespace detail

/// Sum over nodes of p(target | node) * weight * spacing.
inline double midpoint_rule(const PointMassDensity& pmd, const DynamicsModel& model, double target)
{
    return detail::strided_midpoint(pmd, model, target, 1);
}

/// Keeps the 1st, 3rd, 5th, ... nodes at doubled spacing. Weights are copied as-is,
/// so the result is a quadrature input rather than a normalized density.
inline PointMassDensity coarsen(const PointMassDensity& pmd)
{
    detail::require_coarsenable(pmd.size());
    const double spacing = pmd.grid.spacing();
    Grid coarse(pmd.grid.lower() - 0.5 * spacing, 2.0 * spacing, pmd.size() / 2);
    std::vector<double> weights(coarse.count());
    for (std::size_t i = 0; i < weights.size(); ++i)
        weights[i] = pmd.weights[2 * i];
    return {std::move(coarse), std::move(weights)};
}

/// Both rule values at one target; the coarse pass reuses the fine nodes.
struct RuleValues {
    double midpoint;
    double richardson;

    [[nodiscard]] double operator[](RuleId id) const noexcept
    {
        return id == RuleId::Midpoint ? midpoint : richardson;
    }
};

inline RuleValues evaluate_rules(const PointMassDensity& pmd, const DynamicsModel& model, double target)
{
    detail::require_coarsenable(pmd.size());
    const double fine = detail::strided_midpoint(pmd, model, target, 1);
    const double coarse = detail::strided_midpoint(pmd, model, target, 2);
    return {fine, detail::extrapolate(fine, coarse)};
}

/// K1 + (K1 - K2) / 3 with K1 on the full grid and K2 on every second node.
inline double richardson_rule(const PointMassDensity& pmd, const DynamicsModel& model, double target)
{
    return evaluate_rules(pmd, model, target).richardson;
}

/// Per-target rule strategy plugged into predict_pmd.
using PointEvaluator = std::function<double(const PointMassDensity&, const DynamicsModel&, double)>;

inline PointEvaluator midpoint_evaluator() { return midpoint_rule; }
inline PointEvaluator richardson_evaluator() { return richardson_rule; }

/// Raw (unclamped, unnormalized) evaluator output at every node of grid_next.
inline std::vector<double> evaluate_on_grid(const PointMassDensity& pmd_k, const DynamicsModel& model,
                                            const Grid& grid_next, const PointEvaluator& evaluator)
{
    std::vector<double> values(grid_next.count());
    parallel_for(values.size(), [&](std::size_t j) { values[j] = evaluator(pmd_k, model, grid_next.points()[j]); });
    return values;
}

/// Predictive PMD on grid_next: evaluate, clamp negatives to zero, renormalize.
inline PointMassDensity predict_pmd(const PointMassDensity& pmd_k, const DynamicsModel& model,
                                    const Grid& grid_next, const PointEvaluator& evaluator)
{
    auto values = evaluate_on_grid(pmd_k, model, grid_next, evaluator);
    double total = 0.0;
    for (double& v : values) {
        if (!(v > 0.0))
            v = 0.0;
        total += v;
    }
    if (!(total > 0.0))
        throw DegenerateOutput("predict_pmd: every predicted node value is <= 0");
    const double scale = 1.0 / (total * grid_next.spacing());
    for (double& v : values)
        v *= scale;
    return {grid_next, std::move(values)};
}

/// Predictive grid over the exact predicted mean +- sigma * predicted std.
inline Grid grid_next_support(const GaussianSum& prior, const DynamicsModel& model, double sigma, std::size_t count)
{
    if (!model.is_linear())
        throw InvalidArgument("grid_next_support: moment propagation requires a linear model");
    const auto m = gs_moments(gs_predict_exact(prior, model.gain, model.noise_variance));
    return build_grid(m.mean + model.input.value_or(0.0), std::sqrt(m.variance), sigma, count);
}

} // namespace dapmm
