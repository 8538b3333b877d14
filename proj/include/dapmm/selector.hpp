#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "dapmm/error.hpp"
#include "dapmm/features.hpp"
#include "dapmm/nn.hpp"
#include "dapmm/rules.hpp"

namespace dapmm {

struct Selection {
    RuleId chosen;
    double estimate_midpoint;
    double estimate_richardson;
    double value;
};

/// Rule with the smallest absolute estimated error; ties go to the midpoint rule.
inline RuleId select_rule(std::span<const double> estimates)
{
    if (estimates.size() != rule_count)
        throw DimensionMismatch("select_rule: expected one estimate per rule");
    return std::abs(estimates[1]) < std::abs(estimates[0]) ? RuleId::Richardson : RuleId::Midpoint;
}

/// Selection from precomputed rule values and raw features.
inline Selection select_from(const RuleValues& values, std::span<const double> raw_features, const Mlp& mlp)
{
    const auto est = estimate_errors(mlp, raw_features);
    const RuleId chosen = select_rule(est);
    return {chosen, est[0], est[1], values[chosen]};
}

/// Evaluates both rules, estimates their errors with the network and returns the
/// value of the rule with the smaller estimated error.
inline Selection selective_integrate(const PointMassDensity& pmd, const DynamicsModel& model, double target,
                                     const Mlp& mlp)
{
    if (analytical_feature_count(pmd.size()) != mlp.input_size())
        throw DimensionMismatch("selective_integrate: network expects " + std::to_string(mlp.input_size()) +
                                " features, PMD has " + std::to_string(pmd.size()) + " nodes");
    const auto values = evaluate_rules(pmd, model, target);
    const auto features = extract_features(pmd, target);
    return select_from(values, features, mlp);
}

/// Rule value corrected by an error estimate, clamped at zero.
inline double compensate(double rule_value, double estimate) noexcept
{
    const double v = rule_value + estimate;
    return v > 0.0 ? v : 0.0;
}

/// PointEvaluator running selective_integrate; the model is captured by reference.
inline PointEvaluator selective_evaluator(const Mlp& mlp)
{
    return [&mlp](const PointMassDensity& pmd, const DynamicsModel& model, double target) {
        return selective_integrate(pmd, model, target, mlp).value;
    };
}

} // namespace dapmm
