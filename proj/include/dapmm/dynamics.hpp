#pragma once

#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "dapmm/error.hpp"
#include "dapmm/numeric.hpp"

namespace dapmm {

/**
 * Scalar state equation x' = f(x, u) + w with additive noise w.
 *
 * The default configuration is the linear map f(x) = F x with w ~ N(0, Q), which
 * is also what the closed-form oracle understands. A custom state map or noise
 * density can be plugged in; the integration rules only ever call
 * transition_density().
 */
struct DynamicsModel {
    double gain = 1.0;
    double noise_variance = 2.0;
    std::optional<double> input;
    /// Overrides x -> gain*x (+ input) when set.
    std::function<double(double)> map;
    /// Overrides the N(0, Q) noise density when set.
    std::function<double(double)> noise_pdf;

    static DynamicsModel linear(double gain, double noise_variance)
    {
        if (!(noise_variance > 0.0))
            throw InvalidArgument("DynamicsModel: noise variance must be positive");
        DynamicsModel m;
        m.gain = gain;
        m.noise_variance = noise_variance;
        return m;
    }

    [[nodiscard]] bool is_linear() const noexcept { return !map; }

    [[nodiscard]] double apply(double x) const
    {
        if (map)
            return map(x);
        return gain * x + input.value_or(0.0);
    }
};

/// p(x_next | x) = p_w(x_next - f(x)).
inline double transition_density(const DynamicsModel& model, double x_next, double x)
{
    const double residual = x_next - model.apply(x);
    if (model.noise_pdf)
        return model.noise_pdf(residual);
    return normal_pdf(residual, 0.0, model.noise_variance);
}

inline void to_json(nlohmann::json& j, const DynamicsModel& m)
{
    j = nlohmann::json{{"F", m.gain}, {"Q", m.noise_variance}};
    if (m.input)
        j["u"] = *m.input;
}

inline DynamicsModel dynamics_from_json(const nlohmann::json& j)
{
    try {
        auto m = DynamicsModel::linear(j.value("F", 1.0), j.value("Q", 2.0));
        if (j.contains("u"))
            m.input = j.at("u").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("dynamics JSON: ") + e.what());
    }
}

} // namespace dapmm
