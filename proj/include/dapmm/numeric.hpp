#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

namespace dapmm {

/// N(x; mean, variance).
inline double normal_pdf(double x, double mean, double variance) noexcept
{
    const double d = x - mean;
    return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

/// Pairwise (cascade) summation; rounding error grows as O(log n).
inline double pairwise_sum(std::span<const double> values) noexcept
{
    constexpr std::size_t base = 32;
    if (values.size() <= base) {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace dapmm
