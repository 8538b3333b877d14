#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dapmm/error.hpp"

namespace dapmm {

/**
 * One-dimensional equidistant grid of N cell centres.
 *
 * Cell i (0-based) is the half-open interval [lower + i*spacing, lower + (i+1)*spacing)
 * and its node sits at the centre, lower + (i + 1/2)*spacing.
 */
class Grid {
public:
    static constexpr std::size_t min_count = 4;

    Grid(double lower, double spacing, std::size_t count) : lower_(lower), spacing_(spacing)
    {
        if (!(spacing > 0.0) || !std::isfinite(spacing) || !std::isfinite(lower))
            throw InvalidArgument("Grid: spacing must be finite and positive");
        if (count < min_count)
            throw InvalidArgument("Grid: at least 4 nodes required");
        points_.resize(count);
        for (std::size_t i = 0; i < count; ++i)
            points_[i] = lower + (static_cast<double>(i) + 0.5) * spacing;
    }

    [[nodiscard]] double lower() const noexcept { return lower_; }
    [[nodiscard]] double upper() const noexcept { return lower_ + spacing_ * static_cast<double>(count()); }
    [[nodiscard]] double spacing() const noexcept { return spacing_; }
    [[nodiscard]] std::size_t count() const noexcept { return points_.size(); }
    [[nodiscard]] const std::vector<double>& points() const noexcept { return points_; }
    [[nodiscard]] double center() const noexcept { return lower_ + 0.5 * spacing_ * static_cast<double>(count()); }
    [[nodiscard]] double half_width() const noexcept { return 0.5 * spacing_ * static_cast<double>(count()); }

    friend bool operator==(const Grid& a, const Grid& b) noexcept
    {
        return a.lower_ == b.lower_ && a.spacing_ == b.spacing_ && a.count() == b.count();
    }

private:
    double lower_;
    double spacing_;
    std::vector<double> points_;
};

/// N equal cells partitioning [mean - sigma*std, mean + sigma*std].
inline Grid build_grid(double mean, double std_dev, double sigma, std::size_t count)
{
    if (!(std_dev > 0.0))
        throw InvalidArgument("build_grid: std must be positive");
    if (!(sigma > 0.0))
        throw InvalidArgument("build_grid: sigma must be positive");
    if (count < Grid::min_count)
        throw InvalidArgument("build_grid: count must be >= 4");
    const double half = sigma * std_dev;
    return {mean - half, 2.0 * half / static_cast<double>(count), count};
}

/// Piece-wise constant density: weights[i] is the density value on cell i.
struct PointMassDensity {
    Grid grid;
    std::vector<double> weights;

    PointMassDensity(Grid g, std::vector<double> w) : grid(std::move(g)), weights(std::move(w))
    {
        if (weights.size() != grid.count())
            throw DimensionMismatch("PointMassDensity: weight count differs from grid size");
    }

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }

    /// Sum of weights times the cell volume.
    [[nodiscard]] double mass() const noexcept
    {
        double s = 0.0;
        for (double w : weights)
            s += w;
        return s * grid.spacing();
    }
};

/// Samples `pdf` on the nodes and rescales so the PMD integrates to one.
template <typename Pdf>
PointMassDensity pmd_from_pdf(Pdf&& pdf, const Grid& grid)
{
    std::vector<double> weights(grid.count());
    double total = 0.0;
    for (std::size_t i = 0; i < grid.count(); ++i) {
        const double v = pdf(grid.points()[i]);
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidArgument("pmd_from_pdf: density must be finite and nonnegative on the grid");
        weights[i] = v;
        total += v;
    }
    if (!(total > 0.0))
        throw DegenerateInput("pmd_from_pdf: density vanishes on every grid node");
    const double scale = 1.0 / (total * grid.spacing());
    for (double& w : weights)
        w *= scale;
    return {grid, std::move(weights)};
}

/// Value of the cell containing x; cells are [lo, hi). Zero outside the grid support.
inline double pmd_eval(const PointMassDensity& pmd, double x) noexcept
{
    const double offset = (x - pmd.grid.lower()) / pmd.grid.spacing();
    if (!(offset >= 0.0))
        return 0.0;
    const auto cell = static_cast<std::size_t>(std::floor(offset));
    return cell < pmd.size() ? pmd.weights[cell] : 0.0;
}

inline void to_json(nlohmann::json& j, const PointMassDensity& pmd)
{
    j = nlohmann::json{
        {"grid", {{"lower", pmd.grid.lower()}, {"spacing", pmd.grid.spacing()}, {"count", pmd.grid.count()}}},
        {"weights", pmd.weights}};
}

inline PointMassDensity pmd_from_json(const nlohmann::json& j)
{
    try {
        const auto& g = j.at("grid");
        Grid grid(g.at("lower").get<double>(), g.at("spacing").get<double>(), g.at("count").get<std::size_t>());
        return {std::move(grid), j.at("weights").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("PointMassDensity JSON: ") + e.what());
    }
}

} // namespace dapmm
