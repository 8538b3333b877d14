#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dapmm/error.hpp"
#include "dapmm/numeric.hpp"
#include "dapmm/rules.hpp"

namespace dapmm {

inline double rmse(std::span<const double> errors)
{
    if (errors.empty())
        throw EmptyInput("rmse: no errors");
    std::vector<double> sq(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i)
        sq[i] = errors[i] * errors[i];
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
}

struct MareResult {
    double value;
    std::size_t excluded;
};

/// Truths below this magnitude are dropped from the MARE and counted in `excluded`.
inline constexpr double mare_truth_floor = 1e-300;

inline MareResult mare(std::span<const double> errors, std::span<const double> truths)
{
    if (errors.size() != truths.size())
        throw DimensionMismatch("mare: errors and truths differ in length");
    std::vector<double> rel;
    rel.reserve(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (std::abs(truths[i]) >= mare_truth_floor)
            rel.push_back(std::abs(errors[i] / truths[i]));
    if (rel.empty())
        throw EmptyInput("mare: no samples left after excluding zero truths");
    return {pairwise_sum(rel) / static_cast<double>(rel.size()), errors.size() - rel.size()};
}

/// Per-sample wins of A and B by smaller absolute error; ties are credited to A.
inline std::pair<std::size_t, std::size_t> superiority(std::span<const double> err_a, std::span<const double> err_b)
{
    if (err_a.size() != err_b.size())
        throw DimensionMismatch("superiority: lists differ in length");
    std::size_t a = 0;
    for (std::size_t i = 0; i < err_a.size(); ++i)
        if (std::abs(err_a[i]) <= std::abs(err_b[i]))
            ++a;
    return {a, err_a.size() - a};
}

inline double accuracy(std::span<const RuleId> chosen, std::span<const RuleId> oracle_best)
{
    if (chosen.size() != oracle_best.size())
        throw DimensionMismatch("accuracy: lists differ in length");
    if (chosen.empty())
        throw EmptyInput("accuracy: empty lists");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < chosen.size(); ++i)
        hits += chosen[i] == oracle_best[i];
    return static_cast<double>(hits) / static_cast<double>(chosen.size());
}

/// Error summary of one rule (or rule-selection strategy) over a sample set.
struct RuleScore {
    double rmse = 0.0;
    double mare = 0.0;
};

struct EvalReport {
    std::size_t samples = 0;
    RuleScore midpoint;
    RuleScore richardson;
    RuleScore best;
    std::optional<RuleScore> selective;
    std::size_t superiority_midpoint = 0;
    std::size_t superiority_richardson = 0;
    std::optional<double> selection_accuracy;
    std::size_t mare_excluded = 0;
};

inline void to_json(nlohmann::json& j, const RuleScore& s) { j = nlohmann::json{{"rmse", s.rmse}, {"mare", s.mare}}; }

inline void to_json(nlohmann::json& j, const EvalReport& r)
{
    j = nlohmann::json{{"samples", r.samples},
                       {"midpoint", r.midpoint},
                       {"richardson", r.richardson},
                       {"best_selective", r.best},
                       {"superiority", {{"midpoint", r.superiority_midpoint}, {"richardson", r.superiority_richardson}}},
                       {"mare_excluded", r.mare_excluded}};
    if (r.selective)
        j["selective"] = *r.selective;
    if (r.selection_accuracy)
        j["selection_accuracy"] = *r.selection_accuracy;
}

/// Aligned text table with the row layout RMSE x1e-3 / MARE [%] / Superiority / Accuracy.
inline std::string format_table(const EvalReport& r)
{
    std::string out;
    char line[160];
    const bool sel = r.selective.has_value();
    std::snprintf(line, sizeof line, "%-16s %12s %12s %12s%s\n", "", "Midpoint", "Richardson", "Best sel.",
                  sel ? "  Selective IR" : "");
    out += line;
    std::snprintf(line, sizeof line, "%-16s %12.3f %12.3f %12.3f", "RMSE x1e-3", r.midpoint.rmse * 1e3,
                  r.richardson.rmse * 1e3, r.best.rmse * 1e3);
    out += line;
    if (sel) {
        std::snprintf(line, sizeof line, " %13.3f", r.selective->rmse * 1e3);
        out += line;
    }
    out += '\n';
    std::snprintf(line, sizeof line, "%-16s %12.2f %12.2f %12.2f", "MARE [%]", r.midpoint.mare * 100,
                  r.richardson.mare * 100, r.best.mare * 100);
    out += line;
    if (sel) {
        std::snprintf(line, sizeof line, " %13.2f", r.selective->mare * 100);
        out += line;
    }
    out += '\n';
    std::snprintf(line, sizeof line, "%-16s %12zu %12zu %12s\n", "Superiority", r.superiority_midpoint,
                  r.superiority_richardson, "--");
    out += line;
    if (r.selection_accuracy) {
        std::snprintf(line, sizeof line, "%-16s %12s %12s %12.1f %13.1f\n", "Accuracy [%]", "", "", 100.0,
                      *r.selection_accuracy * 100);
        out += line;
    }
    std::snprintf(line, sizeof line, "(M = %zu samples", r.samples);
    out += line;
    if (r.mare_excluded) {
        std::snprintf(line, sizeof line, ", %zu excluded from MARE", r.mare_excluded);
        out += line;
    }
    out += ")\n";
    return out;
}

} // namespace dapmm
