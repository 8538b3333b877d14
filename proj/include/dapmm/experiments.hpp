#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dapmm/datagen.hpp"
#include "dapmm/metrics.hpp"
#include "dapmm/nn.hpp"
#include "dapmm/parallel.hpp"
#include "dapmm/selector.hpp"

namespace dapmm {

/// Independent master seed for one purpose (training data, evaluation data, ...).
enum class SeedPurpose : std::uint64_t { TrainData = 11, EvalData = 12, Split = 13, Init = 14, Shuffle = 15 };

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose) noexcept
{
    return stream_seed(master ^ 0xA0761D6478BD642FULL, static_cast<std::uint64_t>(purpose));
}

/// Rules chosen by `model` for each sample.
inline std::vector<RuleId> choose_rules(std::span<const Sample> samples, const Mlp& model)
{
    std::vector<RuleId> chosen(samples.size());
    parallel_for(samples.size(),
                 [&](std::size_t i) { chosen[i] = select_rule(estimate_errors(model, samples[i].features)); });
    return chosen;
}

/// RMSE/MARE per rule, oracle best selection, superiority and, with a model, the
/// selective rule and its selection accuracy.
inline EvalReport evaluate(std::span<const Sample> samples, const Mlp* model = nullptr)
{
    if (samples.empty())
        throw EmptyInput("evaluate: no samples");
    const std::size_t n = samples.size();
    std::vector<double> em(n), er(n), eb(n), truth(n);
    std::vector<RuleId> oracle(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = samples[i];
        em[i] = s.err_mid;
        er[i] = s.err_rich;
        oracle[i] = s.best_rule();
        eb[i] = s.error(oracle[i]);
        truth[i] = s.truth;
    }
    EvalReport r;
    r.samples = n;
    const auto score = [&](const std::vector<double>& e) {
        const auto m = mare(e, truth);
        r.mare_excluded = m.excluded;
        return RuleScore{rmse(e), m.value};
    };
    r.midpoint = score(em);
    r.richardson = score(er);
    r.best = score(eb);
    std::tie(r.superiority_midpoint, r.superiority_richardson) = superiority(em, er);
    if (model) {
        const auto chosen = choose_rules(samples, *model);
        std::vector<double> es(n);
        for (std::size_t i = 0; i < n; ++i)
            es[i] = samples[i].error(chosen[i]);
        r.selective = score(es);
        r.selection_accuracy = accuracy(chosen, oracle);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Error-estimator training pipeline

struct EstimatorConfig {
    double beta = 1e-2;
    std::size_t preselected = 250000;
    std::uint64_t max_scenarios = 20000000;
    double train_fraction = 0.8;
    std::vector<std::size_t> hidden{128, 64};
    Head head = Head::Regression;
    bool tanh_output = true;
    TrainConfig train;
};

struct EstimatorResult {
    Mlp model;
    TrainReport report;
    std::size_t train_count = 0;
    std::size_t validation_count = 0;
    std::uint64_t scenarios_generated = 0;
    double retention = 0.0;
    /// Validation loss of a network whose outputs are identically zero.
    double zero_output_validation_loss = 0.0;
};

/// Per-output max |error| over the training split; maps targets into tanh range.
inline std::vector<double> error_scale(std::span<const Sample> train)
{
    std::vector<double> scale(rule_count, 0.0);
    for (const auto& s : train) {
        scale[0] = std::max(scale[0], std::abs(s.err_mid));
        scale[1] = std::max(scale[1], std::abs(s.err_rich));
    }
    for (double& v : scale)
        if (!(v > 0.0))
            v = 1.0;
    return scale;
}

/// Standardized inputs and head-specific targets using the statistics stored in `model`.
inline TrainingSet make_training_set(std::span<const Sample> samples, const Mlp& model)
{
    const auto in = static_cast<Eigen::Index>(model.input_size());
    TrainingSet set{Eigen::MatrixXd(in, static_cast<Eigen::Index>(samples.size())),
                    Eigen::MatrixXd(static_cast<Eigen::Index>(rule_count), static_cast<Eigen::Index>(samples.size()))};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        const auto& s = samples[i];
        if (s.features.size() != model.input_size())
            throw DimensionMismatch("make_training_set: sample feature count differs from network input");
        for (Eigen::Index k = 0; k < in; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            set.inputs(k, c) = (s.features[ku] - model.feature_stats.mean[ku]) / model.feature_stats.std[ku];
        }
        if (model.head == Head::Regression) {
            set.targets(0, c) = s.err_mid / model.target_scale[0];
            set.targets(1, c) = s.err_rich / model.target_scale[1];
        } else {
            const bool rich = s.best_rule() == RuleId::Richardson;
            set.targets(0, c) = rich ? 0.0 : 1.0;
            set.targets(1, c) = rich ? 1.0 : 0.0;
        }
    }
    return set;
}

/// Fits feature statistics and target scale on `train`, then trains the network with
/// `validation` driving early stopping.
inline EstimatorResult fit_error_estimator(std::span<const Sample> train_split, std::span<const Sample> validation,
                                           const EstimatorConfig& cfg)
{
    if (train_split.empty())
        throw EmptyInput("fit_error_estimator: empty training split");
    std::vector<std::size_t> dims{train_split.front().features.size()};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(rule_count);

    Mlp init = mlp_init(dims, cfg.head, derive_seed(cfg.train.seed, SeedPurpose::Init));
    init.tanh_output = cfg.tanh_output;
    {
        std::vector<FeatureVector> rows;
        rows.reserve(train_split.size());
        for (const auto& s : train_split)
            rows.push_back(s.features);
        init.feature_stats = FeatureStats::estimate(rows);
    }
    init.target_scale = cfg.head == Head::Regression ? error_scale(train_split) : std::vector<double>(rule_count, 1.0);

    const auto train_set = make_training_set(train_split, init);
    const auto val_set = make_training_set(validation, init);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, SeedPurpose::Shuffle);
    auto fitted = train(std::move(init), train_set, val_set, tc);
    EstimatorResult result;
    result.model = std::move(fitted.model);
    result.report = std::move(fitted.report);
    result.train_count = train_split.size();
    result.validation_count = validation.size();
    if (val_set.size() > 0) {
        const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(val_set.targets.rows(), val_set.targets.cols());
        result.zero_output_validation_loss = batch_loss(zeros, val_set.targets, loss_for(cfg.head));
    }
    return result;
}

/// Generates pre-selected data, splits it and trains the estimator.
inline EstimatorResult build_error_estimator(const ScenarioConfig& scenario, const EstimatorConfig& cfg,
                                             std::uint64_t seed)
{
    auto data = generate_preselected(derive_seed(seed, SeedPurpose::TrainData), scenario, cfg.beta, cfg.preselected,
                                     cfg.max_scenarios);
    if (data.samples.empty())
        throw EmptyInput("build_error_estimator: pre-selection kept no samples");
    const auto retention = data.retention();
    const auto scenarios = data.scenarios_generated;
    auto [tr, va] = split(std::move(data.samples), cfg.train_fraction, derive_seed(seed, SeedPurpose::Split));
    auto result = fit_error_estimator(tr, va, cfg);
    result.retention = retention;
    result.scenarios_generated = scenarios;
    return result;
}

// ---------------------------------------------------------------------------
// Reproduction runs and their pass/fail thresholds

struct Check {
    std::string name;
    double value;
    std::string expected;
    bool pass;
};

inline void to_json(nlohmann::json& j, const Check& c)
{
    j = nlohmann::json{{"name", c.name}, {"value", c.value}, {"expected", c.expected}, {"pass", c.pass}};
}

inline bool all_pass(std::span<const Check> checks)
{
    for (const auto& c : checks)
        if (!c.pass)
            return false;
    return true;
}

namespace detail {

template <typename... Args>
std::string fmt(const char* f, Args... args)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

inline Check relative_band(std::string name, double value, double reference, double rel)
{
    return {std::move(name), value, fmt("%.4g +- %.0f%%", reference, rel * 100),
            std::abs(value - reference) <= rel * reference};
}

inline Check absolute_band(std::string name, double value, double reference, double tol)
{
    return {std::move(name), value, fmt("%.4g +- %.4g", reference, tol), std::abs(value - reference) <= tol};
}

inline Check at_most(std::string name, double value, double limit)
{
    return {std::move(name), value, fmt("<= %.4g", limit), value <= limit};
}

inline Check at_least(std::string name, double value, double limit)
{
    return {std::move(name), value, fmt(">= %.4g", limit), value >= limit};
}

} // namespace detail

/// Accuracy of the baseline rules at the central node (M random priors).
inline EvalReport run_table1(ScenarioConfig cfg, std::uint64_t seed)
{
    cfg.target_mode = TargetMode::Fixed;
    const auto samples = generate_samples(derive_seed(seed, SeedPurpose::EvalData), 0, cfg.samples, cfg);
    return evaluate(samples);
}

inline std::vector<Check> table1_checks(const EvalReport& r)
{
    using namespace detail;
    const double share = static_cast<double>(r.superiority_midpoint) / static_cast<double>(r.samples);
    return {relative_band("table1.midpoint.rmse", r.midpoint.rmse, 6.61e-3, 0.15),
            relative_band("table1.richardson.rmse", r.richardson.rmse, 13.7e-3, 0.20),
            relative_band("table1.best.rmse", r.best.rmse, 4.85e-3, 0.15),
            absolute_band("table1.midpoint.mare", r.midpoint.mare, 0.061, 0.015),
            absolute_band("table1.richardson.mare", r.richardson.mare, 0.193, 0.015),
            absolute_band("table1.best.mare", r.best.mare, 0.049, 0.015),
            absolute_band("table1.midpoint.superiority_share", share, 0.768, 0.03)};
}

/// Selective rule on freshly generated (not pre-selected) observations.
inline EvalReport run_table2(const Mlp& model, ScenarioConfig cfg, std::size_t observations, std::uint64_t seed)
{
    cfg.target_mode = TargetMode::Fixed;
    const auto samples = generate_samples(derive_seed(seed, SeedPurpose::EvalData), 0, observations, cfg);
    return evaluate(samples, &model);
}

inline std::vector<Check> table2_checks(const EvalReport& r)
{
    using namespace detail;
    if (!r.selective || !r.selection_accuracy)
        throw InvalidArgument("table2_checks: report has no selective results");
    const double sel = r.selective->rmse;
    return {at_least("table2.selection_accuracy", *r.selection_accuracy, 0.93),
            at_most("table2.selective.rmse", sel, 5.5e-3),
            {"table2.selective.rmse_between_best_and_midpoint", sel,
             fmt("in (%.4g, %.4g)", r.best.rmse, r.midpoint.rmse), r.best.rmse < sel && sel < r.midpoint.rmse},
            at_most("table2.selective.mare", r.selective->mare, 0.056)};
}

/// Whole-grid errors: every node of the predictive grid for `scenarios` random priors.
inline EvalReport run_grid_mare(const Mlp& model, ScenarioConfig cfg, std::size_t scenarios, std::uint64_t seed)
{
    cfg.target_mode = TargetMode::AllIndices;
    const auto samples = generate_samples(derive_seed(seed, SeedPurpose::EvalData), 0, scenarios, cfg);
    return evaluate(samples, &model);
}

inline std::vector<Check> grid_mare_checks(const EvalReport& r)
{
    using namespace detail;
    if (!r.selective)
        throw InvalidArgument("grid_mare_checks: report has no selective results");
    return {absolute_band("grid.midpoint.mare", r.midpoint.mare, 0.162, 0.03),
            at_most("grid.selective.mare", r.selective->mare, 0.09),
            {"grid.selective.mare_below_midpoint", r.selective->mare, fmt("< %.4g", r.midpoint.mare),
             r.selective->mare < r.midpoint.mare}};
}

} // namespace dapmm
