#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dapmm/error.hpp"
#include "dapmm/features.hpp"
#include "dapmm/random.hpp"

namespace dapmm {

enum class Head { Regression, Classification };
enum class LossKind { MeanSquared, SoftmaxCrossEntropy };

constexpr LossKind loss_for(Head head) noexcept
{
    return head == Head::Regression ? LossKind::MeanSquared : LossKind::SoftmaxCrossEntropy;
}

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
};

/// Per-layer parameter-shaped buffers (gradients, momentum velocity).
using LayerBuffers = std::vector<DenseLayer>;

/**
 * Fully connected network with tanh activations.
 *
 * Besides the parameters, the model carries what inference needs to map raw
 * features to error estimates: the input standardization statistics and, for the
 * regression head, a per-output scale that maps tanh outputs back to error units.
 */
struct Mlp {
    std::vector<std::size_t> dims;
    std::vector<DenseLayer> layers;
    Head head = Head::Regression;
    bool tanh_output = true;
    FeatureStats feature_stats;
    std::vector<double> target_scale;

    [[nodiscard]] std::size_t input_size() const noexcept { return dims.front(); }
    [[nodiscard]] std::size_t output_size() const noexcept { return dims.back(); }

    [[nodiscard]] std::size_t param_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& l : layers)
            n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }
};

inline std::size_t param_count(std::span<const std::size_t> dims) noexcept
{
    std::size_t n = 0;
    for (std::size_t i = 1; i < dims.size(); ++i)
        n += dims[i - 1] * dims[i] + dims[i];
    return n;
}

inline LayerBuffers zeros_like(const Mlp& mlp)
{
    LayerBuffers out;
    out.reserve(mlp.layers.size());
    for (const auto& l : mlp.layers)
        out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    return out;
}

/// Glorot-uniform weights, zero biases. Identity feature stats and unit target scale.
inline Mlp mlp_init(std::vector<std::size_t> dims, Head head, std::uint64_t seed)
{
    if (dims.size() < 2)
        throw InvalidArgument("mlp_init: need at least an input and an output size");
    for (auto d : dims)
        if (d == 0)
            throw InvalidArgument("mlp_init: layer sizes must be positive");
    Mlp mlp;
    mlp.dims = std::move(dims);
    mlp.head = head;
    Rng rng(stream_seed(seed, 0));
    for (std::size_t l = 1; l < mlp.dims.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(mlp.dims[l - 1]);
        const auto out = static_cast<Eigen::Index>(mlp.dims[l]);
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c)
                layer.weight(r, c) = dist(rng);
        mlp.layers.push_back(std::move(layer));
    }
    mlp.feature_stats = FeatureStats::identity(mlp.input_size());
    mlp.target_scale.assign(mlp.output_size(), 1.0);
    return mlp;
}

/// Activations a_0 (input) .. a_L (output); one column per sample.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;

    [[nodiscard]] const Eigen::MatrixXd& output() const { return activations.back(); }
};

/// z_l = W_l a_{l-1} + b_l, a_l = tanh(z_l); the last layer is linear when tanh_output is off.
inline ForwardCache mlp_forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs)
{
    if (static_cast<std::size_t>(inputs.rows()) != mlp.input_size())
        throw DimensionMismatch("mlp_forward: input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                                std::to_string(mlp.input_size()));
    ForwardCache cache;
    cache.activations.reserve(mlp.layers.size() + 1);
    cache.activations.push_back(inputs);
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        const auto& layer = mlp.layers[l];
        Eigen::MatrixXd z = layer.weight * cache.activations.back();
        z.colwise() += layer.bias;
        const bool last = l + 1 == mlp.layers.size();
        if (!last || mlp.tanh_output)
            z = z.array().tanh().matrix();
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

struct ForwardResult {
    std::vector<double> output;
    ForwardCache cache;
};

/// Single standardized input vector.
inline ForwardResult mlp_forward(const Mlp& mlp, std::span<const double> x)
{
    Eigen::MatrixXd in(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i)
        in(static_cast<Eigen::Index>(i), 0) = x[i];
    ForwardResult r{{}, mlp_forward_batch(mlp, in)};
    const auto& out = r.cache.output();
    r.output.assign(out.data(), out.data() + out.size());
    return r;
}

/// Column-wise softmax.
inline Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits)
{
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double peak = logits.col(c).maxCoeff();
        p.col(c) = (logits.col(c).array() - peak).exp().matrix();
        p.col(c) /= p.col(c).sum();
    }
    return p;
}

/// Mean batch loss. MSE averages over samples and outputs; cross-entropy takes one-hot
/// target columns and averages over samples.
inline double batch_loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& targets, LossKind kind)
{
    const auto batch = static_cast<double>(output.cols());
    if (kind == LossKind::MeanSquared)
        return (output - targets).squaredNorm() / (batch * static_cast<double>(output.rows()));
    const Eigen::MatrixXd p = softmax(output);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c)
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            if (targets(r, c) != 0.0)
                loss -= targets(r, c) * std::log(std::max(p(r, c), std::numeric_limits<double>::min()));
    return loss / batch;
}

struct BackwardResult {
    LayerBuffers gradients;
    double loss;
};

/// Exact gradients of the mean batch loss with respect to every weight and bias.
inline BackwardResult mlp_backward(const Mlp& mlp, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                   LossKind kind)
{
    if (inputs.cols() == 0)
        throw EmptyInput("mlp_backward: empty batch");
    if (targets.cols() != inputs.cols() || static_cast<std::size_t>(targets.rows()) != mlp.output_size())
        throw DimensionMismatch("mlp_backward: target shape does not match the batch");
    const auto cache = mlp_forward_batch(mlp, inputs);
    const Eigen::MatrixXd& out = cache.output();
    const auto batch = static_cast<double>(inputs.cols());

    BackwardResult result{LayerBuffers(mlp.layers.size()), batch_loss(out, targets, kind)};

    // dL/da_L
    Eigen::MatrixXd delta;
    if (kind == LossKind::MeanSquared)
        delta = 2.0 * (out - targets) / (batch * static_cast<double>(out.rows()));
    else
        delta = (softmax(out) - targets) / batch;

    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        const auto& a = cache.activations[l + 1];
        const bool last = l + 1 == mlp.layers.size();
        if (!last || mlp.tanh_output)
            delta = (delta.array() * (1.0 - a.array().square())).matrix();
        auto& g = result.gradients[l];
        g.weight = delta * cache.activations[l].transpose();
        g.bias = delta.rowwise().sum();
        if (l > 0)
            delta = mlp.layers[l].weight.transpose() * delta;
    }
    return result;
}

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (!(learning_rate >= 0.0))
            throw InvalidArgument("TrainConfig: learning_rate must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw InvalidArgument("TrainConfig: momentum must lie in [0, 1)");
        if (batch_size == 0)
            throw InvalidArgument("TrainConfig: batch_size must be >= 1");
    }
};

/// v <- momentum*v - lr*g; theta <- theta + v.
inline void sgdm_step(Mlp& mlp, const LayerBuffers& grads, LayerBuffers& velocity, const TrainConfig& cfg)
{
    if (grads.size() != mlp.layers.size() || velocity.size() != mlp.layers.size())
        throw DimensionMismatch("sgdm_step: buffer shapes do not match the network");
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        velocity[l].weight = cfg.momentum * velocity[l].weight - cfg.learning_rate * grads[l].weight;
        velocity[l].bias = cfg.momentum * velocity[l].bias - cfg.learning_rate * grads[l].bias;
        mlp.layers[l].weight += velocity[l].weight;
        mlp.layers[l].bias += velocity[l].bias;
    }
}

/// Standardized inputs and targets, one column per sample.
struct TrainingSet {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(inputs.cols()); }
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    std::size_t final_epoch = 0;
    std::size_t best_epoch = 0;
    double wall_seconds = 0.0;

    /// Everything except wall-clock time.
    [[nodiscard]] bool same_trajectory(const TrainReport& o) const
    {
        return train_loss == o.train_loss && validation_loss == o.validation_loss && final_epoch == o.final_epoch &&
               best_epoch == o.best_epoch;
    }
};

struct TrainResult {
    Mlp model;
    TrainReport report;
};

inline double evaluate_loss(const Mlp& mlp, const TrainingSet& data, std::size_t chunk = 4096)
{
    const auto kind = loss_for(mlp.head);
    double total = 0.0;
    for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
        const auto n = static_cast<Eigen::Index>(std::min(chunk, data.size() - begin));
        const auto b = static_cast<Eigen::Index>(begin);
        const auto cache = mlp_forward_batch(mlp, data.inputs.middleCols(b, n));
        total += batch_loss(cache.output(), data.targets.middleCols(b, n), kind) * static_cast<double>(n);
    }
    return total / static_cast<double>(data.size());
}

/**
 * Mini-batch SGDM with a seeded per-epoch shuffle and early stopping on the
 * validation loss (training loss when no validation set is given). Returns the
 * parameters of the best validation epoch. Single-threaded and fully
 * deterministic for a given seed.
 */
inline TrainResult train(Mlp model, const TrainingSet& data, const TrainingSet& validation, const TrainConfig& cfg)
{
    cfg.validate();
    if (data.size() == 0)
        throw EmptyInput("train: empty dataset");
    const auto start = std::chrono::steady_clock::now();
    const auto kind = loss_for(model.head);
    const bool has_validation = validation.size() > 0;

    Rng rng(stream_seed(cfg.seed, 1));
    std::vector<Eigen::Index> order(data.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    LayerBuffers velocity = zeros_like(model);

    TrainResult best{model, {}};
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    Eigen::MatrixXd xb, tb;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - begin);
            xb.resize(data.inputs.rows(), static_cast<Eigen::Index>(n));
            tb.resize(data.targets.rows(), static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                xb.col(static_cast<Eigen::Index>(i)) = data.inputs.col(order[begin + i]);
                tb.col(static_cast<Eigen::Index>(i)) = data.targets.col(order[begin + i]);
            }
            auto step = mlp_backward(model, xb, tb, kind);
            epoch_loss += step.loss * static_cast<double>(n);
            sgdm_step(model, step.gradients, velocity, cfg);
        }
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch));
        best.report.train_loss.push_back(epoch_loss);
        const double monitored = has_validation ? evaluate_loss(model, validation) : epoch_loss;
        if (has_validation)
            best.report.validation_loss.push_back(monitored);
        best.report.final_epoch = epoch;

        if (monitored < best_loss) {
            best_loss = monitored;
            best.model = model;
            best.report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    best.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return best;
}

// ---------------------------------------------------------------------------
// Inference on raw features

/// Regression head: error estimates in density units. Classification head: 1 - p(class),
/// so that the smallest entry is the most probable best rule in both cases.
inline std::vector<double> estimate_errors(const Mlp& mlp, std::span<const double> raw_features)
{
    const auto z = standardize(raw_features, mlp.feature_stats);
    auto out = mlp_forward(mlp, z).output;
    if (mlp.head == Head::Regression) {
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] *= mlp.target_scale[k];
        return out;
    }
    Eigen::MatrixXd logits = Eigen::Map<Eigen::MatrixXd>(out.data(), static_cast<Eigen::Index>(out.size()), 1);
    const Eigen::MatrixXd p = softmax(logits);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = 1.0 - p(static_cast<Eigen::Index>(k), 0);
    return out;
}

// ---------------------------------------------------------------------------
// Model file

inline constexpr int model_format_version = 1;
inline constexpr const char* model_format_name = "dapmm-mlp";

inline nlohmann::json model_to_json(const Mlp& mlp)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : mlp.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                w.push_back(l.weight(r, c));
        layers.push_back({{"weight", w}, {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return {{"format", model_format_name},
            {"version", model_format_version},
            {"dims", mlp.dims},
            {"head", mlp.head == Head::Regression ? "regression" : "classification"},
            {"output_activation", mlp.tanh_output ? "tanh" : "linear"},
            {"layers", layers},
            {"feature_stats", mlp.feature_stats},
            {"target_scale", mlp.target_scale}};
}

inline Mlp model_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format").get<std::string>() != model_format_name)
            throw MalformedFile("model file: unexpected format tag");
        const int version = j.at("version").get<int>();
        if (version != model_format_version)
            throw VersionMismatch("model file: version " + std::to_string(version) + ", expected " +
                                  std::to_string(model_format_version));
        Mlp mlp;
        mlp.dims = j.at("dims").get<std::vector<std::size_t>>();
        const auto head = j.at("head").get<std::string>();
        if (head != "regression" && head != "classification")
            throw MalformedFile("model file: unknown head '" + head + "'");
        mlp.head = head == "regression" ? Head::Regression : Head::Classification;
        mlp.tanh_output = j.at("output_activation").get<std::string>() == "tanh";
        const auto& layers = j.at("layers");
        if (mlp.dims.size() < 2 || layers.size() != mlp.dims.size() - 1)
            throw MalformedFile("model file: layer count does not match dims");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto in = static_cast<Eigen::Index>(mlp.dims[l]);
            const auto out = static_cast<Eigen::Index>(mlp.dims[l + 1]);
            const auto w = layers[l].at("weight").get<std::vector<double>>();
            const auto b = layers[l].at("bias").get<std::vector<double>>();
            if (w.size() != static_cast<std::size_t>(in * out) || b.size() != static_cast<std::size_t>(out))
                throw MalformedFile("model file: parameter array size mismatch in layer " + std::to_string(l));
            DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
            for (Eigen::Index r = 0; r < out; ++r)
                for (Eigen::Index c = 0; c < in; ++c)
                    layer.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
            for (Eigen::Index r = 0; r < out; ++r)
                layer.bias(r) = b[static_cast<std::size_t>(r)];
            mlp.layers.push_back(std::move(layer));
        }
        j.at("feature_stats").get_to(mlp.feature_stats);
        mlp.target_scale = j.at("target_scale").get<std::vector<double>>();
        if (mlp.feature_stats.size() != mlp.input_size() || mlp.target_scale.size() != mlp.output_size())
            throw MalformedFile("model file: feature_stats/target_scale sizes do not match dims");
        return mlp;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("model file: ") + e.what());
    }
}

inline void save_model(const Mlp& mlp, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("save_model: cannot open '" + path.string() + "' for writing");
    out << model_to_json(mlp).dump() << '\n';
    if (!out)
        throw IoError("save_model: write failed for '" + path.string() + "'");
}

inline Mlp load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("load_model: cannot open '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedFile("load_model: '" + path.string() + "': " + e.what());
    }
    return model_from_json(j);
}

} // namespace dapmm
