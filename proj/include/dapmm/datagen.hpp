#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dapmm/dynamics.hpp"
#include "dapmm/error.hpp"
#include "dapmm/features.hpp"
#include "dapmm/grid.hpp"
#include "dapmm/gsum.hpp"
#include "dapmm/parallel.hpp"
#include "dapmm/random.hpp"
#include "dapmm/rules.hpp"

namespace dapmm {

enum class TargetMode { Fixed, AllIndices };

/// One Monte-Carlo experiment family: random prior, dynamics, grid layout, target node(s).
struct ScenarioConfig {
    GsRandomConfig gs;
    double gain = 1.0;
    double noise_variance = 2.0;
    std::size_t grid_count = 30;
    double sigma = 6.0;
    TargetMode target_mode = TargetMode::Fixed;
    std::size_t target_index = 15; // 1-based
    std::size_t samples = 60000;

    [[nodiscard]] DynamicsModel model() const { return DynamicsModel::linear(gain, noise_variance); }

    void validate() const
    {
        gs.validate();
        if (!(noise_variance > 0.0))
            throw InvalidArgument("ScenarioConfig: Q must be positive");
        if (grid_count < Grid::min_count)
            throw InvalidArgument("ScenarioConfig: grid count must be >= 4");
        if (!(sigma > 0.0))
            throw InvalidArgument("ScenarioConfig: sigma must be positive");
        if (target_mode == TargetMode::Fixed && (target_index < 1 || target_index > grid_count))
            throw InvalidArgument("ScenarioConfig: target index must lie in 1..N");
    }
};

/// Labelled observation: raw features plus the exact value and both rule values at one node.
struct Sample {
    FeatureVector features;
    double truth = 0.0;
    double p_mid = 0.0;
    double p_rich = 0.0;
    double err_mid = 0.0;
    double err_rich = 0.0;
    std::uint32_t target_index = 0; // 1-based
    std::uint64_t scenario = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] double value(RuleId id) const noexcept { return id == RuleId::Midpoint ? p_mid : p_rich; }
    [[nodiscard]] double error(RuleId id) const noexcept { return id == RuleId::Midpoint ? err_mid : err_rich; }

    /// Rule with the smaller true absolute error; ties go to the midpoint rule.
    [[nodiscard]] RuleId best_rule() const noexcept
    {
        return std::abs(err_rich) < std::abs(err_mid) ? RuleId::Richardson : RuleId::Midpoint;
    }

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Everything derived from one random prior.
struct Scenario {
    std::uint64_t seed;
    GaussianSum prior;
    GaussianSum predicted;
    DynamicsModel model;
    PointMassDensity pmd;
    Grid grid_next;
};

inline Scenario make_scenario(std::uint64_t master_seed, std::uint64_t index, const ScenarioConfig& cfg)
{
    const std::uint64_t seed = stream_seed(master_seed, index);
    Rng rng(seed);
    auto prior = gs_sample_random(rng, cfg.gs);
    auto model = cfg.model();
    const auto m = gs_moments(prior);
    const Grid grid = build_grid(m.mean, std::sqrt(m.variance), cfg.sigma, cfg.grid_count);
    auto pmd = pmd_from_pdf([&](double x) { return gs_eval(prior, x); }, grid);
    auto grid_next = grid_next_support(prior, model, cfg.sigma, cfg.grid_count);
    auto predicted = gs_predict_exact(prior, model.gain, model.noise_variance);
    return {seed, std::move(prior), std::move(predicted), std::move(model), std::move(pmd), std::move(grid_next)};
}

inline Sample make_sample(const Scenario& sc, std::uint64_t index, std::size_t target_index)
{
    const double target = sc.grid_next.points()[target_index - 1];
    Sample s;
    s.features = extract_features(sc.pmd, target);
    s.truth = gs_eval(sc.predicted, target);
    const auto values = evaluate_rules(sc.pmd, sc.model, target);
    s.p_mid = values.midpoint;
    s.p_rich = values.richardson;
    s.err_mid = s.truth - s.p_mid;
    s.err_rich = s.truth - s.p_rich;
    s.target_index = static_cast<std::uint32_t>(target_index);
    s.scenario = index;
    s.seed = sc.seed;
    return s;
}

/// Samples of scenario `index`: one in fixed-target mode, N in all-indices mode.
inline std::vector<Sample> generate_sample(std::uint64_t master_seed, std::uint64_t index, const ScenarioConfig& cfg)
{
    const auto sc = make_scenario(master_seed, index, cfg);
    std::vector<Sample> out;
    if (cfg.target_mode == TargetMode::Fixed) {
        out.push_back(make_sample(sc, index, cfg.target_index));
    } else {
        out.reserve(cfg.grid_count);
        for (std::size_t j = 1; j <= cfg.grid_count; ++j)
            out.push_back(make_sample(sc, index, j));
    }
    return out;
}

/// Scenarios [first, first + count) in parallel, concatenated in index order.
inline std::vector<Sample> generate_samples(std::uint64_t master_seed, std::uint64_t first, std::size_t count,
                                            const ScenarioConfig& cfg)
{
    cfg.validate();
    std::vector<std::vector<Sample>> per(count);
    parallel_for(count, [&](std::size_t i) { per[i] = generate_sample(master_seed, first + i, cfg); });
    std::vector<Sample> out;
    std::size_t total = 0;
    for (const auto& v : per)
        total += v.size();
    out.reserve(total);
    for (auto& v : per)
        std::move(v.begin(), v.end(), std::back_inserter(out));
    return out;
}

/// max(|err_mid|, |err_rich|) > beta.
inline bool is_significant(const Sample& s, double beta) noexcept
{
    return std::max(std::abs(s.err_mid), std::abs(s.err_rich)) > beta;
}

inline std::vector<Sample> preselect(std::vector<Sample> samples, double beta)
{
    if (!(beta >= 0.0))
        throw InvalidArgument("preselect: beta must be >= 0");
    std::erase_if(samples, [beta](const Sample& s) { return !is_significant(s, beta); });
    return samples;
}

struct PreselectedData {
    std::vector<Sample> samples;
    std::uint64_t scenarios_generated = 0;
    std::uint64_t samples_generated = 0;

    [[nodiscard]] double retention() const noexcept
    {
        return samples_generated ? static_cast<double>(samples.size()) / static_cast<double>(samples_generated) : 0.0;
    }
};

/**
 * Generates scenarios chunk by chunk, keeping only significant samples, until `wanted`
 * samples are retained (the last chunk's surplus is dropped) or `max_scenarios` is hit.
 * A chunk holds about `chunk_samples` raw samples. The result depends only on
 * (master_seed, cfg, beta, wanted, max_scenarios, chunk_samples).
 */
inline PreselectedData generate_preselected(std::uint64_t master_seed, const ScenarioConfig& cfg, double beta,
                                            std::size_t wanted, std::uint64_t max_scenarios,
                                            std::size_t chunk_samples = 50000)
{
    const std::size_t per_scenario = cfg.target_mode == TargetMode::Fixed ? 1 : cfg.grid_count;
    const std::size_t chunk = std::max<std::size_t>(1, chunk_samples / per_scenario);
    PreselectedData data;
    while (data.samples.size() < wanted && data.scenarios_generated < max_scenarios) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(chunk, max_scenarios - data.scenarios_generated));
        auto batch = generate_samples(master_seed, data.scenarios_generated, n, cfg);
        data.scenarios_generated += n;
        data.samples_generated += batch.size();
        for (auto& s : batch)
            if (is_significant(s, beta))
                data.samples.push_back(std::move(s));
    }
    if (data.samples.size() > wanted)
        data.samples.resize(wanted);
    return data;
}

/// Seeded shuffle, then the first round(fraction * n) samples form the training part.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split(std::vector<Sample> samples, double train_fraction,
                                                                 std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidArgument("split: train fraction must lie in (0, 1)");
    Rng rng(stream_seed(seed, 2));
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(samples.size())));
    std::vector<Sample> test(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
                             std::make_move_iterator(samples.end()));
    samples.resize(n_train);
    return {std::move(samples), std::move(test)};
}

// ---------------------------------------------------------------------------
// Dataset files

enum class DatasetFormat { Binary, Csv };

inline constexpr std::uint32_t dataset_version = 1;
inline constexpr char dataset_magic[8] = {'D', 'A', 'P', 'M', 'M', 'D', 'S', '\0'};
inline constexpr const char* csv_version_line = "# dapmm-dataset 1";

/// .csv selects CSV; anything else is binary.
inline DatasetFormat format_for(const std::filesystem::path& path)
{
    return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Binary;
}

namespace detail {

template <typename T>
void put(std::string& buf, T v)
{
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos)
{
    if (pos + sizeof(T) > buf.size())
        throw MalformedFile("dataset: unexpected end of file");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

inline std::string read_all(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_all(const std::filesystem::path& path, const std::string& data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw IoError("write failed for '" + path.string() + "'");
}

inline std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_field(std::string_view s)
{
    if constexpr (std::is_floating_point_v<T>) {
        // strtod handles inf/nan spellings that from_chars rejects on some toolchains.
        std::string tmp(s);
        char* end = nullptr;
        const double v = std::strtod(tmp.c_str(), &end);
        if (tmp.empty() || end != tmp.c_str() + tmp.size())
            throw MalformedFile("dataset CSV: bad number '" + tmp + "'");
        return v;
    } else {
        T v{};
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw MalformedFile("dataset CSV: bad integer '" + std::string(s) + "'");
        return v;
    }
}

} // namespace detail

inline std::vector<std::string> csv_header(std::size_t feature_count)
{
    std::vector<std::string> cols{"scenario", "seed", "target_index"};
    for (std::size_t i = 1; i <= feature_count; ++i)
        cols.push_back("f_" + std::to_string(i));
    for (const char* c : {"truth", "p_mid", "p_rich", "err_mid", "err_rich"})
        cols.emplace_back(c);
    return cols;
}

inline void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path,
                          DatasetFormat format)
{
    const std::size_t fc = samples.empty() ? 0 : samples.front().features.size();
    for (const auto& s : samples)
        if (s.features.size() != fc)
            throw DimensionMismatch("write_dataset: samples have differing feature counts");
    std::string buf;
    if (format == DatasetFormat::Binary) {
        buf.append(dataset_magic, sizeof dataset_magic);
        detail::put<std::uint32_t>(buf, dataset_version);
        detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(fc));
        detail::put<std::uint64_t>(buf, samples.size());
        for (const auto& s : samples) {
            detail::put(buf, s.scenario);
            detail::put(buf, s.seed);
            detail::put(buf, s.target_index);
            for (double v : {s.truth, s.p_mid, s.p_rich, s.err_mid, s.err_rich})
                detail::put(buf, v);
            for (double v : s.features)
                detail::put(buf, v);
        }
    } else {
        buf += csv_version_line;
        buf += '\n';
        const auto header = csv_header(fc);
        for (std::size_t i = 0; i < header.size(); ++i)
            buf += (i ? "," : "") + header[i];
        buf += '\n';
        for (const auto& s : samples) {
            buf += std::to_string(s.scenario) + ',' + std::to_string(s.seed) + ',' + std::to_string(s.target_index);
            for (double v : s.features)
                buf += ',' + detail::fmt_double(v);
            for (double v : {s.truth, s.p_mid, s.p_rich, s.err_mid, s.err_rich})
                buf += ',' + detail::fmt_double(v);
            buf += '\n';
        }
    }
    detail::write_all(path, buf);
}

inline void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path)
{
    write_dataset(samples, path, format_for(path));
}

inline std::vector<Sample> read_dataset(const std::filesystem::path& path, DatasetFormat format)
{
    const std::string buf = detail::read_all(path);
    std::vector<Sample> out;
    if (format == DatasetFormat::Binary) {
        if (buf.size() < sizeof dataset_magic || std::memcmp(buf.data(), dataset_magic, sizeof dataset_magic) != 0)
            throw MalformedFile("dataset '" + path.string() + "': bad magic");
        std::size_t pos = sizeof dataset_magic;
        const auto version = detail::take<std::uint32_t>(buf, pos);
        if (version != dataset_version)
            throw VersionMismatch("dataset '" + path.string() + "': version " + std::to_string(version));
        const auto fc = detail::take<std::uint32_t>(buf, pos);
        const auto count = detail::take<std::uint64_t>(buf, pos);
        const std::size_t record = 8 + 8 + 4 + 8 * (5 + static_cast<std::size_t>(fc));
        if ((buf.size() - pos) != count * record)
            throw MalformedFile("dataset '" + path.string() + "': size does not match header");
        out.resize(count);
        for (auto& s : out) {
            s.scenario = detail::take<std::uint64_t>(buf, pos);
            s.seed = detail::take<std::uint64_t>(buf, pos);
            s.target_index = detail::take<std::uint32_t>(buf, pos);
            s.truth = detail::take<double>(buf, pos);
            s.p_mid = detail::take<double>(buf, pos);
            s.p_rich = detail::take<double>(buf, pos);
            s.err_mid = detail::take<double>(buf, pos);
            s.err_rich = detail::take<double>(buf, pos);
            s.features.resize(fc);
            for (double& v : s.features)
                v = detail::take<double>(buf, pos);
        }
        return out;
    }

    std::istringstream in(buf);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# dapmm-dataset ", 0) != 0)
        throw MalformedFile("dataset CSV '" + path.string() + "': missing version line");
    if (line != csv_version_line)
        throw VersionMismatch("dataset CSV '" + path.string() + "': " + line);
    if (!std::getline(in, line))
        throw MalformedFile("dataset CSV '" + path.string() + "': missing header");
    const auto header = detail::split_commas(line);
    if (header.size() < 8)
        throw MalformedFile("dataset CSV '" + path.string() + "': header too short");
    const std::size_t fc = header.size() - 8;
    const auto expected = csv_header(fc);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] != expected[i])
            throw MalformedFile("dataset CSV '" + path.string() + "': unexpected column '" + std::string(header[i]) +
                                "'");
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto f = detail::split_commas(line);
        if (f.size() != header.size())
            throw MalformedFile("dataset CSV '" + path.string() + "': line " + std::to_string(line_no) + " has " +
                                std::to_string(f.size()) + " columns, expected " + std::to_string(header.size()));
        Sample s;
        s.scenario = detail::parse_field<std::uint64_t>(f[0]);
        s.seed = detail::parse_field<std::uint64_t>(f[1]);
        s.target_index = detail::parse_field<std::uint32_t>(f[2]);
        s.features.resize(fc);
        for (std::size_t i = 0; i < fc; ++i)
            s.features[i] = detail::parse_field<double>(f[3 + i]);
        s.truth = detail::parse_field<double>(f[3 + fc]);
        s.p_mid = detail::parse_field<double>(f[4 + fc]);
        s.p_rich = detail::parse_field<double>(f[5 + fc]);
        s.err_mid = detail::parse_field<double>(f[6 + fc]);
        s.err_rich = detail::parse_field<double>(f[7 + fc]);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<Sample> read_dataset(const std::filesystem::path& path)
{
    return read_dataset(path, format_for(path));
}

// ---------------------------------------------------------------------------
// ScenarioConfig JSON

inline void to_json(nlohmann::json& j, const ScenarioConfig& c)
{
    j = nlohmann::json{{"gs", c.gs},
                       {"model", {{"F", c.gain}, {"Q", c.noise_variance}}},
                       {"grid", {{"count", c.grid_count}, {"sigma", c.sigma}}},
                       {"target", {{"mode", c.target_mode == TargetMode::Fixed ? "fixed" : "all"},
                                   {"index", c.target_index}}},
                       {"samples", c.samples}};
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c)
{
    try {
        if (j.contains("gs"))
            j["gs"].get_to(c.gs);
        if (j.contains("model")) {
            c.gain = j["model"].value("F", c.gain);
            c.noise_variance = j["model"].value("Q", c.noise_variance);
        }
        if (j.contains("grid")) {
            c.grid_count = j["grid"].value("count", c.grid_count);
            c.sigma = j["grid"].value("sigma", c.sigma);
        }
        if (j.contains("target")) {
            const auto mode = j["target"].value("mode", std::string("fixed"));
            if (mode != "fixed" && mode != "all")
                throw InvalidArgument("ScenarioConfig: target mode must be 'fixed' or 'all'");
            c.target_mode = mode == "fixed" ? TargetMode::Fixed : TargetMode::AllIndices;
            c.target_index = j["target"].value("index", c.target_index);
        }
        c.samples = j.value("samples", c.samples);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("scenario config: ") + e.what());
    }
    c.validate();
}

} // namespace dapmm
