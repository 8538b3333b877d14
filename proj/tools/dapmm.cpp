// Command-line driver: data generation, training, table reproduction, prediction.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <dapmm/dapmm.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dapmm;

namespace {

constexpr int exit_checks_failed = 1;
constexpr int exit_error = 2;

constexpr std::size_t desk_train_samples = 100000;
constexpr std::size_t full_train_samples = 1000000;
constexpr std::size_t table1_samples = 60000;
constexpr std::size_t table2_observations = 10000;
constexpr std::size_t grid_scenarios = 2000;

struct Options {
    std::string config;
    std::uint64_t seed = 1;
    std::optional<std::size_t> samples;
    std::string out;
    std::string model;
    std::string data;
    std::string report;
    std::string rule = "midpoint";
    std::string table = "table1";
    double beta = 1e-2;
    bool preselect_data = false;
    bool full = false;
};

json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw MalformedFile("config '" + path + "': " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out)
        throw IoError("write failed for '" + path + "'");
}

json load_config(const Options& o) { return o.config.empty() ? json::object() : read_json(o.config); }

ScenarioConfig scenario_from(const json& cfg)
{
    ScenarioConfig sc;
    if (cfg.contains("scenario"))
        cfg["scenario"].get_to(sc);
    return sc;
}

EstimatorConfig estimator_from(const json& cfg, const Options& o)
{
    EstimatorConfig est;
    est.beta = o.beta;
    if (const auto it = cfg.find("estimator"); it != cfg.end()) {
        const auto& e = *it;
        est.beta = e.value("beta", est.beta);
        est.train_fraction = e.value("train_fraction", est.train_fraction);
        est.max_scenarios = e.value("max_scenarios", est.max_scenarios);
        est.hidden = e.value("hidden", est.hidden);
        const auto head = e.value("head", std::string("regression"));
        if (head != "regression" && head != "classification")
            throw InvalidArgument("estimator.head must be 'regression' or 'classification'");
        est.head = head == "regression" ? Head::Regression : Head::Classification;
        est.tanh_output = e.value("output_activation", std::string("tanh")) == "tanh";
    }
    if (const auto it = cfg.find("train"); it != cfg.end()) {
        const auto& t = *it;
        est.train.learning_rate = t.value("learning_rate", est.train.learning_rate);
        est.train.momentum = t.value("momentum", est.train.momentum);
        est.train.batch_size = t.value("batch_size", est.train.batch_size);
        est.train.max_epochs = t.value("max_epochs", est.train.max_epochs);
        est.train.patience = t.value("patience", est.train.patience);
    }
    est.train.seed = o.seed;
    est.preselected = o.samples.value_or(o.full ? full_train_samples : desk_train_samples);
    est.train.validate();
    return est;
}

json train_report_json(const EstimatorResult& r)
{
    return {{"train_samples", r.train_count},
            {"validation_samples", r.validation_count},
            {"scenarios_generated", r.scenarios_generated},
            {"retention", r.retention},
            {"train_loss", r.report.train_loss},
            {"validation_loss", r.report.validation_loss},
            {"best_epoch", r.report.best_epoch},
            {"final_epoch", r.report.final_epoch},
            {"zero_output_validation_loss", r.zero_output_validation_loss},
            {"param_count", r.model.param_count()}};
}

int cmd_gen_data(const Options& o)
{
    if (o.out.empty())
        throw InvalidArgument("gen-data requires --out");
    const auto sc = scenario_from(load_config(o));
    const std::size_t n = o.samples.value_or(sc.samples);
    std::vector<Sample> samples;
    double retention = 0.0;
    if (o.preselect_data) {
        auto data = generate_preselected(o.seed, sc, o.beta, n, 20'000'000);
        retention = data.retention();
        samples = std::move(data.samples);
    } else {
        samples = generate_samples(o.seed, 0, n, sc);
        std::size_t kept = 0;
        for (const auto& s : samples)
            kept += is_significant(s, o.beta);
        retention = samples.empty() ? 0.0 : static_cast<double>(kept) / static_cast<double>(samples.size());
    }
    write_dataset(samples, o.out);
    std::printf("samples: %zu\nretention (beta = %g): %.4f\nwritten: %s\n", samples.size(), o.beta, retention,
                o.out.c_str());
    return 0;
}

int cmd_train(const Options& o)
{
    if (o.out.empty())
        throw InvalidArgument("train requires --out");
    const auto cfg = load_config(o);
    const auto sc = scenario_from(cfg);
    const auto est = estimator_from(cfg, o);
    EstimatorResult result;
    if (!o.data.empty()) {
        auto samples = preselect(read_dataset(o.data), est.beta);
        if (samples.size() < 2)
            throw EmptyInput("dataset '" + o.data + "' has fewer than 2 samples above beta");
        auto [tr, va] = split(std::move(samples), est.train_fraction, derive_seed(o.seed, SeedPurpose::Split));
        result = fit_error_estimator(tr, va, est);
    } else {
        result = build_error_estimator(sc, est, o.seed);
    }
    save_model(result.model, o.out);
    const auto report = train_report_json(result);
    const std::string report_path = o.report.empty() ? o.out + ".report.json" : o.report;
    write_text(report_path, report.dump(2) + "\n");
    const double val = result.report.validation_loss.empty() ? NAN
                                                             : result.report.validation_loss[result.report.best_epoch - 1];
    std::printf("trained on %zu samples (%zu validation), best epoch %zu of %zu\n", result.train_count,
                result.validation_count, result.report.best_epoch, result.report.final_epoch);
    std::printf("validation loss %.4e (zero-output baseline %.4e)\n", val, result.zero_output_validation_loss);
    std::fprintf(stderr, "training took %.1f s\n", result.report.wall_seconds);
    std::printf("model: %s\nreport: %s\n", o.out.c_str(), report_path.c_str());
    return 0;
}

int cmd_repro(const Options& o)
{
    auto sc = scenario_from(load_config(o));
    EvalReport report;
    std::vector<Check> checks;
    if (o.table == "table1") {
        sc.samples = o.samples.value_or(table1_samples);
        report = run_table1(sc, o.seed);
        checks = table1_checks(report);
    } else {
        if (o.model.empty())
            throw InvalidArgument(o.table + " requires a trained model (--model)");
        const auto model = load_model(o.model);
        if (o.table == "table2") {
            report = run_table2(model, sc, o.samples.value_or(table2_observations), o.seed);
            checks = table2_checks(report);
        } else {
            report = run_grid_mare(model, sc, o.samples.value_or(grid_scenarios), o.seed);
            checks = grid_mare_checks(report);
        }
    }
    std::cout << format_table(report) << '\n';
    for (const auto& c : checks)
        std::printf("%-48s %-5s value %.6g, expected %s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value,
                    c.expected.c_str());
    const bool pass = all_pass(checks);
    if (!o.out.empty()) {
        json j{{"table", o.table}, {"seed", o.seed}, {"report", report}, {"checks", checks}, {"pass", pass}};
        write_text(o.out, j.dump(2) + "\n");
    }
    return pass ? 0 : exit_checks_failed;
}

int cmd_predict(const Options& o)
{
    if (o.out.empty())
        throw InvalidArgument("predict requires --out");
    const auto cfg = load_config(o);
    const auto sc = scenario_from(cfg);
    const GaussianSum prior = cfg.contains("prior") ? gaussian_sum_from_json(cfg["prior"]) : GaussianSum::single(0.0, 1.0);
    const auto model = sc.model();
    const auto m = gs_moments(prior);
    const auto pmd = pmd_from_pdf([&](double x) { return gs_eval(prior, x); },
                                  build_grid(m.mean, std::sqrt(m.variance), sc.sigma, sc.grid_count));
    const auto next = grid_next_support(prior, model, sc.sigma, sc.grid_count);

    std::optional<Mlp> mlp;
    PointEvaluator evaluator;
    if (o.rule == "midpoint") {
        evaluator = midpoint_evaluator();
    } else if (o.rule == "richardson") {
        evaluator = richardson_evaluator();
    } else {
        if (o.model.empty())
            throw InvalidArgument("--rule selective requires a trained model (--model)");
        mlp = load_model(o.model);
        evaluator = selective_evaluator(*mlp);
    }
    const auto pred = predict_pmd(pmd, model, next, evaluator);
    json j = pred;
    j["rule"] = o.rule;
    if (mlp) {
        std::vector<std::string> chosen;
        for (double t : next.points())
            chosen.emplace_back(rule_name(selective_integrate(pmd, model, t, *mlp).chosen));
        j["chosen"] = chosen;
    }
    write_text(o.out, j.dump(2) + "\n");
    std::printf("predictive PMD (%zu nodes, rule %s, mass %.12f): %s\n", pred.size(), o.rule.c_str(), pred.mass(),
                o.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Point-mass prediction with selectable integration rules and a learned error estimator"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Master seed");
        sub->add_option("--samples", o.samples, "Sample / scenario count");
        sub->add_option("--out", o.out, "Output path");
        sub->add_flag("--full", o.full, "Full-scale training size");
    };

    auto* gen = app.add_subcommand("gen-data", "Generate a labelled dataset");
    common(gen);
    gen->add_option("--beta", o.beta, "Pre-selection threshold");
    gen->add_flag("--preselect", o.preselect_data, "Keep only samples whose largest rule error exceeds beta");

    auto* tr = app.add_subcommand("train", "Train the error estimator");
    common(tr);
    tr->add_option("--data", o.data, "Dataset to train on (generated when omitted)");
    tr->add_option("--beta", o.beta, "Pre-selection threshold");
    tr->add_option("--report", o.report, "Training report path (default <out>.report.json)");

    auto* rep = app.add_subcommand("repro", "Reproduce an accuracy table and check it");
    common(rep);
    rep->add_option("--table", o.table, "table1 | table2 | grid-mare")
        ->check(CLI::IsMember({"table1", "table2", "grid-mare"}));
    rep->add_option("--model", o.model, "Trained model file");

    auto* pred = app.add_subcommand("predict", "Compute a predictive PMD");
    common(pred);
    pred->add_option("--rule", o.rule, "midpoint | richardson | selective")
        ->check(CLI::IsMember({"midpoint", "richardson", "selective"}));
    pred->add_option("--model", o.model, "Trained model file (selective rule)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : exit_error;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(o);
        if (tr->parsed())
            return cmd_train(o);
        if (rep->parsed())
            return cmd_repro(o);
        return cmd_predict(o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_error;
    }
}
