// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
// Optional arguments select criteria by number, e.g. `acceptance 4 5 6`.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <dapmm/dapmm.hpp>

#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace dapmm;

namespace {

struct Outcome {
    bool pass;
    std::string summary;
    std::vector<std::string> details;
};

std::string format(const char* f, auto... args)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<std::string> describe(const std::vector<Check>& checks)
{
    std::vector<std::string> out;
    for (const auto& c : checks)
        out.push_back(format("%-4s %-46s %.6g (expected %s)", c.pass ? "ok" : "FAIL", c.name.c_str(), c.value,
                             c.expected.c_str()));
    return out;
}

void append_table(std::vector<std::string>& lines, const EvalReport& r)
{
    std::istringstream in(format_table(r));
    for (std::string l; std::getline(in, l);)
        lines.push_back(l);
}

EstimatorConfig desk_estimator()
{
    EstimatorConfig est;
    est.preselected = 250000;
    return est;
}

Outcome table1()
{
    const ScenarioConfig cfg;
    const auto r = run_table1(cfg, 1);
    const auto checks = table1_checks(r);
    Outcome o{all_pass(checks), format("M = %zu, seed 1", r.samples), describe(checks)};
    append_table(o.details, r);
    return o;
}

Outcome table2()
{
    ScenarioConfig cfg;
    int passed = 0;
    std::vector<std::string> details;
    for (std::uint64_t seed : {1, 2, 3}) {
        auto est = desk_estimator();
        est.train.seed = seed;
        const auto fitted = build_error_estimator(cfg, est, seed);
        const auto r = run_table2(fitted.model, cfg, 10000, seed);
        const auto checks = table2_checks(r);
        passed += all_pass(checks);
        const double val = fitted.report.validation_loss[fitted.report.best_epoch - 1];
        details.push_back(format("seed %llu: %s; %zu train / %zu validation samples, retention %.4f, best epoch %zu, "
                                 "validation loss %.3e vs zero-output %.3e (ratio %.1f)",
                                 static_cast<unsigned long long>(seed), all_pass(checks) ? "pass" : "fail",
                                 fitted.train_count, fitted.validation_count, fitted.retention,
                                 fitted.report.best_epoch, val, fitted.zero_output_validation_loss,
                                 fitted.zero_output_validation_loss / val));
        for (auto& line : describe(checks))
            details.push_back("  " + line);
        append_table(details, r);
    }
    return {passed >= 2, format("%d of 3 seeds pass (2 required)", passed), details};
}

Outcome grid_mare()
{
    ScenarioConfig cfg;
    cfg.target_mode = TargetMode::AllIndices;
    auto est = desk_estimator();
    const auto fitted = build_error_estimator(cfg, est, 1);
    const auto r = run_grid_mare(fitted.model, cfg, 2000, 1);
    const auto checks = grid_mare_checks(r);
    Outcome o{all_pass(checks), format("2000 scenarios x 30 nodes, model trained on %zu all-node samples",
                                       fitted.train_count),
              describe(checks)};
    append_table(o.details, r);
    return o;
}

Outcome structural()
{
    const std::vector<std::size_t> dims{87, 128, 64, 2};
    const auto params = mlp_init(dims, Head::Regression, 1).param_count();
    const auto pmd = make_scenario(1, 0, ScenarioConfig{}).pmd;
    const auto features = extract_features(pmd, pmd.grid.center()).size();
    return {params == 19650 && param_count(dims) == 19650 && features == 87,
            format("parameters %zu (expected 19650), features %zu (expected 87)", params, features),
            {}};
}

Outcome oracle_equivalence()
{
    const ScenarioConfig cfg;
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const auto sc = make_scenario(5, i, cfg);
        const double target = sc.grid_next.points()[cfg.target_index - 1];
        const oracle::Mixture prior{sc.prior.weights(), sc.prior.means(), sc.prior.variances()};
        const double brute = oracle::convolve(prior, cfg.gain, cfg.noise_variance, target, 100000);
        worst = std::max(worst, std::abs(gs_eval(sc.predicted, target) - brute));
    }
    return {worst <= 1e-8, format("1000 scenarios, max |exact - brute force| = %.3e (limit 1e-8)", worst), {}};
}

Outcome convergence()
{
    const auto model = DynamicsModel::linear(1.0, 2.0);
    const double target = 0.7, exact = oracle::gauss(target, 0.0, 3.0);
    double em[3], er[3];
    const std::size_t sizes[3] = {64, 128, 256};
    std::vector<std::string> details;
    for (int k = 0; k < 3; ++k) {
        const auto pmd = pmd_from_pdf([](double x) { return oracle::gauss(x, 0.0, 1.0); },
                                      build_grid(0.0, 1.0, 6.0, sizes[k]));
        const auto v = evaluate_rules(pmd, model, target);
        em[k] = std::abs(exact - v.midpoint);
        er[k] = std::abs(exact - v.richardson);
        details.push_back(format("N = %3zu: |midpoint error| %.4e, |Richardson error| %.4e", sizes[k], em[k], er[k]));
    }
    const double mid = 0.5 * (em[0] / em[1] + em[1] / em[2]);
    const double rich = 0.5 * (er[0] / er[1] + er[1] / er[2]);
    return {mid >= 3.2 && mid <= 4.8 && rich >= 8.0,
            format("prior N(0,1), F = 1, Q = 2, target 0.7: midpoint factor %.3f (expected [3.2, 4.8]), "
                   "Richardson factor %.3f (expected >= 8)",
                   mid, rich),
            details};
}

double gradient_error(Mlp mlp, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t, LossKind kind)
{
    const auto analytic = mlp_backward(mlp, x, t, kind).gradients;
    constexpr double h = 1e-6;
    double worst = 0.0;
    const auto probe = [&](double& p, double g) {
        const double saved = p;
        p = saved + h;
        const double up = batch_loss(mlp_forward_batch(mlp, x).output(), t, kind);
        p = saved - h;
        const double down = batch_loss(mlp_forward_batch(mlp, x).output(), t, kind);
        p = saved;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-8}));
    };
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        for (Eigen::Index i = 0; i < mlp.layers[l].weight.size(); ++i)
            probe(mlp.layers[l].weight.data()[i], analytic[l].weight.data()[i]);
        for (Eigen::Index i = 0; i < mlp.layers[l].bias.size(); ++i)
            probe(mlp.layers[l].bias.data()[i], analytic[l].bias.data()[i]);
    }
    return worst;
}

Outcome gradients()
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(87, 16), t(2, 16), labels = Eigen::MatrixXd::Zero(2, 16);
    for (Eigen::Index c = 0; c < 16; ++c) {
        for (Eigen::Index r = 0; r < 87; ++r)
            x(r, c) = z(rng);
        t(0, c) = 0.5 * z(rng);
        t(1, c) = 0.5 * z(rng);
        labels(rng() % 2, c) = 1.0;
    }
    const double reg = gradient_error(mlp_init({87, 8, 4, 2}, Head::Regression, 3), x, t, LossKind::MeanSquared);
    const double cls =
        gradient_error(mlp_init({87, 8, 4, 2}, Head::Classification, 4), x, labels, LossKind::SoftmaxCrossEntropy);
    return {reg < 1e-4 && cls < 1e-4,
            format("87-8-4-2 net, batch 16, h = 1e-6: max relative error MSE %.2e, cross-entropy %.2e (limit 1e-4)",
                   reg, cls),
            {}};
}

std::string file_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Artifacts {
    std::string dataset;
    std::string model;
    std::string report;
};

Artifacts produce(const char* threads)
{
    setenv("DAPMM_THREADS", threads, 1);
    ScenarioConfig cfg;
    cfg.target_mode = TargetMode::AllIndices;
    const auto path = fs::temp_directory_path() / (std::string("dapmm_accept_") + threads + ".bin");
    write_dataset(generate_samples(21, 0, 500, cfg), path);
    Artifacts a{file_bytes(path), {}, {}};
    fs::remove(path);

    EstimatorConfig est;
    est.preselected = 4000;
    est.train.max_epochs = 3;
    est.train.seed = 5;
    const auto fitted = build_error_estimator(ScenarioConfig{}, est, 21);
    a.model = model_to_json(fitted.model).dump();
    nlohmann::json report{{"table2", run_table2(fitted.model, ScenarioConfig{}, 3000, 21)},
                          {"grid", run_grid_mare(fitted.model, cfg, 100, 21)},
                          {"train_loss", fitted.report.train_loss},
                          {"validation_loss", fitted.report.validation_loss}};
    a.report = report.dump();
    unsetenv("DAPMM_THREADS");
    return a;
}

Outcome determinism()
{
    const auto one = produce("1");
    const auto many = produce("4");
    const bool data = one.dataset == many.dataset, model = one.model == many.model, report = one.report == many.report;
    return {data && model && report,
            format("DAPMM_THREADS 1 vs 4: dataset %s (%zu bytes), model %s, reports %s",
                   data ? "identical" : "DIFFERENT", one.dataset.size(), model ? "identical" : "DIFFERENT",
                   report ? "identical" : "DIFFERENT"),
            {}};
}

} // namespace

int main(int argc, char** argv)
{
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "baseline rule accuracy table", table1},
        {2, "selective rule accuracy table", table2},
        {3, "whole-grid MARE", grid_mare},
        {4, "network and feature sizes", structural},
        {5, "closed-form prediction vs brute-force convolution", oracle_equivalence},
        {6, "convergence orders", convergence},
        {7, "backpropagation vs finite differences", gradients},
        {8, "determinism across thread counts", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id))
            continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what(), {}};
        }
        failures += !o.pass;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.summary.c_str());
        for (const auto& d : o.details)
            std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
