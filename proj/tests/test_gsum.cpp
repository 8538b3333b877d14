#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <dapmm/gsum.hpp>

#include "oracle.hpp"

using namespace dapmm;

namespace {

oracle::Mixture as_oracle(const GaussianSum& gs) { return {gs.weights(), gs.means(), gs.variances()}; }

} // namespace

TEST(GaussianSum, RejectsBrokenInvariants)
{
    EXPECT_THROW(GaussianSum({}, {}, {}), InvalidArgument);
    EXPECT_THROW(GaussianSum({0.5, 0.4}, {0, 1}, {1, 1}), InvalidArgument);
    EXPECT_THROW(GaussianSum({1.5, -0.5}, {0, 1}, {1, 1}), InvalidArgument);
    EXPECT_THROW(GaussianSum({1.0}, {0}, {0.0}), InvalidArgument);
    EXPECT_THROW(GaussianSum({1.0}, {0, 1}, {1}), InvalidArgument);
    EXPECT_NO_THROW(GaussianSum({0.5, 0.5 + 1e-13}, {0, 1}, {1, 1}));
}

TEST(GaussianSum, EvalStandardNormal)
{
    const auto gs = GaussianSum::single(0.0, 1.0);
    EXPECT_NEAR(gs_eval(gs, 0.0), 0.3989422804014327, 1e-15);
    EXPECT_NEAR(gs_eval(gs, 1.0), 0.24197072451914337, 1e-15);
}

TEST(GaussianSum, EvalSymmetricPair)
{
    const GaussianSum pair({0.5, 0.5}, {-1, 1}, {1, 1});
    EXPECT_NEAR(gs_eval(pair, 0.0), gs_eval(GaussianSum::single(1.0, 1.0), 0.0), 1e-15);
}

TEST(GaussianSum, MomentsClosedForm)
{
    auto m = gs_moments(GaussianSum::single(0.0, 1.0));
    EXPECT_DOUBLE_EQ(m.mean, 0.0);
    EXPECT_DOUBLE_EQ(m.variance, 1.0);
    m = gs_moments(GaussianSum({0.5, 0.5}, {-1, 1}, {1, 1}));
    EXPECT_NEAR(m.mean, 0.0, 1e-15);
    EXPECT_NEAR(m.variance, 2.0, 1e-15);
}

TEST(GaussianSum, MomentsMatchDirectSampling)
{
    const GaussianSum gs({0.2, 0.5, 0.3}, {-2.0, 0.5, 3.0}, {0.3, 1.0, 0.6});
    const auto m = gs_moments(gs);

    std::mt19937_64 rng(2024);
    std::discrete_distribution<int> pick(gs.weights().begin(), gs.weights().end());
    std::normal_distribution<double> z;
    constexpr int n = 10'000'000;
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const int c = pick(rng);
        const double x = gs.means()[c] + std::sqrt(gs.variances()[c]) * z(rng);
        s1 += x;
        s2 += x * x;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    // Fourth central moment for the standard error of the variance.
    std::mt19937_64 rng2(7);
    for (int i = 0; i < 1'000'000; ++i) {
        const int c = pick(rng2);
        const double d = gs.means()[c] + std::sqrt(gs.variances()[c]) * z(rng2) - mean;
        s4 += d * d * d * d;
    }
    const double mu4 = s4 / 1e6;
    EXPECT_NEAR(mean, m.mean, 3.0 * std::sqrt(m.variance / n));
    EXPECT_NEAR(var, m.variance, 3.0 * std::sqrt((mu4 - m.variance * m.variance) / n));
}

TEST(GaussianSum, PredictSingle)
{
    const auto p = gs_predict_exact(GaussianSum::single(0.0, 1.0), 1.0, 2.0);
    EXPECT_EQ(p, GaussianSum::single(0.0, 3.0));
}

TEST(GaussianSum, PredictZeroGain)
{
    const GaussianSum prior({0.3, 0.7}, {-2, 4}, {0.5, 0.2});
    const auto p = gs_predict_exact(prior, 0.0, 2.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_EQ(p.means()[i], 0.0);
        EXPECT_EQ(p.variances()[i], 2.0);
    }
    for (double x : {-3.0, -0.4, 0.0, 1.7, 5.0})
        EXPECT_NEAR(gs_eval(p, x), oracle::gauss(x, 0.0, 2.0), 1e-15);
}

TEST(GaussianSum, PredictRejectsNonPositiveNoise)
{
    EXPECT_THROW(gs_predict_exact(GaussianSum::single(0, 1), 1.0, 0.0), InvalidArgument);
}

TEST(GaussianSum, PredictMatchesBruteForceConvolution)
{
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        const auto prior = gs_sample_random(rng, {});
        const auto pred = gs_predict_exact(prior, 1.0, 2.0);
        const auto mom = gs_moments(pred);
        const double sd = std::sqrt(mom.variance);
        for (int k = 0; k < 50; ++k) {
            const double x = mom.mean - 4.0 * sd + 8.0 * sd * k / 49.0;
            EXPECT_NEAR(gs_eval(pred, x), oracle::convolve(as_oracle(prior), 1.0, 2.0, x), 1e-8);
        }
    }
}

TEST(GaussianSum, PredictCommutesWithMixing)
{
    Rng rng(5);
    const auto prior = gs_sample_random(rng, {});
    const auto whole = gs_predict_exact(prior, 0.7, 1.3);
    for (std::size_t i = 0; i < prior.size(); ++i) {
        const auto part = gs_predict_exact(GaussianSum::single(prior.means()[i], prior.variances()[i]), 0.7, 1.3);
        EXPECT_EQ(part.means()[0], whole.means()[i]);
        EXPECT_EQ(part.variances()[0], whole.variances()[i]);
        EXPECT_EQ(prior.weights()[i], whole.weights()[i]);
    }
}

TEST(GaussianSum, PredictedMomentsPropagate)
{
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const auto prior = gs_sample_random(rng, {});
        const double f = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        const auto a = gs_moments(prior);
        const auto b = gs_moments(gs_predict_exact(prior, f, 2.0));
        EXPECT_NEAR(b.mean, f * a.mean, 1e-12);
        EXPECT_NEAR(b.variance, f * f * a.variance + 2.0, 1e-12);
    }
}

TEST(GaussianSum, IntegratesToOne)
{
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        const auto gs = gs_sample_random(rng, {});
        const auto o = as_oracle(gs);
        EXPECT_NEAR(oracle::midpoint([&](double x) { return gs_eval(gs, x); }, o.lo(), o.hi(), 200000), 1.0, 1e-6);
    }
}

TEST(GsSampleRandom, Deterministic)
{
    Rng a = make_stream(42, 3), b = make_stream(42, 3);
    EXPECT_EQ(gs_sample_random(a, {}), gs_sample_random(b, {}));
}

TEST(GsSampleRandom, ComponentCountUniformAndRangesHold)
{
    Rng rng(123);
    std::array<int, 10> counts{};
    for (int i = 0; i < 100000; ++i) {
        const auto gs = gs_sample_random(rng, {});
        ASSERT_GE(gs.size(), 1u);
        ASSERT_LE(gs.size(), 10u);
        ++counts[gs.size() - 1];
        for (std::size_t c = 0; c < gs.size(); ++c) {
            ASSERT_GE(gs.means()[c], -5.0);
            ASSERT_LE(gs.means()[c], 5.0);
            ASSERT_GE(gs.variances()[c], 0.1);
            ASSERT_LE(gs.variances()[c], 1.0);
        }
    }
    double chi2 = 0.0;
    for (int c : counts)
        chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
    EXPECT_LT(chi2, 21.666); // 99th percentile, 9 dof
}

TEST(GsSampleRandom, EqualWeightScheme)
{
    GsRandomConfig cfg;
    cfg.weights = WeightScheme::Equal;
    Rng rng(1);
    const auto gs = gs_sample_random(rng, cfg);
    for (double w : gs.weights())
        EXPECT_DOUBLE_EQ(w, 1.0 / static_cast<double>(gs.size()));
}

TEST(GsRandomConfig, Validation)
{
    GsRandomConfig cfg;
    cfg.max_components = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.variance_lo = 0.0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(GaussianSum, JsonRoundTrip)
{
    const GaussianSum gs({0.25, 0.75}, {-1.5, 2.0}, {0.3, 0.9});
    const nlohmann::json j = gs;
    EXPECT_EQ(gaussian_sum_from_json(j), gs);
    EXPECT_THROW(gaussian_sum_from_json(nlohmann::json{{"weights", {1.0}}}), MalformedFile);

    GsRandomConfig cfg;
    cfg.max_components = 3;
    cfg.weights = WeightScheme::Equal;
    const nlohmann::json jc = cfg;
    const auto back = jc.get<GsRandomConfig>();
    EXPECT_EQ(back.max_components, 3);
    EXPECT_EQ(back.weights, WeightScheme::Equal);
}
