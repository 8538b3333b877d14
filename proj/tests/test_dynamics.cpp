#include <gtest/gtest.h>

#include <random>

#include <dapmm/dynamics.hpp>

#include "oracle.hpp"

using namespace dapmm;

TEST(Dynamics, TransitionDensityValues)
{
    const auto m = DynamicsModel::linear(1.0, 2.0);
    EXPECT_NEAR(transition_density(m, 0.0, 0.0), 0.28209479177387814, 1e-15);
    EXPECT_NEAR(transition_density(m, 1.0, 1.0), 0.28209479177387814, 1e-15);
    EXPECT_NEAR(transition_density(DynamicsModel::linear(2.0, 1.0), 0.0, 1.0), 0.05399096651318806, 1e-15);
}

TEST(Dynamics, RejectsNonPositiveNoise)
{
    EXPECT_THROW(DynamicsModel::linear(1.0, 0.0), InvalidArgument);
    EXPECT_THROW(DynamicsModel::linear(1.0, -2.0), InvalidArgument);
}

TEST(Dynamics, IntegratesToOne)
{
    const auto m = DynamicsModel::linear(0.8, 2.0);
    for (double x : {-4.0, 0.0, 2.5}) {
        const double c = m.apply(x);
        const double total = oracle::midpoint([&](double y) { return transition_density(m, y, x); }, c - 20, c + 20, 100000);
        EXPECT_NEAR(total, 1.0, 1e-6);
    }
}

TEST(Dynamics, DependsOnlyOnResidual)
{
    const auto m = DynamicsModel::linear(1.7, 0.6);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int t = 0; t < 200; ++t) {
        const double x = u(rng), r = u(rng) * 0.3;
        EXPECT_NEAR(transition_density(m, 1.7 * x + r, x), oracle::gauss(r, 0.0, 0.6), 1e-14);
    }
}

TEST(Dynamics, InputShiftsTheMean)
{
    auto m = DynamicsModel::linear(1.0, 2.0);
    m.input = 0.5;
    EXPECT_DOUBLE_EQ(m.apply(1.0), 1.5);
    EXPECT_NEAR(transition_density(m, 1.5, 1.0), oracle::gauss(0.0, 0.0, 2.0), 1e-15);
}

TEST(Dynamics, PluggableMapAndNoise)
{
    DynamicsModel m;
    m.map = [](double x) { return x * x; };
    m.noise_pdf = [](double r) { return std::abs(r) < 0.5 ? 1.0 : 0.0; };
    EXPECT_FALSE(m.is_linear());
    EXPECT_EQ(transition_density(m, 4.2, 2.0), 1.0);
    EXPECT_EQ(transition_density(m, 5.0, 2.0), 0.0);
}

TEST(Dynamics, JsonRoundTrip)
{
    auto m = DynamicsModel::linear(0.9, 1.5);
    m.input = -0.25;
    const nlohmann::json j = m;
    const auto back = dynamics_from_json(j);
    EXPECT_EQ(back.gain, 0.9);
    EXPECT_EQ(back.noise_variance, 1.5);
    EXPECT_EQ(back.input, -0.25);
    EXPECT_THROW(dynamics_from_json(nlohmann::json{{"Q", 0.0}}), InvalidArgument);
}
