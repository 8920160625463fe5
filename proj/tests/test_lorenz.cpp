#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "pbo/lorenz.hpp"

namespace lz = pbo::lorenz;

TEST(LorenzRhs, Values) {
  const lz::LorenzConfig c;
  const auto d = lz::lorenz_rhs({10, 10, 10}, c, 0.0);
  EXPECT_NEAR(d[0], 0.0, 1e-9);
  EXPECT_NEAR(d[1], 170.0, 1e-9);
  EXPECT_NEAR(d[2], 100.0 - 80.0 / 3.0, 1e-9);
  EXPECT_NEAR(d[2], 73.3333, 1e-4);
  const auto o = lz::lorenz_rhs({0, 0, 0}, c, 0.0);
  EXPECT_EQ(o, (lz::State{0, 0, 0}));
  const auto u = lz::lorenz_rhs({1, 2, 3}, c, 0.5);
  const auto n = lz::lorenz_rhs({1, 2, 3}, c, 0.0);
  EXPECT_EQ(u[1] - n[1], 0.5);
  EXPECT_EQ(u[0], n[0]);
  EXPECT_EQ(u[2], n[2]);
}

TEST(ControlU, Examples) {
  const std::array<double, 3> scale{15, 20, 40};
  EXPECT_EQ(lz::control_u({3, 4, 5}, {0, 0, 0, 0}, scale), 0.0);
  EXPECT_NEAR(lz::control_u({3, 4, 5}, {0, 0, 0, 1}, scale), 0.761594, 1e-6);
  EXPECT_DOUBLE_EQ(lz::control_u({15, 20, 40}, {1, 1, 1, 0}, scale), std::tanh(3.0));
  const double big = lz::control_u({1e4, 1e4, 1e4}, {1, 1, 1, 1}, scale);
  EXPECT_LT(big, 1.0);
  EXPECT_GT(lz::control_u({-1e4, -1e4, -1e4}, {1, 1, 1, -1}, scale), -1.0);
}

TEST(Integrate, UncontrolledStaysOnAttractor) {
  const auto traj = lz::integrate(lz::LorenzConfig{});
  EXPECT_EQ(traj.points.size(), 3001u);
  EXPECT_EQ(traj.control_start, 500u);
  for (const auto& p : traj.points) {
    EXPECT_LT(std::abs(p.x), 30.0);
    EXPECT_LT(std::abs(p.z), 60.0);
    EXPECT_EQ(p.u, 0.0);
  }
  EXPECT_DOUBLE_EQ(traj.points.front().t, -5.0);
  EXPECT_NEAR(traj.points.back().t, 25.0, 1e-12);
  EXPECT_EQ(traj.points[500].t, 0.0);
}

TEST(Rk4, FourthOrderOnExponentialDecay) {
  auto decay = [](const lz::State& s) { return lz::State{-s[0], -s[1], -s[2]}; };
  auto error_at_one = [&](int steps) {
    lz::State s{1, 1, 1};
    for (int i = 0; i < steps; ++i) s = lz::rk4(decay, s, 1.0 / steps);
    return std::abs(s[0] - std::exp(-1.0));
  };
  for (int n : {10, 20, 40}) {
    const double ratio = error_at_one(n) / error_at_one(2 * n);
    EXPECT_GT(ratio, 14.0);
    EXPECT_LT(ratio, 18.0);
  }
}

TEST(Integrate, ZeroParametersReproduceUncontrolledRun) {
  const auto a = lz::integrate(lz::LorenzConfig{});
  const auto b = lz::integrate(lz::LorenzConfig{}, lz::ControlParams{0, 0, 0, 0});
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].x, b.points[i].x);
    EXPECT_EQ(a.points[i].y, b.points[i].y);
    EXPECT_EQ(a.points[i].z, b.points[i].z);
    EXPECT_EQ(b.points[i].u, 0.0);
  }
}

TEST(Integrate, WarmupIgnoresParametersAndControlIsBounded) {
  const auto a = lz::integrate(lz::LorenzConfig{});
  for (const lz::ControlParams p : {lz::ControlParams{1, -1, 1, -1}, lz::ControlParams{0.3, 0.2, -0.9, 1}}) {
    const auto b = lz::integrate(lz::LorenzConfig{}, p);
    for (std::size_t i = 0; i <= b.control_start; ++i) {
      EXPECT_EQ(a.points[i].x, b.points[i].x);
      EXPECT_EQ(a.points[i].z, b.points[i].z);
    }
    for (std::size_t i = 0; i < b.control_start; ++i) EXPECT_EQ(b.points[i].u, 0.0);
    for (std::size_t i = b.control_start; i < b.points.size(); ++i) EXPECT_LT(std::abs(b.points[i].u), 1.0);
  }
}

TEST(Integrate, ControlAtStepUsesUncontrolledDerivatives) {
  const lz::LorenzConfig c;
  const lz::ControlParams p{0.5, -0.25, 0.75, 0.1};
  const auto traj = lz::integrate(c, p);
  for (std::size_t i : {std::size_t{500}, std::size_t{1234}}) {
    const auto& pt = traj.points[i];
    const auto d = lz::lorenz_rhs({pt.x, pt.y, pt.z}, c, 0.0);
    EXPECT_EQ(pt.u, lz::control_u(d, p, c.scaling));
    const auto next = lz::rk4_step({pt.x, pt.y, pt.z}, c, pt.u);
    EXPECT_EQ(traj.points[i + 1].x, next[0]);
  }
}

TEST(Integrate, DivergenceReportsBlowupTime) {
  lz::LorenzConfig c;
  c.dt = 1.0;  // far beyond RK4's stability region
  try {
    lz::integrate(c);
    FAIL() << "expected an integration error";
  } catch (const pbo::IntegrationError& e) {
    EXPECT_TRUE(std::isfinite(e.blowup_time()));
  }
}

TEST(Config, Validation) {
  lz::LorenzConfig c;
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), pbo::ConfigError);
  c = lz::LorenzConfig{};
  c.control = 25.005;
  EXPECT_THROW(c.validate(), pbo::ConfigError);
  EXPECT_THROW(lz::ControlParams::from_vector(Eigen::Vector4d(0, 0, 1.5, 0)), pbo::InputError);
}

TEST(Rewards, Stabilizer) {
  const std::vector<double> pos{1, 2, 3};
  EXPECT_EQ(lz::stabilizer_reward(pos, 0.01), 0.0);
  const std::vector<double> x{-1, -1, 1, -1};
  EXPECT_NEAR(lz::stabilizer_reward(x, 0.01), 0.03, 1e-15);
  const std::vector<double> all(2501, -1.0);
  EXPECT_NEAR(lz::stabilizer_reward(all, 0.01), 25.01, 1e-9);
}

TEST(Rewards, Oscillator) {
  const std::vector<double> same{1, 2, 3, 4};
  EXPECT_EQ(lz::oscillator_reward(same), 0.0);
  const std::vector<double> alt{1, -1, 1, -1};
  EXPECT_EQ(lz::oscillator_reward(alt), 3.0);
  const std::vector<double> zero{1, 0, -1};
  EXPECT_EQ(lz::oscillator_reward(zero), 0.0);
}

TEST(Rewards, RangesOnTrajectories) {
  const lz::LorenzConfig c;
  for (const lz::ControlParams p : {lz::ControlParams{}, lz::ControlParams{1, 1, 1, 1},
                                     lz::ControlParams{-1, 0.5, 0, -1}}) {
    const auto traj = lz::integrate(c, p);
    const double s = lz::reward(traj, lz::Objective::kStabilizer, c.dt);
    const double o = lz::reward(traj, lz::Objective::kOscillator, c.dt);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 25.01 + 1e-9);
    EXPECT_GE(o, 0.0);
    EXPECT_LE(o, 2500.0);
  }
}

TEST(Csv, HeaderAndRows) {
  const auto traj = lz::integrate(lz::LorenzConfig{});
  std::ostringstream os;
  lz::write_trajectory_csv(os, traj);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,x,y,z,u");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3001);
}

TEST(Problem, CostIsNegativeReward) {
  const auto p = lz::make_problem(lz::Objective::kStabilizer);
  const Eigen::Vector4d w(0.2, -0.3, 0.1, -0.5);
  const auto traj = lz::integrate(lz::LorenzConfig{}, lz::ControlParams::from_vector(w));
  EXPECT_EQ(p.cost(w), -lz::reward(traj, lz::Objective::kStabilizer, 0.01));
  EXPECT_EQ(p.dimension, 4);
  EXPECT_EQ(p.population, 16);
}
