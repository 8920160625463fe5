#ifndef PBO_LORENZ_HPP
#define PBO_LORENZ_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbo/benchmarks.hpp"
#include "pbo/errors.hpp"

namespace pbo::lorenz {

using State = std::array<double, 3>;

struct LorenzConfig {
  // Attractor parameters (sigma_L, rho_L, beta_L).
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  State initial{10.0, 10.0, 10.0};
  double dt = 0.01;
  double warmup = 5.0;
  double control = 25.0;
  std::array<double, 3> scaling{15.0, 20.0, 40.0};

  int warmup_steps() const { return steps_for(warmup, "warmup"); }
  int control_steps() const { return steps_for(control, "control"); }

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    warmup_steps();
    control_steps();
    for (double s : scaling)
      if (!(s > 0.0)) throw ConfigError("scaling factors must be positive");
  }

 private:
  int steps_for(double duration, const char* what) const {
    if (!(duration > 0.0)) throw ConfigError(std::string(what) + " duration must be positive");
    const double n = duration / dt;
    const double r = std::round(n);
    if (std::abs(n - r) > 1e-9 * std::max(1.0, n))
      throw ConfigError(std::string(what) + " duration is not a multiple of the time step");
    return static_cast<int>(r);
  }
};

/// Feedback weights on the scaled derivatives and the bias, each in [-1, 1].
struct ControlParams {
  double w_x = 0.0;
  double w_y = 0.0;
  double w_z = 0.0;
  double b = 0.0;

  static ControlParams from_vector(const Eigen::VectorXd& v) {
    if (v.size() != 4) throw InputError("control parameters need 4 entries");
    for (int i = 0; i < 4; ++i)
      if (!(v[i] >= -1.0 && v[i] <= 1.0)) throw InputError("control parameter outside [-1, 1]");
    return {v[0], v[1], v[2], v[3]};
  }
};

struct TrajectoryPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double u = 0.0;
};

/// Uniform-grid time series from t = -warmup to t = control. The sample at
/// control_start (t = 0) opens the controlled window.
struct Trajectory {
  std::vector<TrajectoryPoint> points;
  std::size_t control_start = 0;

  std::vector<double> controlled_x() const {
    std::vector<double> x;
    x.reserve(points.size() - control_start);
    for (std::size_t i = control_start; i < points.size(); ++i) x.push_back(points[i].x);
    return x;
  }
};

inline State lorenz_rhs(const State& s, const LorenzConfig& c, double u) {
  return {c.sigma * (s[1] - s[0]), s[0] * (c.rho - s[2]) - s[1] + u, s[0] * s[1] - c.beta * s[2]};
}

// Largest double strictly below one; tanh rounds to 1.0 for large arguments.
inline constexpr double kMaxControl = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

inline double control_u(const State& derivatives, const ControlParams& p,
                        const std::array<double, 3>& scaling) {
  const double a = p.w_x * derivatives[0] / scaling[0] + p.w_y * derivatives[1] / scaling[1] +
                   p.w_z * derivatives[2] / scaling[2] + p.b;
  return std::clamp(std::tanh(a), -kMaxControl, kMaxControl);
}

/// Classical RK4 step for an autonomous right-hand side f(State) -> State.
template <typename F>
State rk4(const F& f, const State& s, double h) {
  auto add = [](const State& a, const State& k, double w) {
    return State{a[0] + w * k[0], a[1] + w * k[1], a[2] + w * k[2]};
  };
  const State k1 = f(s);
  const State k2 = f(add(s, k1, h / 2));
  const State k3 = f(add(s, k2, h / 2));
  const State k4 = f(add(s, k3, h));
  State out;
  for (int i = 0; i < 3; ++i) out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

// The control is held constant over the step.
inline State rk4_step(const State& s, const LorenzConfig& c, double u) {
  return rk4([&](const State& x) { return lorenz_rhs(x, c, u); }, s, c.dt);
}

/// Uncontrolled warmup followed by the controlled window. The control at a
/// step is computed from the uncontrolled derivatives at the step start.
inline Trajectory integrate(const LorenzConfig& c,
                            const std::optional<ControlParams>& params = std::nullopt) {
  c.validate();
  const int n_warm = c.warmup_steps();
  const int n_total = n_warm + c.control_steps();
  Trajectory traj;
  traj.points.reserve(static_cast<std::size_t>(n_total) + 1);
  traj.control_start = static_cast<std::size_t>(n_warm);
  State s = c.initial;
  for (int k = 0; k <= n_total; ++k) {
    const double t = static_cast<double>(k - n_warm) * c.dt;
    if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !std::isfinite(s[2]))
      throw IntegrationError("Lorenz state became non-finite at t = " + std::to_string(t), t);
    double u = 0.0;
    if (params && k >= n_warm) u = control_u(lorenz_rhs(s, c, 0.0), *params, c.scaling);
    traj.points.push_back({t, s[0], s[1], s[2], u});
    if (k < n_total) s = rk4_step(s, c, u);
  }
  return traj;
}

/// dt times the number of samples with x < 0.
inline double stabilizer_reward(std::span<const double> x, double dt) {
  std::size_t count = 0;
  for (double v : x)
    if (v < 0.0) ++count;
  return dt * static_cast<double>(count);
}

/// Number of consecutive sample pairs whose product is strictly negative.
inline double oscillator_reward(std::span<const double> x) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if (x[i] * x[i + 1] < 0.0) ++count;
  return static_cast<double>(count);
}

enum class Objective { kStabilizer, kOscillator };

inline double reward(const Trajectory& traj, Objective objective, double dt) {
  const auto x = traj.controlled_x();
  return objective == Objective::kStabilizer ? stabilizer_reward(x, dt) : oscillator_reward(x);
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "t,x,y,z,u\n";
  for (const auto& p : traj.points)
    os << p.t << ',' << p.x << ',' << p.y << ',' << p.z << ',' << p.u << '\n';
  os.precision(old_precision);
}

/// Optimization problem over the four control parameters; cost = -reward.
inline Problem make_problem(Objective objective, LorenzConfig config = {}) {
  config.validate();
  Problem p;
  p.name = objective == Objective::kStabilizer ? "lorenz_stabilizer" : "lorenz_oscillator";
  p.dimension = 4;
  p.lower = Eigen::VectorXd::Constant(4, -1.0);
  p.upper = Eigen::VectorXd::Constant(4, 1.0);
  p.start = Eigen::VectorXd::Zero(4);
  p.population = 16;
  p.cost = [config, objective](const Eigen::VectorXd& w) {
    const auto traj = integrate(config, ControlParams::from_vector(w));
    return -reward(traj, objective, config.dt);
  };
  p.validate();
  return p;
}

}  // namespace pbo::lorenz

#endif  // PBO_LORENZ_HPP
