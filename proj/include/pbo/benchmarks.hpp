#ifndef PBO_BENCHMARKS_HPP
#define PBO_BENCHMARKS_HPP

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbo/errors.hpp"

namespace pbo {

/// A black-box minimization target over a box in physical coordinates.
/// Optimizers work in the normalized box [-1, 1]^d; map_action converts.
struct Problem {
  std::string name;
  int dimension = 0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd start;  // physical
  int population = 0;     // preferred individuals per generation, 0 = rule of thumb
  std::function<double(const Eigen::VectorXd&)> cost;

  void validate() const {
    if (dimension < 1) throw ConfigError(name + ": dimension must be positive");
    if (lower.size() != dimension || upper.size() != dimension || start.size() != dimension)
      throw ConfigError(name + ": bounds/start dimension mismatch");
    for (int i = 0; i < dimension; ++i) {
      if (!(lower[i] < upper[i])) throw ConfigError(name + ": empty bound interval");
      if (start[i] < lower[i] || start[i] > upper[i])
        throw ConfigError(name + ": start point outside bounds");
    }
    if (!cost) throw ConfigError(name + ": missing cost function");
  }
};

inline Eigen::VectorXd map_action(const Eigen::VectorXd& a, const Problem& p) {
  if (a.size() != p.dimension) throw InputError("action dimension mismatch");
  Eigen::VectorXd x(p.dimension);
  for (int i = 0; i < p.dimension; ++i) {
    if (!(a[i] >= -1.0 && a[i] <= 1.0)) throw InputError("action outside [-1, 1]");
    x[i] = p.lower[i] + 0.5 * (a[i] + 1.0) * (p.upper[i] - p.lower[i]);
  }
  return x;
}

inline Eigen::VectorXd unmap_action(const Eigen::VectorXd& x, const Problem& p) {
  if (x.size() != p.dimension) throw InputError("point dimension mismatch");
  Eigen::VectorXd a(p.dimension);
  for (int i = 0; i < p.dimension; ++i)
    a[i] = 2.0 * (x[i] - p.lower[i]) / (p.upper[i] - p.lower[i]) - 1.0;
  return a;
}

namespace functions {

inline double parabola(const Eigen::VectorXd& x) { return x[0] * x[0] + x[1] * x[1]; }

inline double rosenbrock(const Eigen::VectorXd& x) {
  double f = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = 1.0 - x[i];
    const double b = x[i + 1] - x[i] * x[i];
    f += a * a + 100.0 * b * b;
  }
  return f;
}

// Constants as printed: 5.1/(4 pi^2), 5/pi, 10(1 - 1/(8 pi)).
inline double branin(const Eigen::VectorXd& x) {
  constexpr double pi = 3.14159265358979323846;
  const double t = x[1] - 5.1 / (4.0 * pi * pi) * x[0] * x[0] + 5.0 / pi * x[0] - 6.0;
  return t * t + 10.0 * (1.0 - 1.0 / (8.0 * pi)) * std::cos(x[0]) + 10.0;
}

// Two-dimensional variant with x2 / sqrt(2) in the second cosine.
inline double griewank(const Eigen::VectorXd& x) {
  return 1.0 + (x[0] * x[0] + x[1] * x[1]) / 4000.0 -
         std::cos(x[0]) * std::cos(x[1] / std::sqrt(2.0));
}

}  // namespace functions

inline Problem make_box_problem(std::string name, int d, double lo, double hi,
                                Eigen::VectorXd start,
                                std::function<double(const Eigen::VectorXd&)> f) {
  Problem p;
  p.name = std::move(name);
  p.dimension = d;
  p.lower = Eigen::VectorXd::Constant(d, lo);
  p.upper = Eigen::VectorXd::Constant(d, hi);
  p.start = std::move(start);
  p.cost = std::move(f);
  p.validate();
  return p;
}

inline Problem parabola_problem() {
  return make_box_problem("parabola", 2, -5.0, 5.0, Eigen::Vector2d(2.5, 2.5),
                          functions::parabola);
}

inline Problem rosenbrock_problem(int d) {
  Eigen::VectorXd start = Eigen::VectorXd::Zero(d);
  if (d == 2) start = Eigen::Vector2d(-1.0, 0.0);
  return make_box_problem("rosenbrock" + std::to_string(d), d, -2.0, 2.0, start,
                          functions::rosenbrock);
}

inline Problem branin_problem() {
  return make_box_problem("branin", 2, 0.0, 15.0, Eigen::Vector2d(7.5, 7.5),
                          functions::branin);
}

inline Problem griewank_problem() {
  return make_box_problem("griewank", 2, -10.0, 10.0, Eigen::Vector2d(5.0, 5.0),
                          functions::griewank);
}

inline std::vector<std::string> benchmark_names() {
  return {"parabola", "rosenbrock2", "rosenbrock5", "rosenbrock10", "branin", "griewank"};
}

inline Problem make_benchmark(const std::string& name) {
  if (name == "parabola") return parabola_problem();
  if (name == "rosenbrock2") return rosenbrock_problem(2);
  if (name == "rosenbrock5") return rosenbrock_problem(5);
  if (name == "rosenbrock10") return rosenbrock_problem(10);
  if (name == "branin") return branin_problem();
  if (name == "griewank") return griewank_problem();
  throw ConfigError("unknown problem '" + name + "'");
}

}  // namespace pbo

#endif  // PBO_BENCHMARKS_HPP
