#ifndef PBO_SEARCH_DISTRIBUTION_HPP
#define PBO_SEARCH_DISTRIBUTION_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbo/errors.hpp"
#include "pbo/random.hpp"

namespace pbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;

inline int angle_count(int d) { return d * (d - 1) / 2; }

// Angles are stored row by row: row i (i >= 1) owns i consecutive entries
// starting at i(i-1)/2.
inline int angle_index(int row, int k) { return row * (row - 1) / 2 + k; }

/// Lower-triangular hypersphere matrix whose rows are unit vectors, so
/// B * B^T is a valid correlation matrix for any angles in [0, pi].
inline Matrix elementary_matrix(const Vector& angles, int d) {
  if (d < 1) throw InputError("dimension must be positive");
  if (angles.size() != angle_count(d))
    throw InputError("expected " + std::to_string(angle_count(d)) + " angles, got " +
                     std::to_string(angles.size()));
  for (Eigen::Index i = 0; i < angles.size(); ++i) {
    if (!(angles[i] >= 0.0 && angles[i] <= kPi))
      throw DomainError("correlative angle outside [0, pi]");
  }
  Matrix b = Matrix::Zero(d, d);
  b(0, 0) = 1.0;
  for (int i = 1; i < d; ++i) {
    double sin_prod = 1.0;
    for (int j = 0; j < i; ++j) {
      const double phi = angles[angle_index(i, j)];
      b(i, j) = std::cos(phi) * sin_prod;
      sin_prod *= std::sin(phi);
    }
    b(i, i) = sin_prod;
  }
  return b;
}

/// C = S (B B^T) S with S = diag(stddev).
inline Matrix build_covariance(const Vector& stddev, const Vector& angles) {
  for (Eigen::Index i = 0; i < stddev.size(); ++i) {
    if (!(stddev[i] > 0.0)) throw DomainError("standard deviations must be positive");
  }
  const int d = static_cast<int>(stddev.size());
  const Matrix b = elementary_matrix(angles, d);
  const Matrix corr = b * b.transpose();
  Matrix c = stddev.asDiagonal() * corr * stddev.asDiagonal();
  // Exact symmetry; the product is symmetric only up to rounding.
  return 0.5 * (c + c.transpose());
}

struct CholeskyFactor {
  Matrix lower;
  double jitter = 0.0;
};

/// Cholesky factor of c, adding diagonal jitter 1e-12, 1e-11, ..., 1e-6 when
/// the plain factorization fails on a numerically semidefinite matrix.
inline CholeskyFactor cholesky_with_jitter(const Matrix& c) {
  auto try_factor = [&](double jitter, CholeskyFactor& out) {
    Matrix a = c;
    a.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) return false;
    Matrix l = llt.matrixL();
    for (Eigen::Index i = 0; i < l.rows(); ++i)
      if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
    out.lower = std::move(l);
    out.jitter = jitter;
    return true;
  };
  CholeskyFactor f;
  if (try_factor(0.0, f)) return f;
  for (double jitter = 1e-12; jitter <= 1.0001e-6; jitter *= 10.0) {
    if (try_factor(jitter, f)) return f;
  }
  throw NumericalError("covariance factorization failed after jitter escalation");
}

/// Normal search distribution N(mean, C(stddev, angles)) with its factor.
struct DistributionParams {
  Vector mean;
  Vector stddev;
  Vector angles;
  Matrix covariance;
  CholeskyFactor factor;

  int dimension() const { return static_cast<int>(mean.size()); }

  static DistributionParams make(Vector mean, Vector stddev, Vector angles) {
    if (stddev.size() != mean.size())
      throw InputError("mean and stddev lengths differ");
    DistributionParams p;
    p.covariance = build_covariance(stddev, angles);
    p.factor = cholesky_with_jitter(p.covariance);
    p.mean = std::move(mean);
    p.stddev = std::move(stddev);
    p.angles = std::move(angles);
    return p;
  }
};

struct ActionSample {
  Vector raw;
  Vector clipped;
  double log_prob = 0.0;
};

inline Vector clip_unit(const Vector& x) { return x.cwiseMax(-1.0).cwiseMin(1.0); }

inline double log_density(const DistributionParams& p, const Vector& x) {
  if (x.size() != p.dimension()) throw InputError("point dimension mismatch");
  const Matrix& l = p.factor.lower;
  const Vector y = l.triangularView<Eigen::Lower>().solve(x - p.mean);
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const double value =
      -0.5 * (p.dimension() * std::log(2.0 * kPi) + log_det + y.squaredNorm());
  if (!std::isfinite(value)) throw NumericalError("non-finite log-density");
  return value;
}

/// Maps a standard normal draw z to an action sample.
inline ActionSample draw(const DistributionParams& p, const Vector& z) {
  ActionSample s;
  s.raw = p.mean + p.factor.lower * z;
  s.clipped = clip_unit(s.raw);
  s.log_prob = log_density(p, s.raw);
  return s;
}

inline Vector standard_normal(int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(d);
  for (int i = 0; i < d; ++i) z[i] = normal(rng);
  return z;
}

inline std::vector<ActionSample> sample(const DistributionParams& p, int count, Rng& rng) {
  std::vector<ActionSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(draw(p, standard_normal(p.dimension(), rng)));
  return out;
}

/// Gradient of a log-density sum with respect to (mean, stddev, angles).
struct LogDensityGradient {
  Vector mean;
  Vector stddev;
  Vector angles;
};

/// Gradient of sum_i weights[i] * log N(points[i]; mean, C) with respect to
/// the distribution parameters. The weighted terms are aggregated before the
/// chain rule through C = S B B^T S, so the cost is one inverse per call.
inline LogDensityGradient weighted_log_density_gradient(const DistributionParams& p,
                                                        std::span<const Vector> points,
                                                        std::span<const double> weights) {
  if (points.size() != weights.size()) throw InputError("points and weights differ in length");
  const int d = p.dimension();
  LogDensityGradient g;
  g.mean = Vector::Zero(d);
  g.stddev = Vector::Zero(d);
  g.angles = Vector::Zero(angle_count(d));

  const Matrix& l = p.factor.lower;
  Matrix c_inv = Matrix::Identity(d, d);
  l.triangularView<Eigen::Lower>().solveInPlace(c_inv);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(c_inv);

  double weight_sum = 0.0;
  Vector weighted_residual = Vector::Zero(d);
  Matrix scatter = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const Vector r = points[i] - p.mean;
    weight_sum += weights[i];
    weighted_residual += weights[i] * r;
    scatter.noalias() += weights[i] * r * r.transpose();
  }
  if (weight_sum == 0.0 && weighted_residual.isZero(0.0)) return g;

  g.mean = c_inv * weighted_residual;
  // dL/dC, symmetric.
  const Matrix dc = 0.5 * (c_inv * scatter * c_inv - weight_sum * c_inv);

  const Matrix b = elementary_matrix(p.angles, d);
  const Matrix corr = b * b.transpose();
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += dc(i, k) * corr(i, k) * p.stddev[k];
    g.stddev[i] = 2.0 * acc;
  }
  const Matrix dcorr = p.stddev.asDiagonal() * dc * p.stddev.asDiagonal();
  const Matrix db = 2.0 * dcorr * b;

  for (int i = 1; i < d; ++i) {
    const int base = angle_index(i, 0);
    auto s = [&](int k) { return std::sin(p.angles[base + k]); };
    auto c = [&](int k) { return std::cos(p.angles[base + k]); };
    for (int a = 0; a < i; ++a) {
      double acc = 0.0;
      // Entries b(i, j) for j >= a depend on angle a of row i.
      for (int j = a; j <= i; ++j) {
        double deriv = 1.0;
        for (int k = 0; k < std::min(j, i); ++k) deriv *= (k == a) ? c(k) : s(k);
        if (j < i) deriv *= (j == a) ? -s(j) : c(j);
        acc += db(i, j) * deriv;
      }
      g.angles[base + a] = acc;
    }
  }
  return g;
}

}  // namespace pbo

#endif  // PBO_SEARCH_DISTRIBUTION_HPP
