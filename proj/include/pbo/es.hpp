#ifndef PBO_ES_HPP
#define PBO_ES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pbo/errors.hpp"
#include "pbo/random.hpp"
#include "pbo/search_distribution.hpp"

namespace pbo::es {

/// Indices of `costs` sorted ascending; ties keep candidate order.
inline std::vector<std::size_t> rank_by_cost(std::span<const double> costs) {
  std::vector<std::size_t> idx(costs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
  return idx;
}

inline void check_population(std::span<const Vector> candidates, std::span<const double> costs,
                             int lambda, int d) {
  if (static_cast<int>(candidates.size()) != lambda || static_cast<int>(costs.size()) != lambda)
    throw InputError("expected " + std::to_string(lambda) + " candidates and costs");
  for (const auto& c : candidates)
    if (c.size() != d) throw InputError("candidate dimension mismatch");
  for (double c : costs)
    if (std::isnan(c)) throw NumericalError("NaN cost");
}

/// Isotropic (mu, lambda)-ES with multiplicative step-size control: x1.2
/// when the best offspring beats the previous generation's best, x0.82
/// otherwise.
class MuLambdaEs {
 public:
  static constexpr double kIncrease = 1.2;
  static constexpr double kDecrease = 0.82;

  MuLambdaEs(Vector mean, double step, int lambda, int mu = 0)
      : mean_(std::move(mean)), step_(step), lambda_(lambda), mu_(mu > 0 ? mu : lambda / 2) {
    if (lambda_ < 1) throw ConfigError("lambda must be >= 1");
    mu_ = std::max(mu_, 1);
    if (mu_ > lambda_) throw ConfigError("mu must not exceed lambda");
    if (!(step_ > 0.0)) throw ConfigError("step size must be positive");
  }

  const Vector& mean() const { return mean_; }
  double step() const { return step_; }
  int lambda() const { return lambda_; }
  int mu() const { return mu_; }
  int generation() const { return generation_; }
  double parent_cost() const { return parent_cost_; }

  std::vector<Vector> sample(std::uint64_t seed) const {
    std::vector<Vector> out;
    out.reserve(lambda_);
    for (int i = 0; i < lambda_; ++i) {
      Rng rng = substream(seed, StreamTag::kSample, static_cast<std::uint64_t>(generation_),
                          static_cast<std::uint64_t>(i));
      out.push_back(mean_ + step_ * standard_normal(static_cast<int>(mean_.size()), rng));
    }
    return out;
  }

  void update(std::span<const Vector> candidates, std::span<const double> costs) {
    check_population(candidates, costs, lambda_, static_cast<int>(mean_.size()));
    const auto order = rank_by_cost(costs);
    Vector next = Vector::Zero(mean_.size());
    for (int i = 0; i < mu_; ++i) next += candidates[order[i]];
    mean_ = next / static_cast<double>(mu_);
    const double best = costs[order[0]];
    step_ *= best < parent_cost_ ? kIncrease : kDecrease;
    parent_cost_ = best;
    ++generation_;
  }

 private:
  Vector mean_;
  double step_;
  int lambda_;
  int mu_;
  int generation_ = 0;
  double parent_cost_ = std::numeric_limits<double>::infinity();
};

/// w_i proportional to ln(mu + 1/2) - ln(i), normalized to sum to one.
inline Vector recombination_weights(int mu) {
  if (mu < 1) throw InputError("mu must be >= 1");
  Vector w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(static_cast<double>(i + 1));
  return w / w.sum();
}

/// Default CMA-ES strategy parameters for dimension n and population lambda.
struct CmaConstants {
  int dimension = 0;
  int lambda = 0;
  int mu = 0;
  Vector weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;  // E||N(0, I)||

  static CmaConstants defaults(int n, int lambda) {
    if (n < 1 || lambda < 2) throw ConfigError("CMA-ES needs n >= 1 and lambda >= 2");
    CmaConstants k;
    k.dimension = n;
    k.lambda = lambda;
    k.mu = lambda / 2;
    k.weights = recombination_weights(k.mu);
    k.mu_eff = 1.0 / k.weights.squaredNorm();
    const double nd = static_cast<double>(n);
    k.c_sigma = (k.mu_eff + 2.0) / (nd + k.mu_eff + 5.0);
    k.d_sigma =
        1.0 + 2.0 * std::max(0.0, std::sqrt((k.mu_eff - 1.0) / (nd + 1.0)) - 1.0) + k.c_sigma;
    k.c_c = (4.0 + k.mu_eff / nd) / (nd + 4.0 + 2.0 * k.mu_eff / nd);
    k.c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + k.mu_eff);
    k.c_mu = std::min(1.0 - k.c_1, 2.0 * (k.mu_eff - 2.0 + 1.0 / k.mu_eff) /
                                       ((nd + 2.0) * (nd + 2.0) + k.mu_eff));
    k.chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));
    return k;
  }
};

/// CMA-ES with cumulative step-size adaptation and the rank-1 / rank-mu
/// covariance update C <- (1 - c1 - cmu) C + cmu C_mu + c1 C_1.
class CmaEs {
 public:
  CmaEs(Vector mean, double step, CmaConstants constants)
      : k_(std::move(constants)), mean_(std::move(mean)), step_(step) {
    const int n = static_cast<int>(mean_.size());
    if (n != k_.dimension) throw ConfigError("constants dimension mismatch");
    if (!(step_ > 0.0)) throw ConfigError("step size must be positive");
    cov_ = Matrix::Identity(n, n);
    p_sigma_ = Vector::Zero(n);
    p_c_ = Vector::Zero(n);
    decompose();
  }

  CmaEs(Vector mean, double step, int lambda)
      : CmaEs(mean, step, CmaConstants::defaults(static_cast<int>(mean.size()), lambda)) {}

  const CmaConstants& constants() const { return k_; }
  CmaConstants& constants() { return k_; }
  const Vector& mean() const { return mean_; }
  double step() const { return step_; }
  const Matrix& covariance() const { return cov_; }
  const Vector& sigma_path() const { return p_sigma_; }
  const Vector& covariance_path() const { return p_c_; }
  int generation() const { return generation_; }
  int lambda() const { return k_.lambda; }

  std::vector<Vector> sample(std::uint64_t seed) const {
    std::vector<Vector> out;
    out.reserve(k_.lambda);
    for (int i = 0; i < k_.lambda; ++i) {
      Rng rng = substream(seed, StreamTag::kSample, static_cast<std::uint64_t>(generation_),
                          static_cast<std::uint64_t>(i));
      const Vector z = standard_normal(k_.dimension, rng);
      out.push_back(mean_ + step_ * (basis_ * scales_.asDiagonal() * z));
    }
    return out;
  }

  void update(std::span<const Vector> candidates, std::span<const double> costs) {
    const int n = k_.dimension;
    check_population(candidates, costs, k_.lambda, n);
    const auto order = rank_by_cost(costs);

    std::vector<Vector> y(k_.mu);
    Vector y_w = Vector::Zero(n);
    for (int i = 0; i < k_.mu; ++i) {
      y[i] = (candidates[order[i]] - mean_) / step_;
      y_w += k_.weights[i] * y[i];
    }
    mean_ += step_ * y_w;

    const Vector c_inv_sqrt_y = basis_ * (basis_.transpose() * y_w).cwiseQuotient(scales_);
    p_sigma_ = (1.0 - k_.c_sigma) * p_sigma_ +
               std::sqrt(k_.c_sigma * (2.0 - k_.c_sigma) * k_.mu_eff) * c_inv_sqrt_y;
    const double ps_norm = p_sigma_.norm();
    const double gen = static_cast<double>(generation_ + 1);
    const bool h_sigma =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - k_.c_sigma, 2.0 * gen)) <
        (1.4 + 2.0 / (n + 1.0)) * k_.chi_n;
    p_c_ = (1.0 - k_.c_c) * p_c_ +
           (h_sigma ? std::sqrt(k_.c_c * (2.0 - k_.c_c) * k_.mu_eff) : 0.0) * y_w;

    Matrix rank_mu = Matrix::Zero(n, n);
    for (int i = 0; i < k_.mu; ++i) rank_mu.noalias() += k_.weights[i] * y[i] * y[i].transpose();
    const double delta_h = h_sigma ? 0.0 : k_.c_c * (2.0 - k_.c_c);
    cov_ = (1.0 - k_.c_1 - k_.c_mu + k_.c_1 * delta_h) * cov_ +
           k_.c_1 * p_c_ * p_c_.transpose() + k_.c_mu * rank_mu;
    cov_ = 0.5 * (cov_ + cov_.transpose());

    step_ *= std::exp(k_.c_sigma / k_.d_sigma * (ps_norm / k_.chi_n - 1.0));
    ++generation_;
    decompose();
  }

 private:
  static constexpr double kEigenFloor = 1e-14;

  void decompose() {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_);
    if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    Vector ev = eig.eigenvalues();
    if (ev.minCoeff() < kEigenFloor) {
      ev = ev.cwiseMax(kEigenFloor);
      cov_ = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
      cov_ = 0.5 * (cov_ + cov_.transpose());
    }
    basis_ = eig.eigenvectors();
    scales_ = ev.cwiseSqrt();
  }

  CmaConstants k_;
  Vector mean_;
  double step_;
  Matrix cov_;
  Matrix basis_;
  Vector scales_;
  Vector p_sigma_;
  Vector p_c_;
  int generation_ = 0;
};

}  // namespace pbo::es

#endif  // PBO_ES_HPP
