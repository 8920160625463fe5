#ifndef PBO_NEURAL_NET_HPP
#define PBO_NEURAL_NET_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbo/errors.hpp"
#include "pbo/random.hpp"

namespace pbo::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { kTanh, kSigmoid, kIdentity };

struct LayerSpec {
  int input_size = 0;
  int output_size = 0;
  Activation activation = Activation::kTanh;
  double init_gain = 1.0;
};

struct Layer {
  Matrix weights;  // output_size x input_size
  Vector bias;
  Activation activation = Activation::kTanh;
};

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::kIdentity:
      break;
  }
  return x;
}

// Derivative expressed through the activation's output value y = f(x).
inline double activate_derivative(Activation a, double y) {
  switch (a) {
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kSigmoid:
      return y * (1.0 - y);
    case Activation::kIdentity:
      break;
  }
  return 1.0;
}

/// Dense feed-forward network. Parameters are flattened layer by layer as
/// the row-major weight matrix followed by the bias vector.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      if (layers_[i].weights.cols() != layers_[i - 1].weights.rows())
        throw ConfigError("layer " + std::to_string(i) +
                          " input size does not match previous output size");
    }
    for (const auto& l : layers_) {
      if (l.bias.size() != l.weights.rows())
        throw ConfigError("bias length does not match layer output size");
    }
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  int input_size() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols());
  }
  int output_size() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.back().weights.rows());
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  Vector parameters() const {
    Vector p(parameter_count());
    Eigen::Index k = 0;
    for (const auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) p[k++] = l.weights(r, c);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) p[k++] = l.bias[r];
    }
    return p;
  }

  void set_parameters(const Vector& p) {
    if (static_cast<std::size_t>(p.size()) != parameter_count())
      throw InputError("parameter vector length mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = p[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = p[k++];
    }
  }

 private:
  std::vector<Layer> layers_;
};

/// Orthogonal matrix of shape rows x cols scaled by gain. For a non-square
/// shape the rows (or columns) are orthonormal, whichever count is smaller.
inline Matrix orthogonal_matrix(int rows, int cols, double gain, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(big, small);
  for (int c = 0; c < small; ++c)
    for (int r = 0; r < big; ++r) a(r, c) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(big, small);
  const Matrix& r = qr.matrixQR();
  for (int c = 0; c < small; ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  if (rows < cols) q.transposeInPlace();
  return gain * q;
}

inline Network init_network(const std::vector<LayerSpec>& spec, std::uint64_t seed,
                            std::uint64_t stream = 0) {
  if (spec.empty()) throw ConfigError("network spec is empty");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i].input_size <= 0 || spec[i].output_size <= 0)
      throw ConfigError("layer sizes must be positive");
    if (!(spec[i].init_gain > 0.0)) throw ConfigError("init gain must be positive");
    if (i > 0 && spec[i].input_size != spec[i - 1].output_size)
      throw ConfigError("layer " + std::to_string(i) + " input size " +
                        std::to_string(spec[i].input_size) +
                        " does not match previous output size " +
                        std::to_string(spec[i - 1].output_size));
  }
  Rng rng = substream(seed, StreamTag::kNetworkInit, stream);
  std::vector<Layer> layers;
  layers.reserve(spec.size());
  for (const auto& s : spec) {
    Layer l;
    l.weights = orthogonal_matrix(s.output_size, s.input_size, s.init_gain, rng);
    l.bias = Vector::Zero(s.output_size);
    l.activation = s.activation;
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

/// Standard policy-head layout: tanh hidden layers with unit gain and an
/// output layer with its own activation and (small) gain.
inline std::vector<LayerSpec> mlp_spec(int inputs, const std::vector<int>& hidden,
                                       int outputs, Activation output_activation,
                                       double output_gain = 1e-2) {
  std::vector<LayerSpec> spec;
  int prev = inputs;
  for (int h : hidden) {
    spec.push_back({prev, h, Activation::kTanh, 1.0});
    prev = h;
  }
  spec.push_back({prev, outputs, output_activation, output_gain});
  return spec;
}

namespace detail {

inline std::vector<Vector> forward_all(const Network& net, const Vector& input) {
  if (input.size() != net.input_size())
    throw InputError("input length " + std::to_string(input.size()) +
                     " does not match network input size " +
                     std::to_string(net.input_size()));
  std::vector<Vector> acts;
  acts.reserve(net.layers().size() + 1);
  acts.push_back(input);
  for (const auto& l : net.layers()) {
    Vector z = l.weights * acts.back() + l.bias;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = activate(l.activation, z[i]);
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace detail

inline Vector forward(const Network& net, const Vector& input) {
  return detail::forward_all(net, input).back();
}

/// Gradient of dot(forward(input), output_gradient) with respect to the
/// flattened parameters.
inline Vector backward(const Network& net, const Vector& input,
                       const Vector& output_gradient) {
  if (output_gradient.size() != net.output_size())
    throw InputError("output gradient length does not match network output size");
  const auto acts = detail::forward_all(net, input);
  const auto& layers = net.layers();

  std::vector<std::size_t> offset(layers.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    offset[i] = k;
    k += layers[i].weights.size() + layers[i].bias.size();
  }
  Vector grad(k);

  Vector delta = output_gradient;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    const Vector& out = acts[li + 1];
    const Vector& in = acts[li];
    for (Eigen::Index i = 0; i < delta.size(); ++i)
      delta[i] *= activate_derivative(l.activation, out[i]);
    Eigen::Index p = static_cast<Eigen::Index>(offset[li]);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) grad[p++] = delta[r] * in[c];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) grad[p++] = delta[r];
    if (li > 0) delta = l.weights.transpose() * delta;
  }
  return grad;
}

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_network(const Network& net, double learning_rate) {
    AdamState s;
    s.first_moment = Vector::Zero(net.parameter_count());
    s.second_moment = Vector::Zero(net.parameter_count());
    s.learning_rate = learning_rate;
    return s;
  }
};

/// One bias-corrected Adam step moving the parameters along +gradient.
inline void adam_step(Network& net, const Vector& gradient, AdamState& state) {
  if (static_cast<std::size_t>(gradient.size()) != net.parameter_count())
    throw InputError("gradient length does not match parameter count");
  if (!gradient.allFinite()) throw NumericalError("non-finite gradient, update rejected");
  if (state.first_moment.size() != gradient.size()) {
    state.first_moment = Vector::Zero(gradient.size());
    state.second_moment = Vector::Zero(gradient.size());
  }
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * gradient.cwiseProduct(gradient);
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  Vector p = net.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m_hat = state.first_moment[i] / c1;
    const double v_hat = state.second_moment[i] / c2;
    p[i] += state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  net.set_parameters(p);
}

}  // namespace pbo::nn

#endif  // PBO_NEURAL_NET_HPP
