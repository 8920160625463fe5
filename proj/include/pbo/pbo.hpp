#ifndef PBO_PBO_HPP
#define PBO_PBO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbo/errors.hpp"
#include "pbo/neural_net.hpp"
#include "pbo/random.hpp"
#include "pbo/search_distribution.hpp"

namespace pbo {

/// Meta-parameters of one of the three policy networks.
struct NetworkConfig {
  double learning_rate = 5e-3;
  int generations = 1;  // history length n_g
  int epochs = 1;
  int minibatches = 1;
  std::vector<int> hidden{2, 2, 2};
};

struct PboConfig {
  NetworkConfig mean{5e-3, 1, 128, 1, {2, 2, 2}};
  NetworkConfig stddev{5e-3, 8, 16, 4, {2, 2, 2}};
  NetworkConfig correlation{1e-3, 16, 16, 8, {2, 2, 2}};
  int individuals = 0;  // 0 selects population_size(d)
  double alpha = 0.35;
  bool off_policy_importance = false;
  std::vector<double> input_state{1.0, 1.0};
  double output_gain = 1e-2;

  void validate() const {
    for (const NetworkConfig* n : {&mean, &stddev, &correlation}) {
      if (!(n->learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
      if (n->generations < 1) throw ConfigError("history generations must be >= 1");
      if (n->epochs < 1) throw ConfigError("epochs must be >= 1");
      if (n->minibatches < 1) throw ConfigError("mini-batches must be >= 1");
      for (int h : n->hidden)
        if (h < 1) throw ConfigError("hidden layer widths must be positive");
    }
    if (individuals < 0) throw ConfigError("individuals must be >= 1 (or 0 for auto)");
    if (!(alpha > 0.0)) throw ConfigError("decay rate alpha must be positive");
    if (input_state.empty()) throw ConfigError("input state must be non-empty");
    if (!(output_gain > 0.0)) throw ConfigError("output gain must be positive");
  }
};

inline constexpr double kStddevFloor = 1e-6;

inline int population_size(int d) {
  if (d < 1) throw InputError("dimension must be >= 1");
  return static_cast<int>(std::floor(4.0 + 3.0 * std::log(static_cast<double>(d))));
}

/// Per-generation standardization clipped at zero. Degenerate spread yields
/// an all-zero vector.
inline std::vector<double> whiten_rewards(std::span<const double> rewards) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd >= 1e-12)) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    out[i] = std::max((rewards[i] - mean) / sd, 0.0);
  return out;
}

inline double decay_factor(int d, double alpha) {
  return 1.0 - std::exp(-alpha * static_cast<double>(d));
}

inline double decayed_advantage(int age, double advantage, double eta) {
  return std::pow(eta, age) * advantage;
}

struct GenerationRecord {
  int generation = 0;
  std::vector<ActionSample> samples;
  std::vector<double> rewards;
  std::vector<double> advantages;
  DistributionParams behaviour;  // policy that generated the samples
};

/// Fixed-capacity store of the most recent generations, newest last.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t capacity = 1) : capacity_(std::max<std::size_t>(1, capacity)) {}

  void push(GenerationRecord r) {
    records_.push_back(std::move(r));
    while (records_.size() > capacity_) records_.pop_front();
  }
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }

  // age 0 is the newest record.
  const GenerationRecord& at_age(std::size_t age) const {
    return records_.at(records_.size() - 1 - age);
  }

 private:
  std::size_t capacity_;
  std::deque<GenerationRecord> records_;
};

/// One training sample: the raw action, its decayed advantage and its
/// log-density under the behaviour policy.
struct Experience {
  Vector raw;
  double advantage = 0.0;
  double behaviour_log_prob = 0.0;
};

inline double pbo_loss(std::span<const Experience> batch, const DistributionParams& policy) {
  if (batch.empty()) throw InputError("empty batch");
  double sum = 0.0;
  for (const auto& e : batch) {
    if (e.advantage == 0.0) continue;
    sum += log_density(policy, e.raw) * e.advantage;
  }
  return sum / static_cast<double>(batch.size());
}

/// Importance ratios exp(log pi_theta - log pi_b); an exponent above this
/// bound counts as overflow and the record is dropped.
inline constexpr double kMaxLogRatio = 700.0;

struct OffPolicyTerms {
  std::vector<double> weights;  // ratio * advantage / batch size
  double loss = 0.0;
  int skipped = 0;
};

inline OffPolicyTerms off_policy_terms(std::span<const Experience> batch,
                                       const DistributionParams& policy) {
  if (batch.empty()) throw InputError("empty batch");
  OffPolicyTerms t;
  t.weights.assign(batch.size(), 0.0);
  const double n = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double log_ratio = log_density(policy, batch[i].raw) - batch[i].behaviour_log_prob;
    if (!(log_ratio <= kMaxLogRatio)) {
      ++t.skipped;
      continue;
    }
    const double w = std::exp(log_ratio) * batch[i].advantage;
    t.weights[i] = w / n;
    t.loss += w / n;
  }
  return t;
}

inline double off_policy_loss(std::span<const Experience> batch, const DistributionParams& policy) {
  return off_policy_terms(batch, policy).loss;
}

/// Gradient of the (on- or off-policy) loss with respect to the distribution
/// parameters. Advantages and importance weights are held constant.
inline LogDensityGradient loss_gradient(std::span<const Experience> batch,
                                        const DistributionParams& policy, bool off_policy,
                                        int* skipped = nullptr) {
  std::vector<Vector> points;
  std::vector<double> weights;
  points.reserve(batch.size());
  weights.reserve(batch.size());
  std::vector<double> w;
  if (off_policy) {
    auto t = off_policy_terms(batch, policy);
    if (skipped) *skipped += t.skipped;
    w = std::move(t.weights);
  } else {
    w.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      w[i] = batch[i].advantage / static_cast<double>(batch.size());
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (w[i] == 0.0) continue;
    points.push_back(batch[i].raw);
    weights.push_back(w[i]);
  }
  return weighted_log_density_gradient(policy, points, weights);
}

/// The three independent policy networks: mean (tanh output), standard
/// deviation (sigmoid output) and correlation coefficients (sigmoid output,
/// absent when d = 1).
struct PolicyTriple {
  nn::Network mean;
  nn::Network stddev;
  std::optional<nn::Network> correlation;
};

inline PolicyTriple make_policy(int d, const PboConfig& cfg, std::uint64_t seed) {
  const int inputs = static_cast<int>(cfg.input_state.size());
  PolicyTriple p;
  p.mean = nn::init_network(
      nn::mlp_spec(inputs, cfg.mean.hidden, d, nn::Activation::kTanh, cfg.output_gain), seed, 0);
  p.stddev = nn::init_network(
      nn::mlp_spec(inputs, cfg.stddev.hidden, d, nn::Activation::kSigmoid, cfg.output_gain),
      seed, 1);
  if (angle_count(d) > 0)
    p.correlation = nn::init_network(nn::mlp_spec(inputs, cfg.correlation.hidden, angle_count(d),
                                                  nn::Activation::kSigmoid, cfg.output_gain),
                                     seed, 2);
  return p;
}

inline DistributionParams policy_forward(const PolicyTriple& nets, const Vector& s0) {
  Vector m = nn::forward(nets.mean, s0);
  Vector sigma = nn::forward(nets.stddev, s0).cwiseMax(kStddevFloor);
  Vector phi = nets.correlation ? Vector(kPi * nn::forward(*nets.correlation, s0)) : Vector(0);
  return DistributionParams::make(std::move(m), std::move(sigma), std::move(phi));
}

/// Policy-based optimizer over the normalized box [-1, 1]^d. Rewards are
/// maximized.
class PboAgent {
 public:
  enum class Net { kStddev = 0, kCorrelation = 1, kMean = 2 };

  PboAgent(PboConfig cfg, int dimension, const Vector& start, std::uint64_t seed)
      : cfg_(std::move(cfg)), d_(dimension), seed_(seed) {
    cfg_.validate();
    if (d_ < 1) throw ConfigError("dimension must be >= 1");
    if (start.size() != d_) throw ConfigError("start point dimension mismatch");
    n_i_ = cfg_.individuals > 0 ? cfg_.individuals : population_size(d_);
    eta_ = decay_factor(d_, cfg_.alpha);
    s0_ = Eigen::Map<const Vector>(cfg_.input_state.data(),
                                   static_cast<Eigen::Index>(cfg_.input_state.size()));
    nets_ = make_policy(d_, cfg_, seed_);
    // Encode the start point in the mean-network output bias.
    auto& out = nets_.mean.layers().back();
    for (int i = 0; i < d_; ++i) {
      const double m0 = std::clamp(start[i], -1.0 + 1e-9, 1.0 - 1e-9);
      out.bias[i] = std::atanh(m0);
    }
    adam_[0] = nn::AdamState::for_network(nets_.stddev, cfg_.stddev.learning_rate);
    if (nets_.correlation)
      adam_[1] = nn::AdamState::for_network(*nets_.correlation, cfg_.correlation.learning_rate);
    adam_[2] = nn::AdamState::for_network(nets_.mean, cfg_.mean.learning_rate);
    const int capacity = std::max({cfg_.mean.generations, cfg_.stddev.generations,
                                   cfg_.correlation.generations});
    history_ = HistoryBuffer(static_cast<std::size_t>(capacity));
  }

  int dimension() const { return d_; }
  int individuals() const { return n_i_; }
  int generation() const { return generation_; }
  double eta() const { return eta_; }
  const PboConfig& config() const { return cfg_; }
  const PolicyTriple& networks() const { return nets_; }
  PolicyTriple& networks() { return nets_; }
  const HistoryBuffer& history() const { return history_; }
  int skipped_importance_records() const { return skipped_; }

  DistributionParams policy() const { return policy_forward(nets_, s0_); }

  /// Draws this generation's individuals; each uses its own random substream.
  std::vector<ActionSample> ask() {
    pending_policy_ = policy();
    std::vector<ActionSample> out;
    out.reserve(n_i_);
    for (int i = 0; i < n_i_; ++i) {
      Rng rng = substream(seed_, StreamTag::kSample, static_cast<std::uint64_t>(generation_),
                          static_cast<std::uint64_t>(i));
      out.push_back(draw(*pending_policy_, standard_normal(d_, rng)));
    }
    pending_ = out;
    return out;
  }

  /// Consumes the rewards of the samples returned by the last ask() and
  /// updates the networks.
  GenerationRecord tell(std::span<const double> rewards) {
    if (!pending_policy_) throw InputError("tell() without a preceding ask()");
    if (rewards.size() != pending_.size())
      throw InputError("expected " + std::to_string(pending_.size()) + " rewards");
    for (double r : rewards)
      if (!std::isfinite(r)) throw NumericalError("non-finite reward");
    GenerationRecord rec;
    rec.generation = generation_;
    rec.samples = std::move(pending_);
    rec.rewards.assign(rewards.begin(), rewards.end());
    rec.advantages = whiten_rewards(rewards);
    rec.behaviour = std::move(*pending_policy_);
    pending_policy_.reset();
    pending_.clear();
    history_.push(rec);

    const bool any_advantage =
        std::any_of(rec.advantages.begin(), rec.advantages.end(), [](double a) { return a > 0.0; });
    if (any_advantage) {
      train(Net::kStddev);
      if (nets_.correlation) train(Net::kCorrelation);
      train(Net::kMean);
    }
    ++generation_;
    return rec;
  }

  /// ask, evaluate, tell. `evaluate` receives the clipped actions and returns
  /// one reward per action.
  GenerationRecord generation_step(
      const std::function<std::vector<double>(const std::vector<Vector>&)>& evaluate) {
    auto samples = ask();
    std::vector<Vector> actions;
    actions.reserve(samples.size());
    for (const auto& s : samples) actions.push_back(s.clipped);
    std::vector<double> rewards;
    try {
      rewards = evaluate(actions);
    } catch (const std::exception& e) {
      pending_policy_.reset();
      pending_.clear();
      throw std::runtime_error("generation " + std::to_string(generation_) +
                               ": reward evaluation failed: " + e.what());
    }
    return tell(rewards);
  }

  /// Experiences visible to a network with history length n_g, advantages
  /// decayed by age.
  std::vector<Experience> experiences(int history_generations) const {
    std::vector<Experience> out;
    const std::size_t used =
        std::min<std::size_t>(history_.size(), static_cast<std::size_t>(history_generations));
    for (std::size_t age = 0; age < used; ++age) {
      const auto& rec = history_.at_age(age);
      for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        Experience e;
        e.raw = rec.samples[i].raw;
        e.advantage = decayed_advantage(static_cast<int>(age), rec.advantages[i], eta_);
        e.behaviour_log_prob = rec.samples[i].log_prob;
        out.push_back(std::move(e));
      }
    }
    return out;
  }

  /// Mini-batch size: (available / n_b) rounded down to a multiple of n_i,
  /// never below n_i. Only whole batches are used.
  static int minibatch_size(int available, int minibatches, int individuals) {
    int size = (available / minibatches) / individuals * individuals;
    size = std::max(size, individuals);
    return std::min(size, available);
  }

 private:
  const NetworkConfig& net_config(Net which) const {
    switch (which) {
      case Net::kStddev:
        return cfg_.stddev;
      case Net::kCorrelation:
        return cfg_.correlation;
      case Net::kMean:
        break;
    }
    return cfg_.mean;
  }

  nn::Network& network(Net which) {
    switch (which) {
      case Net::kStddev:
        return nets_.stddev;
      case Net::kCorrelation:
        return *nets_.correlation;
      case Net::kMean:
        break;
    }
    return nets_.mean;
  }

  Vector output_gradient(Net which, const LogDensityGradient& g) const {
    switch (which) {
      case Net::kStddev: {
        Vector out = g.stddev;
        // The floor is flat; no gradient flows through floored entries.
        const Vector raw = nn::forward(nets_.stddev, s0_);
        for (Eigen::Index i = 0; i < out.size(); ++i)
          if (raw[i] < kStddevFloor) out[i] = 0.0;
        return out;
      }
      case Net::kCorrelation:
        return kPi * g.angles;
      case Net::kMean:
        break;
    }
    return g.mean;
  }

  void train(Net which) {
    const NetworkConfig& nc = net_config(which);
    std::vector<Experience> data = experiences(nc.generations);
    const int available = static_cast<int>(data.size());
    if (available == 0) return;
    const int batch = minibatch_size(available, nc.minibatches, n_i_);
    const int batches = std::min(nc.minibatches, available / batch);
    nn::AdamState& adam = adam_[static_cast<int>(which)];
    std::vector<std::size_t> order(data.size());
    std::vector<Experience> mb;
    for (int epoch = 0; epoch < nc.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng = substream(seed_, StreamTag::kShuffle, static_cast<std::uint64_t>(generation_),
                          static_cast<std::uint64_t>(which) * 1000003ULL +
                              static_cast<std::uint64_t>(epoch));
      std::shuffle(order.begin(), order.end(), rng);
      for (int b = 0; b < batches; ++b) {
        mb.clear();
        for (int k = 0; k < batch; ++k) mb.push_back(data[order[b * batch + k]]);
        const DistributionParams p = policy();
        const LogDensityGradient g = loss_gradient(mb, p, cfg_.off_policy_importance, &skipped_);
        const Vector out_grad = output_gradient(which, g);
        if (out_grad.isZero(0.0)) continue;
        nn::Network& net = network(which);
        const Vector grad = nn::backward(net, s0_, out_grad);
        nn::adam_step(net, grad, adam);
      }
    }
  }

  PboConfig cfg_;
  int d_;
  std::uint64_t seed_;
  int n_i_ = 0;
  double eta_ = 0.0;
  Vector s0_;
  PolicyTriple nets_;
  nn::AdamState adam_[3];
  HistoryBuffer history_;
  int generation_ = 0;
  int skipped_ = 0;
  std::optional<DistributionParams> pending_policy_;
  std::vector<ActionSample> pending_;
};

}  // namespace pbo

#endif  // PBO_PBO_HPP
