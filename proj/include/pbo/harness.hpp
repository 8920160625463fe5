#ifndef PBO_HARNESS_HPP
#define PBO_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbo/benchmarks.hpp"
#include "pbo/errors.hpp"
#include "pbo/es.hpp"
#include "pbo/lorenz.hpp"
#include "pbo/parallel.hpp"
#include "pbo/pbo.hpp"

namespace pbo::harness {

inline std::vector<std::string> problem_names() {
  auto names = benchmark_names();
  names.push_back("lorenz_stabilizer");
  names.push_back("lorenz_oscillator");
  return names;
}

inline std::vector<std::string> optimizer_names() { return {"pbo", "es", "cmaes"}; }

inline Problem make_problem(const std::string& name) {
  if (name == "lorenz_stabilizer") return lorenz::make_problem(lorenz::Objective::kStabilizer);
  if (name == "lorenz_oscillator") return lorenz::make_problem(lorenz::Objective::kOscillator);
  return make_benchmark(name);
}

struct ExperimentConfig {
  std::string problem = "parabola";
  std::string optimizer = "pbo";
  int runs = 1;
  std::uint64_t seed = 0;
  int generations = 50;
  std::string output_dir;
  int individuals = 0;  // 0: problem preference, then the rule of thumb
  PboConfig pbo;
  double es_initial_step = 0.5;
  double cmaes_initial_step = 0.5;

  void validate() const {
    const auto problems = problem_names();
    if (std::find(problems.begin(), problems.end(), problem) == problems.end())
      throw ConfigError("unknown problem '" + problem + "'");
    const auto optimizers = optimizer_names();
    if (std::find(optimizers.begin(), optimizers.end(), optimizer) == optimizers.end())
      throw ConfigError("unknown optimizer '" + optimizer + "'");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (generations < 1) throw ConfigError("generations must be >= 1");
    if (individuals < 0) throw ConfigError("individuals must be >= 0");
    if (optimizer == "cmaes" && individuals == 1)
      throw ConfigError("cmaes needs at least 2 individuals");
    if (!(es_initial_step > 0.0) || !(cmaes_initial_step > 0.0))
      throw ConfigError("initial step sizes must be positive");
    pbo.validate();
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

inline void read_network(const json& j, NetworkConfig& n, const std::string& where) {
  reject_unknown(j, {"learning_rate", "generations", "epochs", "minibatches", "hidden"}, where);
  read(j, "learning_rate", n.learning_rate, where);
  read(j, "generations", n.generations, where);
  read(j, "epochs", n.epochs, where);
  read(j, "minibatches", n.minibatches, where);
  read(j, "hidden", n.hidden, where);
}

inline json network_json(const NetworkConfig& n) {
  return {{"learning_rate", n.learning_rate},
          {"generations", n.generations},
          {"epochs", n.epochs},
          {"minibatches", n.minibatches},
          {"hidden", n.hidden}};
}

}  // namespace detail

/// Parses a campaign document. Every key is optional; unknown keys at any
/// level are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::read;
  ExperimentConfig c;
  detail::reject_unknown(j,
                         {"problem", "optimizer", "runs", "seed", "generations", "output_dir",
                          "individuals", "pbo", "es", "cmaes"},
                         "config");
  read(j, "problem", c.problem, "config");
  read(j, "optimizer", c.optimizer, "config");
  read(j, "runs", c.runs, "config");
  read(j, "seed", c.seed, "config");
  read(j, "generations", c.generations, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "individuals", c.individuals, "config");
  if (j.contains("pbo")) {
    const auto& p = j.at("pbo");
    detail::reject_unknown(p,
                           {"alpha", "off_policy_importance", "input_state", "output_gain",
                            "mean", "stddev", "correlation"},
                           "pbo");
    read(p, "alpha", c.pbo.alpha, "pbo");
    read(p, "off_policy_importance", c.pbo.off_policy_importance, "pbo");
    read(p, "input_state", c.pbo.input_state, "pbo");
    read(p, "output_gain", c.pbo.output_gain, "pbo");
    if (p.contains("mean")) detail::read_network(p.at("mean"), c.pbo.mean, "pbo.mean");
    if (p.contains("stddev")) detail::read_network(p.at("stddev"), c.pbo.stddev, "pbo.stddev");
    if (p.contains("correlation"))
      detail::read_network(p.at("correlation"), c.pbo.correlation, "pbo.correlation");
  }
  if (j.contains("es")) {
    detail::reject_unknown(j.at("es"), {"initial_step"}, "es");
    read(j.at("es"), "initial_step", c.es_initial_step, "es");
  }
  if (j.contains("cmaes")) {
    detail::reject_unknown(j.at("cmaes"), {"initial_step"}, "cmaes");
    read(j.at("cmaes"), "initial_step", c.cmaes_initial_step, "cmaes");
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"problem", c.problem},
          {"optimizer", c.optimizer},
          {"runs", c.runs},
          {"seed", c.seed},
          {"generations", c.generations},
          {"output_dir", c.output_dir},
          {"individuals", c.individuals},
          {"pbo",
           {{"alpha", c.pbo.alpha},
            {"off_policy_importance", c.pbo.off_policy_importance},
            {"input_state", c.pbo.input_state},
            {"output_gain", c.pbo.output_gain},
            {"mean", detail::network_json(c.pbo.mean)},
            {"stddev", detail::network_json(c.pbo.stddev)},
            {"correlation", detail::network_json(c.pbo.correlation)}}},
          {"es", {{"initial_step", c.es_initial_step}}},
          {"cmaes", {{"initial_step", c.cmaes_initial_step}}}};
}

struct Individual {
  Vector action;  // normalized, clipped
  Vector point;   // physical
  double cost = 0.0;
};

struct GenerationLog {
  int generation = 0;
  double gen_best = 0.0;
  double best_so_far = 0.0;
  std::vector<Individual> individuals;
};

struct RunLog {
  std::uint64_t seed = 0;
  std::vector<GenerationLog> generations;
  Vector best_point;  // physical
  double best_cost = std::numeric_limits<double>::infinity();
};

/// Ask/tell adapter over the three optimizers. Costs are minimized.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Actions in [-1, 1]^d to evaluate.
  virtual std::vector<Vector> ask() = 0;
  virtual void tell(std::span<const double> costs) = 0;
};

class PboOptimizer final : public Optimizer {
 public:
  PboOptimizer(PboConfig cfg, int d, const Vector& start, std::uint64_t seed)
      : agent_(std::move(cfg), d, start, seed) {}

  std::vector<Vector> ask() override {
    std::vector<Vector> out;
    for (auto& s : agent_.ask()) out.push_back(std::move(s.clipped));
    return out;
  }
  void tell(std::span<const double> costs) override {
    std::vector<double> rewards(costs.size());
    std::transform(costs.begin(), costs.end(), rewards.begin(), [](double c) { return -c; });
    agent_.tell(rewards);
  }
  const PboAgent& agent() const { return agent_; }

 private:
  PboAgent agent_;
};

template <typename Strategy>
class EvolutionOptimizer final : public Optimizer {
 public:
  EvolutionOptimizer(Strategy s, std::uint64_t seed) : strategy_(std::move(s)), seed_(seed) {}

  std::vector<Vector> ask() override {
    raw_ = strategy_.sample(seed_);
    std::vector<Vector> out;
    out.reserve(raw_.size());
    for (const auto& r : raw_) out.push_back(clip_unit(r));
    return out;
  }
  void tell(std::span<const double> costs) override { strategy_.update(raw_, costs); }
  const Strategy& strategy() const { return strategy_; }

 private:
  Strategy strategy_;
  std::uint64_t seed_;
  std::vector<Vector> raw_;
};

inline int resolve_individuals(const ExperimentConfig& c, const Problem& p) {
  if (c.individuals > 0) return c.individuals;
  if (p.population > 0) return p.population;
  return population_size(p.dimension);
}

inline std::unique_ptr<Optimizer> make_optimizer(const ExperimentConfig& c, const Problem& p,
                                                 std::uint64_t seed) {
  const int n = resolve_individuals(c, p);
  const Vector start = unmap_action(p.start, p);
  if (c.optimizer == "pbo") {
    PboConfig cfg = c.pbo;
    cfg.individuals = n;
    return std::make_unique<PboOptimizer>(cfg, p.dimension, start, seed);
  }
  if (c.optimizer == "es")
    return std::make_unique<EvolutionOptimizer<es::MuLambdaEs>>(
        es::MuLambdaEs(start, c.es_initial_step, n), seed);
  if (c.optimizer == "cmaes")
    return std::make_unique<EvolutionOptimizer<es::CmaEs>>(
        es::CmaEs(start, c.cmaes_initial_step, n), seed);
  throw ConfigError("unknown optimizer '" + c.optimizer + "'");
}

/// One seeded optimization. Costs within a generation are evaluated on up to
/// `workers` threads and gathered by index.
inline RunLog run_single(const ExperimentConfig& c, const Problem& problem, std::uint64_t seed,
                         int workers = 1) {
  RunLog log;
  log.seed = seed;
  auto opt = make_optimizer(c, problem, seed);
  double best = std::numeric_limits<double>::infinity();
  for (int g = 0; g < c.generations; ++g) {
    const auto actions = opt->ask();
    GenerationLog gl;
    gl.generation = g;
    gl.individuals.resize(actions.size());
    try {
      parallel_for(actions.size(), workers, [&](std::size_t i) {
        auto& ind = gl.individuals[i];
        ind.action = actions[i];
        ind.point = map_action(actions[i], problem);
        ind.cost = problem.cost(ind.point);
        if (std::isnan(ind.cost)) throw NumericalError("cost is NaN");
      });
    } catch (const std::exception& e) {
      throw std::runtime_error(problem.name + " seed " + std::to_string(seed) + " generation " +
                               std::to_string(g) + ": " + e.what());
    }
    std::vector<double> costs;
    costs.reserve(actions.size());
    gl.gen_best = std::numeric_limits<double>::infinity();
    for (const auto& ind : gl.individuals) {
      costs.push_back(ind.cost);
      gl.gen_best = std::min(gl.gen_best, ind.cost);
      if (ind.cost < log.best_cost) {
        log.best_cost = ind.cost;
        log.best_point = ind.point;
      }
    }
    best = std::min(best, gl.gen_best);
    gl.best_so_far = best;
    opt->tell(costs);
    log.generations.push_back(std::move(gl));
  }
  return log;
}

struct AggregateRow {
  int generation = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stddev = 0.0;  // population
};

inline std::vector<AggregateRow> aggregate_runs(std::span<const RunLog> logs) {
  if (logs.empty()) throw InputError("aggregation error: no run logs");
  const std::size_t n_gen = logs.front().generations.size();
  for (const auto& l : logs)
    if (l.generations.size() != n_gen)
      throw InputError("aggregation error: runs have different generation counts");
  std::vector<AggregateRow> rows(n_gen);
  const double n = static_cast<double>(logs.size());
  for (std::size_t g = 0; g < n_gen; ++g) {
    AggregateRow& r = rows[g];
    r.generation = static_cast<int>(g);
    r.min = std::numeric_limits<double>::infinity();
    r.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& l : logs) {
      const double v = l.generations[g].best_so_far;
      sum += v;
      r.min = std::min(r.min, v);
      r.max = std::max(r.max, v);
    }
    r.mean = sum / n;
    double var = 0.0;
    for (const auto& l : logs) {
      const double dv = l.generations[g].best_so_far - r.mean;
      var += dv * dv;
    }
    r.stddev = std::sqrt(var / n);
  }
  return rows;
}

inline void write_run_csv(std::ostream& os, const RunLog& log) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "generation,gen_best,best_so_far\n";
  for (const auto& g : log.generations)
    os << g.generation << ',' << g.gen_best << ',' << g.best_so_far << '\n';
}

inline void write_aggregate_csv(std::ostream& os, std::span<const AggregateRow> rows) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "generation,mean_best,min_best,max_best,std_best\n";
  for (const auto& r : rows)
    os << r.generation << ',' << r.mean << ',' << r.min << ',' << r.max << ',' << r.stddev << '\n';
}

inline std::string run_file_name(int k) {
  std::ostringstream s;
  s << "run_" << std::setw(3) << std::setfill('0') << k << ".csv";
  return s.str();
}

inline std::string trajectory_file_name(int k) {
  std::ostringstream s;
  s << "best_trajectory_" << std::setw(3) << std::setfill('0') << k << ".csv";
  return s.str();
}

inline void write_file(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Runs `runs` optimizations with seeds seed, seed+1, ... and, when an output
/// directory is set, writes run_NNN.csv files and aggregate.csv (plus the best
/// controlled trajectory per run for Lorenz problems).
inline std::vector<RunLog> run_experiment(const ExperimentConfig& c, int workers = 1) {
  c.validate();
  const Problem problem = make_problem(c.problem);
  make_optimizer(c, problem, c.seed);  // surfaces configuration errors before any run

  std::vector<RunLog> logs(static_cast<std::size_t>(c.runs));
  const int run_workers = std::max(1, std::min(workers, c.runs));
  const int eval_workers = std::max(1, workers / run_workers);
  parallel_for(logs.size(), run_workers, [&](std::size_t k) {
    logs[k] = run_single(c, problem, c.seed + k, eval_workers);
  });

  if (!c.output_dir.empty()) {
    const std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);
    for (std::size_t k = 0; k < logs.size(); ++k)
      write_file(dir / run_file_name(static_cast<int>(k)),
                 [&](std::ostream& os) { write_run_csv(os, logs[k]); });
    const auto rows = aggregate_runs(logs);
    write_file(dir / "aggregate.csv", [&](std::ostream& os) { write_aggregate_csv(os, rows); });
    if (c.problem.rfind("lorenz_", 0) == 0) {
      for (std::size_t k = 0; k < logs.size(); ++k) {
        const auto traj =
            lorenz::integrate(lorenz::LorenzConfig{},
                              lorenz::ControlParams::from_vector(logs[k].best_point));
        write_file(dir / trajectory_file_name(static_cast<int>(k)),
                   [&](std::ostream& os) { lorenz::write_trajectory_csv(os, traj); });
      }
    }
  }
  return logs;
}

struct LorenzBaseline {
  double stabilizer = 0.0;
  double oscillator = 0.0;
  lorenz::Trajectory trajectory;
};

/// Reward levels of the uncontrolled system over the controlled window.
inline LorenzBaseline lorenz_baseline(const lorenz::LorenzConfig& config = {}) {
  LorenzBaseline b;
  b.trajectory = lorenz::integrate(config);
  b.stabilizer = lorenz::reward(b.trajectory, lorenz::Objective::kStabilizer, config.dt);
  b.oscillator = lorenz::reward(b.trajectory, lorenz::Objective::kOscillator, config.dt);
  return b;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median over runs of best-so-far at generation g.
inline double median_best(std::span<const RunLog> logs, int generation) {
  std::vector<double> v;
  for (const auto& l : logs) v.push_back(l.generations.at(generation).best_so_far);
  return median(std::move(v));
}

}  // namespace pbo::harness

#endif  // PBO_HARNESS_HPP
