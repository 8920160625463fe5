// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance [--workers N] [--only NAME]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pbo/harness.hpp"

namespace fs = std::filesystem;
namespace h = pbo::harness;
using pbo::Matrix;
using pbo::Vector;

namespace {

int g_workers = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;
  std::function<Outcome()> check;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::vector<h::RunLog> campaign(const std::string& problem, const std::string& optimizer,
                                int runs, int generations, int individuals = 0) {
  h::ExperimentConfig c;
  c.problem = problem;
  c.optimizer = optimizer;
  c.runs = runs;
  c.seed = 0;
  c.generations = generations;
  c.individuals = individuals;
  return h::run_experiment(c, g_workers);
}

bool monotone(const std::vector<h::RunLog>& logs) {
  for (const auto& l : logs)
    for (std::size_t g = 1; g < l.generations.size(); ++g)
      if (l.generations[g].best_so_far > l.generations[g - 1].best_so_far) return false;
  return true;
}

std::string capture(const std::string& cmd, int* status) {
  std::string out;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) {
    *status = -1;
    return out;
  }
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  *status = pclose(pipe);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome covariance_validity() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(2, 12);
  std::uniform_real_distribution<double> sd(1e-3, 1.0), ang(0.0, pbo::kPi);
  double worst_sym = 0, worst_eig = 0, worst_diag = 0, worst_range = 0;
  for (int t = 0; t < 10000; ++t) {
    const int d = dim(rng);
    Vector s(d), a(pbo::angle_count(d));
    for (int i = 0; i < d; ++i) s[i] = sd(rng);
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = ang(rng);
    const Matrix c = pbo::build_covariance(s, a);
    worst_sym = std::max(worst_sym, (c - c.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c, Eigen::EigenvaluesOnly);
    worst_eig = std::min(worst_eig, eig.eigenvalues().minCoeff());
    const Matrix corr = s.cwiseInverse().asDiagonal() * c * s.cwiseInverse().asDiagonal();
    worst_diag = std::max(worst_diag, (corr.diagonal().array() - 1.0).abs().maxCoeff());
    worst_range = std::max(worst_range, corr.cwiseAbs().maxCoeff() - 1.0);
  }
  const bool pass = worst_sym <= 1e-12 && worst_eig >= -1e-8 && worst_diag <= 1e-10 &&
                    worst_range <= 1e-12;
  return {pass, "asym " + fmt(worst_sym) + ", min eig " + fmt(worst_eig) + ", diag err " +
                    fmt(worst_diag) + ", |corr|-1 " + fmt(worst_range)};
}

Outcome gradient_fidelity() {
  namespace nn = pbo::nn;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> depth(1, 4), width(1, 8), act(0, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<nn::LayerSpec> spec;
    const int inputs = width(rng);
    int prev = inputs;
    for (int l = depth(rng); l > 0; --l) {
      const int next = width(rng);
      spec.push_back({prev, next, static_cast<nn::Activation>(act(rng)), 1.0});
      prev = next;
    }
    auto net = nn::init_network(spec, static_cast<std::uint64_t>(t));
    Vector theta = net.parameters();
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += 0.2 * normal(rng);
    net.set_parameters(theta);
    Vector x(inputs), g(prev);
    for (auto& v : x) v = normal(rng);
    for (auto& v : g) v = normal(rng);
    const Vector analytic = nn::backward(net, x, g);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vector p = theta;
      p[i] += 1e-5;
      net.set_parameters(p);
      const double up = nn::forward(net, x).dot(g);
      p[i] -= 2e-5;
      net.set_parameters(p);
      const double dn = nn::forward(net, x).dot(g);
      const double fd = (up - dn) / 2e-5;
      const double scale = std::max(std::abs(fd), std::abs(analytic[i]));
      if (scale > 1e-8) worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
    }
    net.set_parameters(theta);
  }
  return {worst <= 1e-4, "worst relative error " + fmt(worst)};
}

Outcome parabola() {
  const auto logs = campaign("parabola", "pbo", 10, 150);
  const double g50 = h::median_best(logs, 49), g150 = h::median_best(logs, 149);
  const bool mono = monotone(logs);
  return {g50 <= 1e-3 && g150 <= 1e-6 && mono,
          "median best " + fmt(g50) + " @50, " + fmt(g150) + " @150, monotone " +
              (mono ? "yes" : "no")};
}

Outcome rosenbrock2() {
  const auto pbo_logs = campaign("rosenbrock2", "pbo", 10, 150);
  const auto es_logs = campaign("rosenbrock2", "es", 10, 150);
  const double p = h::median_best(pbo_logs, 149), e = h::median_best(es_logs, 149);
  return {p <= 1e-2 && p <= 0.1 * e, "PBO median " + fmt(p) + ", ES median " + fmt(e)};
}

Outcome branin() {
  const auto logs = campaign("branin", "pbo", 10, 50);
  const double m = h::median_best(logs, 49);
  return {std::abs(m - 0.397887) <= 1e-3, "median best " + fmt(m)};
}

Outcome griewank() {
  bool pass = true;
  std::string detail;
  for (const std::string opt : {"pbo", "es", "cmaes"}) {
    const double m = h::median_best(campaign("griewank", opt, 10, 50), 49);
    pass = pass && m <= 0.5 && m > 0.0;
    detail += (detail.empty() ? "" : ", ") + opt + " " + fmt(m);
  }
  return {pass, "median final cost " + detail};
}

Outcome cmaes_sphere() {
  // parabola: 2-D sphere from (2.5, 2.5), step 0.5 of the normalized box
  const auto logs = campaign("parabola", "cmaes", 10, 50);
  const double m = h::median_best(logs, 49);
  return {m <= 1e-8, "median best " + fmt(m)};
}

Outcome rosenbrock_high() {
  const auto five = campaign("rosenbrock5", "pbo", 10, 300);
  const auto ten = campaign("rosenbrock10", "pbo", 10, 600);
  const double r5 = h::median_best(five, 0) / h::median_best(five, 299);
  const double r10 = h::median_best(ten, 0) / h::median_best(ten, 599);
  return {r5 >= 1e3 && r10 >= 1e3,
          "5-D " + fmt(h::median_best(five, 0)) + " -> " + fmt(h::median_best(five, 299)) +
              " (x" + fmt(r5) + "), 10-D " + fmt(h::median_best(ten, 0)) + " -> " +
              fmt(h::median_best(ten, 599)) + " (x" + fmt(r10) + ")"};
}

Outcome lorenz_stabilizer() {
  const auto logs = campaign("lorenz_stabilizer", "pbo", 5, 150, 16);
  const double reward = -h::median_best(logs, 149);
  return {reward >= 20.0, "median best reward " + fmt(reward)};
}

double cli_baseline_oscillator() {
  int status = 0;
  const std::string out = capture(std::string(PBO_CLI_PATH) + " baseline", &status);
  if (status != 0) throw std::runtime_error("baseline verb failed: " + out);
  std::istringstream in(out);
  std::string key;
  double value = 0.0;
  while (in >> key >> value)
    if (key == "oscillator_reward") return value;
  throw std::runtime_error("baseline verb printed no oscillator_reward");
}

Outcome lorenz_oscillator() {
  const double base = cli_baseline_oscillator();
  const auto logs = campaign("lorenz_oscillator", "pbo", 5, 400, 16);
  const double reward = -h::median_best(logs, 399);
  return {reward >= 3.0 * base, "median best reward " + fmt(reward) + ", uncontrolled " +
                                    fmt(base) + ", target " + fmt(3.0 * base)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "pbo_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  struct Case {
    std::string name, json;
  };
  const std::vector<Case> cases{
      {"parabola_pbo", R"({"problem": "parabola", "optimizer": "pbo", "generations": 20})"},
      {"griewank_es", R"({"problem": "griewank", "optimizer": "es", "generations": 20})"},
      {"rosenbrock5_cmaes", R"({"problem": "rosenbrock5", "optimizer": "cmaes", "generations": 20})"},
      {"lorenz_pbo", R"({"problem": "lorenz_stabilizer", "optimizer": "pbo", "generations": 5})"}};
  std::size_t compared = 0;
  for (const auto& c : cases) {
    const fs::path cfg = root / (c.name + ".json");
    std::ofstream(cfg) << c.json;
    std::vector<fs::path> dirs;
    for (int workers : {1, 3, 8}) {
      const fs::path out = root / (c.name + "_w" + std::to_string(workers));
      int status = 0;
      const std::string log =
          capture(std::string(PBO_CLI_PATH) + " run --config " + cfg.string() +
                      " --runs 3 --seed 123 --workers " + std::to_string(workers) + " --out " +
                      out.string(),
                  &status);
      if (status != 0) return {false, c.name + ": run failed: " + log};
      dirs.push_back(out);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const std::string ref = slurp(entry.path());
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        if (slurp(dirs[k] / entry.path().filename()) != ref)
          return {false, c.name + ": " + entry.path().filename().string() + " differs"};
      }
      ++compared;
    }
  }
  return {compared > 0, std::to_string(compared) + " CSV files identical across --workers 1/3/8"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workers" && i + 1 < argc) {
      g_workers = std::max(1, std::atoi(argv[++i]));
    } else if (a == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--workers N] [--only NAME]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {"covariance_validity", 10, covariance_validity},
      {"gradient_fidelity", 5, gradient_fidelity},
      {"parabola", 60, parabola},
      {"rosenbrock2_vs_es", 120, rosenbrock2},
      {"branin", 60, branin},
      {"griewank_local_basin", 60, griewank},
      {"cmaes_sphere", 30, cmaes_sphere},
      {"rosenbrock_5d_10d", 600, rosenbrock_high},
      {"lorenz_stabilizer", 600, lorenz_stabilizer},
      {"lorenz_oscillator", 600, lorenz_oscillator},
      {"determinism", 60, determinism},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.time_limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " ["
              << fmt(secs) << " s, limit " << c.time_limit_s << " s"
              << (in_time ? "" : ", OVER TIME LIMIT") << "]" << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no criterion named '" << only << "'\n";
    return 2;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
