// Acceptance suite. Prints one PASS/FAIL line per criterion (also written to
// <scratch-dir>/acceptance_report.txt) and exits non-zero if any fails.
//
//   acceptance <path-to-rlx-cli> <scratch-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rlx/envs.hpp"
#include "rlx/gradient_check.hpp"
#include "rlx/harness.hpp"
#include "rlx/policies.hpp"

namespace fs = std::filesystem;
using namespace rlx;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<missing " + p.string() + ">";
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = run_gradient_check(20, 2024, 1e-5, 1e-4);
  double worst = 0;
  int with_dropout = 0;
  bool has_reference_shape = false;
  for (const auto& c : report.cases) {
    worst = std::max(worst, c.max_relative_error);
    with_dropout += c.dropout;
    has_reference_shape |= c.dims == LayerDims{4, 64, 64, 2};
  }
  const double secs = seconds_since(t0);
  const bool mixed = with_dropout > 0 && with_dropout < 20;
  return {report.cases.size() == 20 && report.passed() && mixed &&
              has_reference_shape && secs < 60,
          "20 nets (" + std::to_string(with_dropout) + " with dropout), max rel err " +
              fmt("%.2e", worst) + ", " + fmt("%.1fs", secs)};
}

Outcome dynamics_oracle() {
  Rng rng(31337);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const CartPoleState s{rng.uniform(-2.4, 2.4), rng.uniform(-3, 3),
                          rng.uniform(-0.21, 0.21), rng.uniform(-3, 3)};
    const int action = static_cast<int>(rng.below(2));
    const auto got = cartpole_dynamics({}, s, action).as_vector();
    const auto want = oracle::cartpole_step({s.x, s.x_dot, s.theta, s.theta_dot}, action);
    for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(got(k) - want[k]));
  }
  return {worst <= 1e-12, "1000 pairs, max abs diff " + fmt("%.2e", worst)};
}

Outcome random_baseline() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_run_seed(0, "random", 0));
  CartPole env;
  double total = 0;
  constexpr int kEpisodes = 10000;
  for (int e = 0; e < kEpisodes; ++e) {
    env.reset(rng);
    while (!env.episode_over()) total += env.step(random_select(2, rng)).reward;
  }
  const double mean = total / kEpisodes;
  const double secs = seconds_since(t0);
  return {std::abs(mean - 22.0) <= 2.0 && secs < 60,
          "mean return " + fmt("%.3f", mean) + " over 10000 episodes, " +
              fmt("%.1fs", secs)};
}

Outcome bandit_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  auto mean_of = [](StrategyKind kind, bool* other_arm = nullptr) {
    ExperimentConfig cfg;
    cfg.environment = EnvironmentKind::kBandit;
    cfg.strategies = {default_policy(kind, cfg.environment)};
    cfg.pulls = 1000000;
    cfg.no_timing = true;
    const auto records = run_bandit_suite(cfg).records;
    double sum = 0;
    for (const auto& r : records) {
      sum += r.episode_return;
      if (other_arm && r.episode_return != 1.0) *other_arm = true;
    }
    return sum / static_cast<double>(records.size());
  };
  bool greedy_switched = false;
  const double greedy = mean_of(StrategyKind::kGreedy, &greedy_switched);
  const double eps = mean_of(StrategyKind::kEpsilonGreedy);
  const double random = mean_of(StrategyKind::kRandom);
  const double boltzmann = mean_of(StrategyKind::kBoltzmann);
  const double secs = seconds_since(t0);
  const bool pass = greedy == 1.0 && !greedy_switched &&
                    std::abs(eps - 1.95) <= 0.005 &&
                    std::abs(random - 1.5) <= 0.005 && boltzmann > 1.95 && secs < 60;
  return {pass, "greedy " + fmt("%.4f", greedy) + ", eps-greedy " + fmt("%.4f", eps) +
                    ", random " + fmt("%.4f", random) + ", boltzmann " +
                    fmt("%.4f", boltzmann) + " (1e6 pulls each), " + fmt("%.1fs", secs)};
}

// Shared by criteria 5 and 6.
struct CompareRun {
  ExperimentConfig config;
  ExperimentResult result;
  Summary summary;
  double cpu_seconds = 0;
  double wall_seconds = 0;
};

CompareRun full_comparison(const fs::path& out) {
  CompareRun run;
  run.config.strategies.clear();
  for (const auto kind : all_strategies())
    run.config.strategies.push_back(default_policy(kind, EnvironmentKind::kCartPole));
  run.config.seeds = {0, 1, 2, 3, 4};
  run.config.episodes = 500;
  run.config.jobs = 0;
  run.config.out_dir = out.string();
  const std::clock_t c0 = std::clock();
  const auto t0 = std::chrono::steady_clock::now();
  run.result = run_experiment(run.config);
  run.summary = write_outputs(run.config, run.result);
  run.cpu_seconds = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  run.wall_seconds = seconds_since(t0);
  return run;
}

Outcome learning_sanity(const CompareRun& run) {
  const auto* s = run.summary.find("eps-greedy");
  if (!s) return {false, "eps-greedy missing from the comparison"};
  double ms = 0;
  for (const auto& r : run.result.records)
    if (r.strategy == "eps-greedy") ms += r.wall_ms;
  std::string per_seed;
  for (const auto& r : s->runs) per_seed += (per_seed.empty() ? "" : " ") + fmt("%.1f", r.best_moving_average);
  return {s->runs.size() == 5 && s->best_ma_median >= 150.0 && ms / 1000 <= 600,
          "median best MA100 " + fmt("%.2f", s->best_ma_median) + " [" + per_seed +
              "], " + fmt("%.0fs", ms / 1000) + " of run time"};
}

Outcome comparison_protocol(const CompareRun& run, const fs::path& out) {
  const std::string report = slurp(out / "report.md");
  const std::string summary = slurp(out / "summary.csv");
  const std::string records = slurp(out / "records.csv");
  const auto observed = ordering_observed(run.summary);
  const bool reported = report.find("Result: observed") != std::string::npos ||
                        report.find("Result: not observed") != std::string::npos;
  bool complete = run.result.records.size() == 5u * 5u * 500u &&
                  run.summary.strategies.size() == 5;
  for (const auto& s : run.summary.strategies) complete &= s.runs.size() == 5;
  std::string ranking;
  for (const auto& name : run.summary.ranking) ranking += (ranking.empty() ? "" : " > ") + name;
  return {complete && reported && observed.has_value() &&
              summary.rfind("strategy,runs,", 0) == 0 &&
              records.rfind("strategy,seed,episode,", 0) == 0 &&
              run.cpu_seconds <= 1800,
          std::string("ordering ") + (observed && *observed ? "observed" : "not observed") +
              " (" + ranking + "), " + fmt("%.0fs CPU", run.cpu_seconds) + ", " +
              fmt("%.0fs wall", run.wall_seconds)};
}

// Output goes to /dev/null unless the command redirects stdout itself.
int sh(const std::string& cmd) {
  const bool redirected = cmd.find(" > ") != std::string::npos;
  return std::system((cmd + (redirected ? " 2>&1" : " > /dev/null 2>&1")).c_str());
}

Outcome determinism(const std::string& cli, const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    std::string name;
    std::string args;  // output dir appended as "--out <dir>"
    std::vector<std::string> files;
  };
  const std::vector<std::string> outputs{"records.csv", "summary.csv", "report.md"};
  const std::vector<Case> cases{
      {"run", "run --env cartpole --strategy bayes-dropout --seed 7 --episodes 40 "
              "--save-checkpoint",
       {"records.csv", "summary.csv", "report.md", "bayes-dropout_seed7.qnet"}},
      {"compare", "compare --seeds 3 --episodes 25 --hidden 32,32 --jobs 1", outputs},
      {"compare-parallel", "compare --seeds 3 --episodes 25 --hidden 32,32 --jobs 3",
       outputs},
      {"bandit", "bandit --pulls 20000 --seeds 2 --jobs 1", outputs},
      {"bandit-parallel", "bandit --pulls 20000 --seeds 2 --jobs 4", outputs},
  };
  std::vector<std::string> failures;
  for (const auto& c : cases) {
    const auto a = scratch / (c.name + "_a");
    const auto b = scratch / (c.name + "_b");
    for (const auto& dir : {a, b}) {
      fs::remove_all(dir);
      if (sh(cli + " --no-timing --master-seed 5 " + c.args + " --out " + dir.string()) != 0)
        failures.push_back(c.name + " exited non-zero");
    }
    for (const auto& f : c.files)
      if (slurp(a / f) != slurp(b / f)) failures.push_back(c.name + "/" + f);
  }
  // Serial and parallel schedules of the same grid.
  for (const char* grid : {"compare", "bandit"})
    for (const auto& f : outputs)
      if (slurp(scratch / (std::string(grid) + "_a") / f) !=
          slurp(scratch / (std::string(grid) + "-parallel_a") / f))
        failures.push_back(std::string(grid) + " serial vs parallel " + f);
  // grad-check prints a deterministic report on stdout.
  for (const char* tag : {"a", "b"})
    if (sh(cli + " grad-check --count 6 > " + (scratch / ("grad_" + std::string(tag))).string()) != 0)
      failures.push_back("grad-check exited non-zero");
  if (slurp(scratch / "grad_a") != slurp(scratch / "grad_b")) failures.push_back("grad-check");

  std::string detail = std::to_string(cases.size()) +
                       " commands twice each, serial vs parallel for compare and bandit, " +
                       fmt("%.1fs", seconds_since(t0));
  if (!failures.empty()) {
    detail = "differs:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

Outcome policy_invariants() {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  Rng rng(8);

  // Softmax.
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd q(5);
    for (int i = 0; i < 5; ++i) q(i) = rng.uniform(-50, 50);
    const double t = std::exp(rng.uniform(-3, 3));
    const auto p = boltzmann_distribution(q, t).probabilities;
    if (std::abs(p.sum() - 1.0) > 1e-12 || (p.array() < 0).any()) {
      check(false, "normalization");
      break;
    }
    const auto shifted =
        boltzmann_distribution((q.array() + rng.uniform(-1e3, 1e3)).matrix(), t).probabilities;
    if ((shifted - p).cwiseAbs().maxCoeff() > 1e-9) {
      check(false, "shift invariance");
      break;
    }
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (q(i) > q(j) && !(p(i) >= p(j))) check(false, "monotonicity");
  }
  const Eigen::Vector3d q3(1.0, 3.0, 2.0);
  check(boltzmann_distribution(q3, 1e-6).probabilities(1) > 1 - 1e-12, "T -> 0 limit");
  check((boltzmann_distribution(q3, 1e6).probabilities.array() - 1.0 / 3).abs().maxCoeff() <
            1e-5,
        "T -> inf limit");
  check(std::abs(boltzmann_distribution(Eigen::Vector2d(0, 1), 1.0).probabilities(1) -
                 0.7310585786300049) < 1e-12,
        "logistic value");

  // eps-greedy frequency of the greedy action: 1 - eps + eps/k.
  for (const auto& [eps, k] : std::vector<std::pair<double, int>>{{0.1, 2}, {0.3, 4}}) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(k);
    q(k - 1) = 1.0;
    constexpr int n = 1000000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += epsilon_greedy_select(q, eps, rng) == k - 1;
    const double expect = 1 - eps + eps / k;
    const double se = std::sqrt(expect * (1 - expect) / n);
    check(std::abs(hits / double(n) - expect) < 4 * se,
          "eps-greedy frequency eps=" + fmt("%.1f", eps));
  }

  // bayes-dropout at dropout 0 is greedy.
  auto net = init_network<double>({4, 32, 32, 2}, rng, 0.0);
  for (int i = 0; i < 2000; ++i) {
    Eigen::Vector4d s;
    for (int k = 0; k < 4; ++k) s(k) = rng.uniform(-2, 2);
    if (bayes_dropout_select(net, s, rng) != greedy_select(q_values(net, s))) {
      check(false, "bayes-dropout == greedy at p = 0");
      break;
    }
  }

  // Mask zero fraction.
  for (const double p : {0.1, 0.3, 0.5}) {
    net.set_dropout_rate(p);
    const auto mask = sample_dropout_mask(net, 2000, rng);
    double zeros = 0, total = 0;
    for (const auto& m : mask.layers) {
      zeros += static_cast<double>((m.array() == 0).count());
      total += static_cast<double>(m.size());
    }
    check(std::abs(zeros / total - p) <= 0.01, "mask zero fraction p=" + fmt("%.1f", p));
  }

  std::string detail = "softmax, eps-greedy frequency, bayes-dropout at p=0, mask rate";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <rlx-cli> <scratch-dir>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path scratch = argv[2];
  fs::create_directories(scratch);

  int failed = 0;
  std::ofstream report_file(scratch / "acceptance_report.txt");
  auto report = [&](int id, const char* name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    char line[1024];
    std::snprintf(line, sizeof line, "[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name,
                  o.detail.c_str());
    std::fputs(line, stdout);
    std::fflush(stdout);
    report_file << line << std::flush;
    failed += !o.pass;
  };

  report(1, "gradient correctness", gradient_correctness);
  report(2, "dynamics oracle", dynamics_oracle);
  report(3, "random-policy baseline", random_baseline);
  report(4, "bandit suite", bandit_suite);

  const fs::path compare_dir = scratch / "compare";
  std::optional<CompareRun> compare;
  std::string compare_error;
  try {
    compare = full_comparison(compare_dir);
  } catch (const std::exception& e) {
    compare_error = e.what();
  }
  auto need_compare = [&](auto check) {
    return [&, check]() -> Outcome {
      if (!compare) return {false, "comparison failed: " + compare_error};
      return check();
    };
  };
  report(5, "learning sanity", need_compare([&] { return learning_sanity(*compare); }));
  report(6, "comparison protocol",
         need_compare([&] { return comparison_protocol(*compare, compare_dir); }));
  report(7, "determinism", [&] { return determinism(cli, scratch / "determinism"); });
  report(8, "policy invariants", policy_invariants);

  std::printf("%d/8 criteria passed\n", 8 - failed);
  report_file << 8 - failed << "/8 criteria passed\n";
  return failed == 0 ? 0 : 1;
}
