// Command-line front end: run, compare, bandit, grad-check.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rlx/config.hpp"
#include "rlx/gradient_check.hpp"
#include "rlx/harness.hpp"

namespace {

using nlohmann::json;

// Registers `flag` so that, when given, it overwrites `key` in `overrides`.
template <typename T>
CLI::Option* add_override(CLI::App* app, const std::string& flag,
                          const std::string& key, json& overrides,
                          const std::string& help) {
  return app->add_option_function<T>(
      flag, [&overrides, key](const T& v) { overrides[key] = v; }, help);
}

void add_training_overrides(CLI::App* app, json& o) {
  add_override<int>(app, "--episodes", "episodes", o, "episodes per run");
  add_override<int>(app, "--jobs", "jobs", o, "parallel runs (0 = all cores)");
  add_override<double>(app, "--gamma", "gamma", o, "discount factor");
  add_override<int>(app, "--batch-size", "batch_size", o, "replay batch size");
  add_override<int>(app, "--target-sync", "target_sync_interval", o,
                    "gradient steps between target syncs");
  add_override<int>(app, "--warmup", "warmup", o, "random-policy warmup transitions");
  add_override<int>(app, "--learn-every", "learn_every", o, "env steps per update");
  add_override<int>(app, "--buffer-capacity", "buffer_capacity", o, "replay capacity");
  add_override<double>(app, "--grad-clip", "grad_clip", o, "max gradient norm (0 = off)");
  add_override<double>(app, "--learning-rate", "learning_rate", o, "Adam step size");
  add_override<std::vector<int>>(app, "--hidden", "hidden", o, "hidden layer widths")
      ->delimiter(',');
  add_override<double>(app, "--dropout-rate", "dropout_rate", o, "hidden dropout rate");
  add_override<int>(app, "--dropout-samples", "dropout_samples", o,
                    "passes for the uncertainty diagnostic");
  add_override<double>(app, "--eps-start", "eps_start", o, "initial epsilon");
  add_override<double>(app, "--eps-end", "eps_end", o, "final epsilon");
  add_override<std::int64_t>(app, "--eps-anneal-steps", "eps_anneal_steps", o,
                             "epsilon anneal length in env steps");
  add_override<double>(app, "--temp-start", "temp_start", o, "initial temperature");
  add_override<double>(app, "--temp-end", "temp_end", o, "final temperature");
  add_override<std::int64_t>(app, "--temp-anneal-steps", "temp_anneal_steps", o,
                             "temperature anneal length in env steps");
  add_override<double>(app, "--threshold", "threshold", o, "solved threshold");
  add_override<int>(app, "--window", "window", o, "moving-average window");
  add_override<int>(app, "--max-episode-steps", "max_episode_steps", o,
                    "cart-pole time limit");
  add_override<std::string>(app, "--out", "out", o, "output directory");
}

int run_and_report(const json& doc) {
  const rlx::ExperimentConfig config = rlx::config_from_json(doc);
  const auto result = rlx::run_experiment(config);
  const auto summary = rlx::write_outputs(config, result);
  std::printf("%-14s %6s %12s %10s %14s\n", "strategy", "runs", "mean_final",
              "std", "best_ma_median");
  for (const auto& s : summary.strategies)
    std::printf("%-14s %6zu %12.2f %10.2f %14.2f\n", s.strategy.c_str(),
                s.runs.size(), s.mean_final, s.std_final, s.best_ma_median);
  std::printf("outputs written to %s\n", config.out_dir.c_str());
  return 0;
}

int grad_check(int count, std::uint64_t seed) {
  const auto report = rlx::run_gradient_check(count, seed);
  for (std::size_t i = 0; i < report.cases.size(); ++i) {
    const auto& c = report.cases[i];
    std::string dims;
    for (const auto d : c.dims) dims += (dims.empty() ? "" : "-") + std::to_string(d);
    std::printf("%-4s case %2zu dims %-12s dropout %-3s max rel err %.3e\n",
                c.passed ? "ok" : "FAIL", i, dims.c_str(), c.dropout ? "on" : "off",
                c.max_relative_error);
  }
  std::printf("%s (tolerance %.0e)\n", report.passed() ? "PASS" : "FAIL",
              report.tolerance);
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exploration strategy benchmark: DQN on cart-pole and a "
               "two-armed bandit"};
  app.require_subcommand(1);

  std::string config_path;
  json globals = json::object();
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag_callback("--no-timing", [&] { globals["no_timing"] = true; },
                        "zero the wall_ms column");
  add_override<std::uint64_t>(&app, "--master-seed", "master_seed", globals,
                              "master seed of the run grid");
  app.fallthrough();

  json run_opts = json::object();
  auto* run = app.add_subcommand("run", "one strategy, one seed");
  add_override<std::string>(run, "--env", "env", run_opts, "cartpole | bandit");
  add_override<std::string>(run, "--strategy", "strategies", run_opts,
                            "greedy | random | eps-greedy | boltzmann | bayes-dropout");
  run->add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { run_opts["seeds"] = json::array({s}); },
      "seed");
  run->add_flag_callback("--save-checkpoint",
                         [&] { run_opts["save_checkpoints"] = true; },
                         "write the final network");
  add_training_overrides(run, run_opts);

  json compare_opts = json::object();
  auto* compare = app.add_subcommand("compare", "strategy x seed grid");
  add_override<std::string>(compare, "--env", "env", compare_opts, "cartpole | bandit");
  add_override<std::string>(compare, "--strategies", "strategies", compare_opts,
                            "comma-separated strategy list");
  add_override<int>(compare, "--seeds", "seeds", compare_opts, "seeds 0..N-1");
  compare->add_flag_callback("--save-checkpoints",
                             [&] { compare_opts["save_checkpoints"] = true; },
                             "write the final network of each run");
  add_training_overrides(compare, compare_opts);

  json bandit_opts = json::object();
  auto* bandit = app.add_subcommand("bandit", "tabular two-armed bandit suite");
  add_override<std::int64_t>(bandit, "--pulls", "pulls", bandit_opts, "pulls per run");
  add_override<std::string>(bandit, "--strategies", "strategies", bandit_opts,
                            "comma-separated strategy list");
  add_override<int>(bandit, "--seeds", "seeds", bandit_opts, "seeds 0..N-1");
  add_override<int>(bandit, "--jobs", "jobs", bandit_opts, "parallel runs");
  add_override<double>(bandit, "--noise-sigma", "noise_sigma", bandit_opts,
                       "reward noise std");
  add_override<double>(bandit, "--eps-start", "eps_start", bandit_opts, "epsilon");
  add_override<double>(bandit, "--eps-end", "eps_end", bandit_opts, "final epsilon");
  add_override<double>(bandit, "--temp-start", "temp_start", bandit_opts, "temperature");
  add_override<double>(bandit, "--temp-end", "temp_end", bandit_opts,
                       "final temperature");
  add_override<double>(bandit, "--dropout-rate", "dropout_rate", bandit_opts,
                       "dropout rate of the bayes-dropout network");
  add_override<std::string>(bandit, "--out", "out", bandit_opts, "output directory");

  int gc_count = 20;
  std::uint64_t gc_seed = 2024;
  auto* gc = app.add_subcommand("grad-check", "analytic vs finite-difference gradients");
  gc->add_option("--count", gc_count, "random networks to check");
  gc->add_option("--seed", gc_seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gc) return grad_check(gc_count, gc_seed);

    json doc = config_path.empty() ? json::object() : rlx::read_json_file(config_path);
    const json* sub = *run ? &run_opts : *compare ? &compare_opts : &bandit_opts;
    if (*bandit) doc["env"] = "bandit";
    if (*run && !sub->contains("strategies") && !doc.contains("strategies"))
      doc["strategies"] = "eps-greedy";
    doc.update(globals);
    doc.update(*sub);
    if (*run) {
      const auto cfg = rlx::config_from_json(doc);
      if (cfg.strategies.size() != 1 || cfg.seeds.size() != 1)
        throw std::invalid_argument("run takes exactly one strategy and one seed");
    }
    return run_and_report(doc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
