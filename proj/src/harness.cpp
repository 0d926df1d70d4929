#include "rlx/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rlx/qnet_io.hpp"

namespace rlx {

std::string_view environment_name(EnvironmentKind env) {
  return env == EnvironmentKind::kCartPole ? "cartpole" : "bandit";
}

EnvironmentKind parse_environment(std::string_view name) {
  if (name == "cartpole") return EnvironmentKind::kCartPole;
  if (name == "bandit") return EnvironmentKind::kBandit;
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw std::invalid_argument("no strategies configured");
  if (seeds.empty()) throw std::invalid_argument("no seeds configured");
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (pulls < 1) throw std::invalid_argument("pulls must be >= 1");
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  for (const auto& s : strategies) s.validate();
  for (std::size_t i = 0; i < strategies.size(); ++i)
    for (std::size_t j = i + 1; j < strategies.size(); ++j)
      if (strategies[i].kind == strategies[j].kind)
        throw std::invalid_argument("strategy listed twice: " +
                                    std::string(strategies[i].name()));
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j])
        throw std::invalid_argument("seed listed twice: " +
                                    std::to_string(seeds[i]));
  for (const auto h : network.hidden)
    if (h < 1) throw std::invalid_argument("hidden layer widths must be >= 1");
  if (!(network.dropout_rate >= 0 && network.dropout_rate < 1))
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  agent.validate();
  cartpole.validate();
  bandit.validate();
}

LayerDims ExperimentConfig::layer_dims() const {
  LayerDims dims;
  if (environment == EnvironmentKind::kCartPole) {
    dims.push_back(CartPole::kStateSize);
  } else {
    dims.push_back(1);
  }
  dims.insert(dims.end(), network.hidden.begin(), network.hidden.end());
  dims.push_back(environment == EnvironmentKind::kCartPole ? CartPole::kActionCount
                                                           : bandit.arm_count());
  return dims;
}

PolicySpec default_policy(StrategyKind kind, EnvironmentKind env) {
  PolicySpec spec;
  spec.kind = kind;
  if (env == EnvironmentKind::kBandit) {
    spec.epsilon = {0.1, 0.1, 1};
    spec.temperature = {0.1, 0.1, 1};
  }
  return spec;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct RunOutput {
  std::vector<RunRecord> records;
  std::optional<RunDiagnostics> diagnostics;
  std::optional<RunCheckpoint> checkpoint;
};

RunOutput run_cartpole(const ExperimentConfig& cfg, const PolicySpec& spec,
                       std::uint64_t seed) {
  const std::uint64_t run_seed = derive_run_seed(cfg.master_seed, spec.name(), seed);
  Rng rng(run_seed);
  CartPole env(cfg.cartpole);
  DqnLearner learner(cfg.layer_dims(), cfg.network.dropout_rate, cfg.agent, rng);

  RunOutput out;
  out.records.reserve(static_cast<std::size_t>(cfg.episodes));
  std::int64_t global_step = 0;
  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const auto start = Clock::now();
    const auto result = run_episode(env, learner, spec, global_step, rng);
    global_step = result.global_step;
    RunRecord r;
    r.strategy = std::string(spec.name());
    r.seed = seed;
    r.episode = episode;
    r.episode_return = result.episode_return;
    r.schedule_value =
        schedule_value(spec, global_step, learner.online.dropout_rate());
    r.env_steps = global_step;
    r.wall_ms = cfg.no_timing ? 0.0 : elapsed_ms(start);
    out.records.push_back(std::move(r));
  }

  if (spec.kind == StrategyKind::kBayesianDropout && spec.dropout_samples >= 2) {
    // Separate stream so the diagnostic never perturbs training draws.
    Rng diag(splitmix64(run_seed ^ 0xD1A6D1A6D1A6D1A6ULL));
    out.diagnostics = RunDiagnostics{
        std::string(spec.name()), seed,
        action_uncertainty(learner.online, CartPoleState{}.as_vector(),
                           spec.dropout_samples, diag)};
  }
  out.checkpoint = RunCheckpoint{std::string(spec.name()), seed, learner.online};
  return out;
}

RunOutput run_bandit(const ExperimentConfig& cfg, const PolicySpec& spec,
                     std::uint64_t seed) {
  Rng rng(derive_run_seed(cfg.master_seed, spec.name(), seed));
  const int arms = cfg.bandit.arm_count();
  Eigen::VectorXd estimates = Eigen::VectorXd::Zero(arms);
  std::vector<std::int64_t> count(static_cast<std::size_t>(arms), 0);

  const bool uses_network = spec.kind == StrategyKind::kBayesianDropout;
  std::optional<QNetworkd> net;
  std::optional<AdamState<double>> adam;
  const Eigen::VectorXd constant_input = Eigen::VectorXd::Ones(1);
  if (uses_network) {
    net = init_network<double>(cfg.layer_dims(), rng, cfg.network.dropout_rate);
    adam = AdamState<double>::for_network(*net);
  }

  RunOutput out;
  out.records.reserve(static_cast<std::size_t>(cfg.pulls));
  for (std::int64_t t = 0; t < cfg.pulls; ++t) {
    const auto start = Clock::now();
    int arm = 0;
    switch (spec.kind) {
      case StrategyKind::kGreedy: arm = greedy_select(estimates); break;
      case StrategyKind::kRandom: arm = random_select(arms, rng); break;
      case StrategyKind::kEpsilonGreedy:
        arm = epsilon_greedy_select(estimates, epsilon_at(spec.epsilon, t), rng);
        break;
      case StrategyKind::kBoltzmann:
        arm = boltzmann_select(estimates, temperature_at(spec.temperature, t), rng);
        break;
      case StrategyKind::kBayesianDropout:
        arm = bayes_dropout_select(*net, constant_input, rng);
        break;
    }
    const double reward = bandit_pull(cfg.bandit, arm, rng);
    if (uses_network) {
      const auto fwd = net->dropout_rate() > 0 ? forward(*net, constant_input, rng)
                                               : forward(*net, constant_input);
      const auto grad = backward(*net, fwd, arm, reward);
      apply_update(*net, grad, *adam, cfg.agent.adam);
    } else {
      const auto n = ++count[static_cast<std::size_t>(arm)];
      estimates(arm) += (reward - estimates(arm)) / static_cast<double>(n);
    }
    RunRecord r;
    r.strategy = std::string(spec.name());
    r.seed = seed;
    r.episode = t;
    r.episode_return = reward;
    r.schedule_value =
        schedule_value(spec, t, uses_network ? net->dropout_rate() : 0.0);
    r.env_steps = t + 1;
    r.wall_ms = cfg.no_timing ? 0.0 : elapsed_ms(start);
    out.records.push_back(std::move(r));
  }
  return out;
}

ExperimentResult run_grid(const ExperimentConfig& config,
                          RunOutput (*run_one)(const ExperimentConfig&,
                                               const PolicySpec&, std::uint64_t)) {
  config.validate();
  struct Job {
    std::size_t strategy;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < config.strategies.size(); ++s)
    for (std::size_t k = 0; k < config.seeds.size(); ++k) jobs.push_back({s, k});

  std::vector<RunOutput> outputs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        outputs[i] = run_one(config, config.strategies[jobs[i].strategy],
                             config.seeds[jobs[i].seed]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  std::size_t threads = config.jobs > 0
                            ? static_cast<std::size_t>(config.jobs)
                            : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult result;
  for (auto& o : outputs) {
    result.records.insert(result.records.end(),
                          std::make_move_iterator(o.records.begin()),
                          std::make_move_iterator(o.records.end()));
    if (o.diagnostics) result.diagnostics.push_back(std::move(*o.diagnostics));
    if (o.checkpoint) result.checkpoints.push_back(std::move(*o.checkpoint));
  }
  return result;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return v[n / 2];
  const double lo = v[n / 2 - 1];
  const double hi = v[n / 2];
  if (std::isinf(hi)) return hi;
  return 0.5 * (lo + hi);
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) fields.push_back(cell);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void write_file(const std::string& path,
                const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  body(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.environment == EnvironmentKind::kBandit)
    return run_bandit_suite(config);
  return run_grid(config, &run_cartpole);
}

ExperimentResult run_bandit_suite(const ExperimentConfig& config) {
  if (config.environment != EnvironmentKind::kBandit)
    throw std::invalid_argument("run_bandit_suite needs the bandit environment");
  return run_grid(config, &run_bandit);
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw std::invalid_argument("moving_average window must be >= 1");
  const auto w = static_cast<std::size_t>(window);
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t from = i + 1 >= w ? i + 1 - w : 0;
    double sum = 0;
    for (std::size_t k = from; k <= i; ++k) sum += series[k];
    out[i] = sum / static_cast<double>(i + 1 - from);
  }
  return out;
}

const StrategySummary* Summary::find(std::string_view strategy) const {
  for (const auto& s : strategies)
    if (s.strategy == strategy) return &s;
  return nullptr;
}

Summary summarize(const std::vector<RunRecord>& records, double threshold,
                  int window) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  if (window < 1) throw std::invalid_argument("summarize: window must be >= 1");

  // strategy -> seed -> returns ordered by episode, in first-appearance order.
  std::vector<std::string> strategy_order;
  std::map<std::string, std::vector<std::uint64_t>> seed_order;
  std::map<std::pair<std::string, std::uint64_t>,
           std::vector<std::pair<std::int64_t, double>>>
      series;
  for (const auto& r : records) {
    auto key = std::make_pair(r.strategy, r.seed);
    auto it = series.find(key);
    if (it == series.end()) {
      if (!seed_order.contains(r.strategy)) strategy_order.push_back(r.strategy);
      seed_order[r.strategy].push_back(r.seed);
      it = series.emplace(std::move(key), decltype(it->second){}).first;
    }
    it->second.emplace_back(r.episode, r.episode_return);
  }

  Summary summary;
  summary.threshold = threshold;
  summary.window = window;
  for (const auto& name : strategy_order) {
    StrategySummary s;
    s.strategy = name;
    for (const auto seed : seed_order[name]) {
      auto rows = series[{name, seed}];
      std::stable_sort(rows.begin(), rows.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<double> returns;
      returns.reserve(rows.size());
      for (const auto& row : rows) returns.push_back(row.second);
      const auto ma = moving_average(returns, window);

      RunSummary run;
      run.seed = seed;
      const std::size_t tail = std::min<std::size_t>(returns.size(),
                                                     static_cast<std::size_t>(window));
      run.final_mean = mean_of(std::span(returns).last(tail));
      run.best_moving_average = *std::max_element(ma.begin(), ma.end());
      for (std::size_t i = 0; i < ma.size(); ++i)
        if (ma[i] >= threshold) {
          run.episodes_to_threshold = rows[i].first;
          break;
        }
      run.mean_return = mean_of(returns);
      s.runs.push_back(run);
    }

    std::vector<double> finals, bests, reach, means;
    for (const auto& run : s.runs) {
      finals.push_back(run.final_mean);
      bests.push_back(run.best_moving_average);
      reach.push_back(run.episodes_to_threshold
                          ? static_cast<double>(*run.episodes_to_threshold)
                          : std::numeric_limits<double>::infinity());
      means.push_back(run.mean_return);
      if (run.episodes_to_threshold) ++s.solved_runs;
    }
    s.mean_final = mean_of(finals);
    double var = 0;
    for (const double f : finals) var += (f - s.mean_final) * (f - s.mean_final);
    s.std_final = std::sqrt(var / static_cast<double>(finals.size()));
    s.best_ma_mean = mean_of(bests);
    s.best_ma_median = median_of(bests);
    const double reach_median = median_of(reach);
    if (std::isfinite(reach_median)) s.episodes_to_threshold = reach_median;
    s.mean_return = mean_of(means);
    summary.strategies.push_back(std::move(s));
  }

  std::vector<const StrategySummary*> ranked;
  for (const auto& s : summary.strategies) ranked.push_back(&s);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    return a->mean_final > b->mean_final;
  });
  for (const auto* s : ranked) summary.ranking.push_back(s->strategy);
  return summary;
}

std::optional<bool> ordering_observed(const Summary& summary) {
  const auto* boltzmann = summary.find("boltzmann");
  const auto* dropout = summary.find("bayes-dropout");
  if (!boltzmann || !dropout) return std::nullopt;
  const double weaker_leader = std::min(boltzmann->mean_final, dropout->mean_final);
  bool any_baseline = false;
  for (const auto* name : {"greedy", "random", "eps-greedy"}) {
    if (const auto* s = summary.find(name)) {
      any_baseline = true;
      if (!(weaker_leader > s->mean_final)) return false;
    }
  }
  if (!any_baseline) return std::nullopt;
  return true;
}

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << "strategy,seed,episode,return,schedule_value,env_steps,wall_ms\n";
  for (const auto& r : records) {
    out << r.strategy << ',' << r.seed << ',' << r.episode << ','
        << format_real(r.episode_return) << ',' << format_real(r.schedule_value)
        << ',' << r.env_steps << ',' << format_real(r.wall_ms) << '\n';
  }
}

std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "strategy,seed,episode,return,schedule_value,env_steps,wall_ms")
    throw std::runtime_error("records csv: unexpected header '" + line + "'");
  std::vector<RunRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw std::runtime_error("records csv line " + std::to_string(line_no) +
                               ": expected 7 fields");
    RunRecord r;
    r.strategy = f[0];
    r.seed = std::stoull(f[1]);
    r.episode = std::stoll(f[2]);
    r.episode_return = parse_real<double>(f[3]);
    r.schedule_value = parse_real<double>(f[4]);
    r.env_steps = std::stoll(f[5]);
    r.wall_ms = parse_real<double>(f[6]);
    records.push_back(std::move(r));
  }
  return records;
}

void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
  write_file(path, [&](std::ostream& out) { write_records_csv(out, records); });
}

std::vector<RunRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_records_csv(in);
}

void write_summary_csv(std::ostream& out, const Summary& summary) {
  out << "strategy,runs,window,threshold,mean_final,std_final,best_ma_mean,"
         "best_ma_median,episodes_to_threshold,solved_runs,mean_return\n";
  for (const auto& s : summary.strategies) {
    out << s.strategy << ',' << s.runs.size() << ',' << summary.window << ','
        << format_real(summary.threshold) << ',' << format_real(s.mean_final)
        << ',' << format_real(s.std_final) << ',' << format_real(s.best_ma_mean)
        << ',' << format_real(s.best_ma_median) << ','
        << (s.episodes_to_threshold ? format_real(*s.episodes_to_threshold)
                                    : std::string("not reached"))
        << ',' << s.solved_runs << ',' << format_real(s.mean_return) << '\n';
  }
}

void emit_csv(const Summary& summary, const std::string& path) {
  write_file(path, [&](std::ostream& out) { write_summary_csv(out, summary); });
}

void write_report(std::ostream& out, const ExperimentConfig& config,
                  const ExperimentResult& result, const Summary& summary) {
  const bool cartpole = config.environment == EnvironmentKind::kCartPole;
  const std::string unit = cartpole ? "episode" : "pull";
  const std::string w = std::to_string(summary.window);

  out << "# Exploration strategy comparison\n\n";
  out << "- environment: " << environment_name(config.environment) << '\n';
  if (cartpole)
    out << "- episodes per run: " << config.episodes << '\n';
  else
    out << "- pulls per run: " << config.pulls << '\n';
  out << "- seeds:";
  for (const auto s : config.seeds) out << ' ' << s;
  out << "\n- master seed: " << config.master_seed << '\n';
  out << "- network: ";
  const auto dims = config.layer_dims();
  for (std::size_t i = 0; i < dims.size(); ++i) out << (i ? "-" : "") << dims[i];
  out << ", dropout " << format_real(config.network.dropout_rate) << "\n\n";

  out << "## Summary\n\n";
  out << "| strategy | runs | mean final-" << w << " | std | best MA" << w
      << " (mean) | best MA" << w << " (median) | " << unit << "s to "
      << fixed(summary.threshold, 0) << " (median) | solved runs |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : summary.strategies) {
    out << "| " << s.strategy << " | " << s.runs.size() << " | "
        << fixed(s.mean_final) << " | " << fixed(s.std_final) << " | "
        << fixed(s.best_ma_mean) << " | " << fixed(s.best_ma_median) << " | "
        << (s.episodes_to_threshold ? fixed(*s.episodes_to_threshold, 1)
                                    : std::string("not reached"))
        << " | " << s.solved_runs << " |\n";
  }

  out << "\n## Ranking by mean final-" << w << " return\n\n";
  for (std::size_t i = 0; i < summary.ranking.size(); ++i) {
    const auto* s = summary.find(summary.ranking[i]);
    out << i + 1 << ". " << s->strategy << " (" << fixed(s->mean_final) << ")\n";
  }
  out << "\nRankings come from a finite number of seeded stochastic runs. They "
         "are observations about this grid, not guarantees.\n";

  out << "\n## Ordering check\n\n";
  out << "Expectation: boltzmann and bayes-dropout both finish ahead of greedy, "
         "random and eps-greedy on mean final-"
      << w << " return.\n\n";
  const auto observed = ordering_observed(summary);
  if (!observed)
    out << "Result: not evaluated (strategies missing from the grid).\n";
  else
    out << "Result: " << (*observed ? "observed" : "not observed")
        << " in this run.\n";

  if (!result.diagnostics.empty()) {
    out << "\n## Dropout uncertainty at the upright state\n\n";
    out << "| strategy | seed | action | mean Q | variance |\n|---|---|---|---|---|\n";
    for (const auto& d : result.diagnostics)
      for (Eigen::Index a = 0; a < d.uncertainty.mean.size(); ++a)
        out << "| " << d.strategy << " | " << d.seed << " | " << a << " | "
            << format_real(d.uncertainty.mean(a)) << " | "
            << format_real(d.uncertainty.variance(a)) << " |\n";
  }

  // Mean over seeds of each strategy's moving-average curve.
  std::vector<std::vector<double>> curves;
  std::size_t length = std::numeric_limits<std::size_t>::max();
  for (const auto& s : summary.strategies) {
    std::vector<double> sum;
    std::size_t runs = 0;
    for (const auto& run : s.runs) {
      std::vector<std::pair<std::int64_t, double>> rows;
      for (const auto& r : result.records)
        if (r.strategy == s.strategy && r.seed == run.seed)
          rows.emplace_back(r.episode, r.episode_return);
      std::stable_sort(rows.begin(), rows.end());
      std::vector<double> returns;
      for (const auto& row : rows) returns.push_back(row.second);
      const auto ma = moving_average(returns, summary.window);
      if (sum.empty()) sum.assign(ma.size(), 0.0);
      const std::size_t n = std::min(sum.size(), ma.size());
      sum.resize(n);
      for (std::size_t i = 0; i < n; ++i) sum[i] += ma[i];
      ++runs;
    }
    for (auto& v : sum) v /= static_cast<double>(runs);
    length = std::min(length, sum.size());
    curves.push_back(std::move(sum));
  }
  if (curves.empty()) length = 0;
  const std::size_t stride = std::max<std::size_t>(1, (length + 499) / 500);

  out << "\n## Learning curves\n\n";
  out << "Mean over seeds of the trailing " << w << "-" << unit
      << " average return, every " << stride << " " << unit
      << (stride == 1 ? "" : "s") << ".\n\n```csv\n" << unit;
  for (const auto& s : summary.strategies) out << ',' << s.strategy;
  out << '\n';
  for (std::size_t i = 0; i < length; i += stride) {
    out << i;
    for (const auto& c : curves) out << ',' << fixed(c[i], 4);
    out << '\n';
  }
  out << "```\n";
}

Summary write_outputs(const ExperimentConfig& config,
                      const ExperimentResult& result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory '" + config.out_dir +
                             "': " + ec.message());
  const fs::path dir(config.out_dir);
  const Summary summary =
      summarize(result.records, config.solved_threshold, config.window);
  emit_csv(result.records, (dir / "records.csv").string());
  emit_csv(summary, (dir / "summary.csv").string());
  write_file((dir / "report.md").string(), [&](std::ostream& out) {
    write_report(out, config, result, summary);
  });
  if (config.save_checkpoints)
    for (const auto& c : result.checkpoints)
      save_network(c.network, (dir / (c.strategy + "_seed" +
                                      std::to_string(c.seed) + ".qnet"))
                                  .string());
  return summary;
}

}  // namespace rlx
