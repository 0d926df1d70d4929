#include "rlx/policies.hpp"

#include <algorithm>

namespace rlx {

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kGreedy: return "greedy";
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kEpsilonGreedy: return "eps-greedy";
    case StrategyKind::kBoltzmann: return "boltzmann";
    case StrategyKind::kBayesianDropout: return "bayes-dropout";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (const auto kind : all_strategies())
    if (strategy_name(kind) == name) return kind;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

const std::vector<StrategyKind>& all_strategies() {
  static const std::vector<StrategyKind> kinds = {
      StrategyKind::kGreedy, StrategyKind::kRandom, StrategyKind::kEpsilonGreedy,
      StrategyKind::kBoltzmann, StrategyKind::kBayesianDropout};
  return kinds;
}

double LinearSchedule::at(std::int64_t step) const {
  if (step < 0) throw std::invalid_argument("global_step must be >= 0");
  if (step >= anneal_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(anneal_steps);
  return start + (end - start) * frac;
}

void PolicySpec::validate() const {
  if (!(epsilon.end >= 0 && epsilon.end <= epsilon.start && epsilon.start <= 1))
    throw std::invalid_argument("epsilon schedule needs 0 <= end <= start <= 1");
  if (!(temperature.start > 0 && temperature.end > 0))
    throw std::invalid_argument("temperature schedule values must be > 0");
  if (epsilon.anneal_steps < 1 || temperature.anneal_steps < 1)
    throw std::invalid_argument("anneal_steps must be >= 1");
  if (dropout_samples < 1)
    throw std::invalid_argument("dropout_samples must be >= 1");
}

int random_select(int action_count, Rng& rng) {
  if (action_count < 1) throw std::invalid_argument("action_count must be >= 1");
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(action_count)));
}

double epsilon_at(const LinearSchedule& schedule, std::int64_t global_step) {
  return schedule.at(global_step);
}

double temperature_at(const LinearSchedule& schedule, std::int64_t global_step) {
  if (!(schedule.start > 0 && schedule.end > 0))
    throw std::invalid_argument("temperature schedule values must be > 0");
  return std::max(schedule.at(global_step), kMinTemperature);
}

int sample_action(const ActionDistribution& dist, Rng& rng) {
  const auto& p = dist.probabilities;
  const double u = rng.uniform();
  double cumulative = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    cumulative += p(i);
    if (u < cumulative) return static_cast<int>(i);
  }
  // u landed in the rounding gap above the last partial sum.
  for (Eigen::Index i = p.size(); i-- > 0;)
    if (p(i) > 0) return static_cast<int>(i);
  return static_cast<int>(p.size()) - 1;
}

double schedule_value(const PolicySpec& spec, std::int64_t global_step,
                      double dropout_rate) {
  switch (spec.kind) {
    case StrategyKind::kEpsilonGreedy: return epsilon_at(spec.epsilon, global_step);
    case StrategyKind::kBoltzmann: return temperature_at(spec.temperature, global_step);
    case StrategyKind::kBayesianDropout: return dropout_rate;
    default: return 0.0;
  }
}

int select_action(const PolicySpec& spec, const QNetworkd& net,
                  const Eigen::VectorXd& state, std::int64_t global_step,
                  Rng& rng) {
  switch (spec.kind) {
    case StrategyKind::kGreedy:
      return greedy_select(q_values(net, state));
    case StrategyKind::kRandom:
      return random_select(static_cast<int>(net.action_count()), rng);
    case StrategyKind::kEpsilonGreedy:
      return epsilon_greedy_select(q_values(net, state),
                                   epsilon_at(spec.epsilon, global_step), rng);
    case StrategyKind::kBoltzmann:
      return boltzmann_select(q_values(net, state),
                              temperature_at(spec.temperature, global_step), rng);
    case StrategyKind::kBayesianDropout:
      return bayes_dropout_select(net, state, rng);
  }
  throw std::logic_error("unhandled strategy");
}

}  // namespace rlx
