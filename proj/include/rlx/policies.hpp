#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rlx/qnet.hpp"
#include "rlx/rng.hpp"

namespace rlx {

enum class StrategyKind { kGreedy, kRandom, kEpsilonGreedy, kBoltzmann, kBayesianDropout };

// CLI/config spelling: greedy, random, eps-greedy, boltzmann, bayes-dropout.
std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);
const std::vector<StrategyKind>& all_strategies();

/// Linear anneal from `start` to `end` over `anneal_steps`, flat afterwards.
struct LinearSchedule {
  double start = 1.0;
  double end = 0.1;
  std::int64_t anneal_steps = 10000;

  double at(std::int64_t step) const;
};

inline constexpr double kMinTemperature = 1e-6;

struct PolicySpec {
  StrategyKind kind = StrategyKind::kEpsilonGreedy;
  LinearSchedule epsilon{1.0, 0.1, 10000};
  LinearSchedule temperature{1.0, 0.05, 10000};
  int dropout_samples = 10;

  // Throws std::invalid_argument on a schedule outside its domain.
  void validate() const;
  std::string_view name() const { return strategy_name(kind); }
};

/// Probabilities over actions; non-negative and summing to one.
struct ActionDistribution {
  Eigen::VectorXd probabilities;
};

namespace detail {
template <typename Derived>
void require_finite_nonempty(const Eigen::MatrixBase<Derived>& q) {
  if (q.size() == 0) throw std::invalid_argument("q-values are empty");
  if (!q.allFinite()) throw std::invalid_argument("q-values are not finite");
}
}  // namespace detail

// argmax, lowest index on ties.
template <typename Derived>
int greedy_select(const Eigen::MatrixBase<Derived>& q) {
  detail::require_finite_nonempty(q);
  int best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = static_cast<int>(i);
  return best;
}

int random_select(int action_count, Rng& rng);

double epsilon_at(const LinearSchedule& schedule, std::int64_t global_step);
// Never below kMinTemperature.
double temperature_at(const LinearSchedule& schedule, std::int64_t global_step);

// Always consumes one uniform draw; the exploratory branch is uniform over
// all actions, the greedy one included.
template <typename Derived>
int epsilon_greedy_select(const Eigen::MatrixBase<Derived>& q, double epsilon,
                          Rng& rng) {
  detail::require_finite_nonempty(q);
  if (!(epsilon >= 0 && epsilon <= 1))
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (rng.uniform() < epsilon)
    return random_select(static_cast<int>(q.size()), rng);
  return greedy_select(q);
}

// exp(q/T) normalized, computed after subtracting max(q).
template <typename Derived>
ActionDistribution boltzmann_distribution(const Eigen::MatrixBase<Derived>& q,
                                          double temperature) {
  detail::require_finite_nonempty(q);
  if (!(temperature > 0))
    throw std::invalid_argument("temperature must be > 0");
  const Eigen::VectorXd qd = q.template cast<double>();
  const double shift = qd.maxCoeff();
  // std::exp per element: Eigen's packet exp clamps large negative inputs
  // to a constant near 5.6e-309, which breaks monotonicity in the tails.
  Eigen::VectorXd p = ((qd.array() - shift) / temperature)
                          .unaryExpr([](double v) { return std::exp(v); })
                          .matrix();
  p /= p.sum();
  return {std::move(p)};
}

// Inverse-CDF draw; one uniform per call.
int sample_action(const ActionDistribution& dist, Rng& rng);

template <typename Derived>
int boltzmann_select(const Eigen::MatrixBase<Derived>& q, double temperature,
                     Rng& rng) {
  return sample_action(boltzmann_distribution(q, temperature), rng);
}

/// Thompson-style selection: argmax of one dropout-perturbed forward pass.
template <typename Derived>
int bayes_dropout_select(const QNetworkd& net,
                         const Eigen::MatrixBase<Derived>& state, Rng& rng) {
  const auto fwd = forward(net, state, rng);
  return greedy_select(fwd.q.col(0));
}

struct ActionUncertainty {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // unbiased sample variance
};

/// Mean and variance of each action's Q over repeated dropout passes.
template <typename Derived>
ActionUncertainty action_uncertainty(const QNetworkd& net,
                                     const Eigen::MatrixBase<Derived>& state,
                                     int dropout_samples, Rng& rng) {
  if (dropout_samples < 2)
    throw std::invalid_argument("action_uncertainty needs >= 2 samples");
  if (state.cols() != 1)
    throw std::invalid_argument("action_uncertainty takes a single state");
  // One pass per sample. A tiled batch would be faster, but GEMM rounding
  // differs between columns and leaks into the variance.
  Eigen::MatrixXd q(net.action_count(), dropout_samples);
  for (int i = 0; i < dropout_samples; ++i) q.col(i) = forward(net, state, rng).q;
  // Shifted by the first sample: identical samples give exactly zero.
  const Eigen::MatrixXd shifted = q.colwise() - q.col(0);
  const Eigen::VectorXd sum = shifted.rowwise().sum();
  const double n = dropout_samples;
  ActionUncertainty u;
  u.mean = q.col(0) + sum / n;
  u.variance = ((shifted.rowwise().squaredNorm() - sum.cwiseAbs2() / n) / (n - 1.0))
                   .cwiseMax(0.0);
  return u;
}

/// Value of the strategy's schedule at `global_step`: epsilon, temperature,
/// the dropout rate for bayes-dropout, 0 otherwise.
double schedule_value(const PolicySpec& spec, std::int64_t global_step,
                      double dropout_rate);

/// Uniform entry point used by the learners. Greedy, eps-greedy and
/// boltzmann act on the deterministic Q-values of `net`; bayes-dropout
/// samples a dropout pass instead; random never evaluates the network.
int select_action(const PolicySpec& spec, const QNetworkd& net,
                  const Eigen::VectorXd& state, std::int64_t global_step,
                  Rng& rng);

}  // namespace rlx
