#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "rlx/envs.hpp"
#include "rlx/policies.hpp"
#include "rlx/qnet.hpp"
#include "rlx/rng.hpp"

namespace rlx {

struct Transition {
  Eigen::VectorXd state;
  int action = 0;
  double reward = 0;
  Eigen::VectorXd next_state;
  // Failure only. A time-limit cutoff is not terminal and still bootstraps.
  bool terminal = false;
};

/// Bounded FIFO of transitions; pushing into a full buffer evicts the oldest.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  void push(Transition t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  bool empty() const { return size_ == 0; }

  // i = 0 is the oldest stored transition.
  const Transition& operator[](std::size_t i) const;

  /// `batch` distinct positions, uniform without replacement, in random
  /// order (Floyd's subset sampling followed by a Fisher-Yates shuffle).
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;
  std::vector<Transition> sample(std::size_t batch, Rng& rng) const;

 private:
  std::vector<Transition> slots_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
};

struct AgentConfig {
  double gamma = 0.99;
  int batch_size = 64;
  int target_sync_interval = 200;  // gradient steps; 1 = no target lag
  int warmup_transitions = 500;    // collected with the random policy
  int learn_every = 1;             // environment steps per gradient step
  int buffer_capacity = 10000;
  double grad_clip_norm = 0.0;     // <= 0 disables clipping
  AdamConfig adam;

  void validate() const;
};

// y = r if terminal, else r + gamma * max_a Q_target(s', a).
double td_target(const Transition& t, double gamma, const QNetworkd& target_net);

/// Copies online parameters into target, bit for bit.
void sync_target(const QNetworkd& online, QNetworkd& target);

/// One gradient step on a uniformly sampled batch. The online forward pass
/// uses per-sample dropout masks when `stochastic_forward` is set. Returns
/// the batch-mean squared TD error before the update.
double learn_step(QNetworkd& online, const QNetworkd& target,
                  const ReplayBuffer& buffer, const AgentConfig& config,
                  AdamState<double>& adam, Rng& rng,
                  bool stochastic_forward = false);

/// Online and target networks, replay memory and optimizer of one DQN run.
struct DqnLearner {
  DqnLearner(const LayerDims& dims, double dropout_rate,
             const AgentConfig& config, Rng& rng);

  QNetworkd online;
  QNetworkd target;
  ReplayBuffer buffer;
  AdamState<double> adam;
  AgentConfig config;
  std::int64_t gradient_steps = 0;
};

struct EpisodeResult {
  double episode_return = 0;
  int steps = 0;
  std::int64_t global_step = 0;  // after the episode
  int gradient_steps = 0;        // taken during the episode
  double loss_sum = 0;
  bool truncated = false;
};

/// Plays one CartPole episode under `policy`, storing every transition and
/// learning as configured. Until the buffer holds warmup_transitions the
/// random policy acts instead.
EpisodeResult run_episode(CartPole& env, DqnLearner& learner,
                          const PolicySpec& policy, std::int64_t global_step,
                          Rng& rng);

}  // namespace rlx
