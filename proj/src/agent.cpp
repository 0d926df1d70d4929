#include "rlx/agent.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace rlx {

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be > 0");
  slots_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
  slots_[head_] = std::move(t);
  head_ = (head_ + 1) % slots_.size();
  if (size_ < slots_.size()) ++size_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer index out of range");
  const std::size_t oldest = size_ < slots_.size() ? 0 : head_;
  return slots_[(oldest + i) % slots_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch,
                                                      Rng& rng) const {
  if (batch > size_)
    throw std::invalid_argument("replay buffer holds " + std::to_string(size_) +
                                " transitions, batch needs " +
                                std::to_string(batch));
  std::vector<std::size_t> chosen;
  chosen.reserve(batch);
  for (std::size_t j = size_ - batch; j < size_; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end())
      chosen.push_back(t);
    else
      chosen.push_back(j);
  }
  for (std::size_t i = chosen.size(); i > 1; --i)
    std::swap(chosen[i - 1], chosen[rng.below(i)]);
  return chosen;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  std::vector<Transition> out;
  out.reserve(batch);
  for (const auto i : sample_indices(batch, rng)) out.push_back((*this)[i]);
  return out;
}

void AgentConfig::validate() const {
  if (!(gamma >= 0 && gamma <= 1))
    throw std::invalid_argument("gamma must lie in [0, 1]");
  if (batch_size < 1 || target_sync_interval < 1 || warmup_transitions < 0 ||
      learn_every < 1 || buffer_capacity < 1)
    throw std::invalid_argument("agent config sizes must be positive");
  if (batch_size > buffer_capacity)
    throw std::invalid_argument("batch_size exceeds buffer_capacity");
}

double td_target(const Transition& t, double gamma, const QNetworkd& target_net) {
  if (t.terminal) return t.reward;
  return t.reward + gamma * q_values(target_net, t.next_state).maxCoeff();
}

void sync_target(const QNetworkd& online, QNetworkd& target) {
  if (!online.same_architecture(target))
    throw std::invalid_argument("sync_target: network shapes differ");
  target.params() = online.params();
  target.set_dropout_rate(online.dropout_rate());
  target.set_activation(online.activation());
}

double learn_step(QNetworkd& online, const QNetworkd& target,
                  const ReplayBuffer& buffer, const AgentConfig& config,
                  AdamState<double>& adam, Rng& rng, bool stochastic_forward) {
  const auto need = static_cast<std::size_t>(
      std::max(config.batch_size, config.warmup_transitions));
  if (buffer.size() < need)
    throw std::invalid_argument("learn_step: replay buffer underfull");

  const auto indices =
      buffer.sample_indices(static_cast<std::size_t>(config.batch_size), rng);
  const auto batch = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index state_size = online.input_size();

  Eigen::MatrixXd states(state_size, batch);
  Eigen::MatrixXd next_states(state_size, batch);
  std::vector<int> actions(indices.size());
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto& t = buffer[indices[static_cast<std::size_t>(j)]];
    states.col(j) = t.state;
    next_states.col(j) = t.next_state;
    actions[static_cast<std::size_t>(j)] = t.action;
  }

  // Same values as td_target() per column, evaluated as one batch.
  const Eigen::RowVectorXd next_max =
      forward(target, next_states).q.colwise().maxCoeff();
  std::vector<double> targets(indices.size());
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto& t = buffer[indices[static_cast<std::size_t>(j)]];
    targets[static_cast<std::size_t>(j)] =
        t.terminal ? t.reward : t.reward + config.gamma * next_max(j);
  }

  const auto fwd =
      stochastic_forward ? forward(online, states, rng) : forward(online, states);
  auto grad = backward(online, fwd, std::span<const int>(actions),
                       std::span<const double>(targets));
  clip_gradient_norm<double>(grad, config.grad_clip_norm);
  apply_update(online, grad, adam, config.adam);
  return grad.loss;
}

DqnLearner::DqnLearner(const LayerDims& dims, double dropout_rate,
                       const AgentConfig& cfg, Rng& rng)
    : online(init_network<double>(dims, rng, dropout_rate)),
      target(online),
      buffer(static_cast<std::size_t>(cfg.buffer_capacity)),
      adam(AdamState<double>::for_network(online)),
      config(cfg) {
  config.validate();
}

EpisodeResult run_episode(CartPole& env, DqnLearner& learner,
                          const PolicySpec& policy, std::int64_t global_step,
                          Rng& rng) {
  const auto& cfg = learner.config;
  const bool stochastic_training =
      policy.kind == StrategyKind::kBayesianDropout &&
      learner.online.dropout_rate() > 0;
  const auto warm_size = static_cast<std::size_t>(
      std::max(cfg.warmup_transitions, cfg.batch_size));

  EpisodeResult result;
  Eigen::VectorXd state = env.reset(rng).as_vector();
  for (;;) {
    const bool warming = learner.buffer.size() <
                         static_cast<std::size_t>(cfg.warmup_transitions);
    const int action =
        warming ? random_select(CartPole::kActionCount, rng)
                : select_action(policy, learner.online, state, global_step, rng);
    const StepResult step = env.step(action);
    Eigen::VectorXd next = step.next_state.as_vector();
    learner.buffer.push({state, action, step.reward, next, step.done});
    result.episode_return += step.reward;
    ++result.steps;
    ++global_step;

    if (learner.buffer.size() >= warm_size && global_step % cfg.learn_every == 0) {
      result.loss_sum += learn_step(learner.online, learner.target,
                                    learner.buffer, cfg, learner.adam, rng,
                                    stochastic_training);
      ++result.gradient_steps;
      ++learner.gradient_steps;
      if (learner.gradient_steps % cfg.target_sync_interval == 0)
        sync_target(learner.online, learner.target);
    }

    if (step.done || step.truncated) {
      result.truncated = step.truncated;
      break;
    }
    state = std::move(next);
  }
  result.global_step = global_step;
  return result;
}

}  // namespace rlx
