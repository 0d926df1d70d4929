#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "rlx/rng.hpp"

namespace rlx {

// Cart position (m), cart velocity (m/s), pole angle from vertical (rad),
// pole angular velocity (rad/s).
struct CartPoleState {
  double x = 0;
  double x_dot = 0;
  double theta = 0;
  double theta_dot = 0;

  Eigen::Vector4d as_vector() const { return {x, x_dot, theta, theta_dot}; }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(x_dot) && std::isfinite(theta) &&
           std::isfinite(theta_dot);
  }
  bool operator==(const CartPoleState&) const = default;
};

// Constants of the classic cart-pole task, v1 time limit.
struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_pole_length = 0.5;
  double force_magnitude = 10.0;  // 0 allowed: unforced test variant
  double tau = 0.02;
  double x_threshold = 2.4;
  double theta_threshold = 12.0 * 2.0 * std::numbers::pi / 360.0;
  int max_episode_steps = 500;

  void validate() const;
};

enum class CartPoleAction : int { kLeft = 0, kRight = 1 };

struct StepResult {
  CartPoleState next_state;
  double reward = 0;
  bool done = false;       // failure: cart or pole out of bounds
  bool truncated = false;  // time limit reached without failure
};

/// One explicit-Euler step of the cart-pole equations of motion. Pure; no
/// bounds or time-limit handling.
CartPoleState cartpole_dynamics(const CartPoleParams& params,
                                const CartPoleState& s, int action);

bool cartpole_out_of_bounds(const CartPoleParams& params,
                            const CartPoleState& s);

class CartPole {
 public:
  static constexpr int kStateSize = 4;
  static constexpr int kActionCount = 2;

  explicit CartPole(CartPoleParams params = {});

  // Each component uniform in [-0.05, 0.05]; zeroes the step counter.
  CartPoleState reset(Rng& rng);
  // Starts an episode from a given state.
  CartPoleState reset(const CartPoleState& start);

  // Throws std::logic_error if the episode already ended.
  StepResult step(int action);

  const CartPoleState& state() const { return state_; }
  int steps() const { return steps_; }
  bool episode_over() const { return over_; }
  const CartPoleParams& params() const { return params_; }

 private:
  CartPoleParams params_;
  CartPoleState state_;
  int steps_ = 0;
  bool over_ = true;
};

struct TrajectoryRow {
  int step = 0;
  CartPoleState state;  // state the action was taken in
  int action = 0;
  double reward = 0;
  bool done = false;
};

// Header: step,x,x_dot,theta,theta_dot,action,reward,done
void write_trajectory_csv(std::ostream& out,
                          const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

struct BanditSpec {
  std::vector<double> arm_rewards{1.0, 2.0};
  // Standard deviation of additive Gaussian reward noise; 0 = deterministic.
  double noise_sigma = 0.0;

  void validate() const;
  int arm_count() const { return static_cast<int>(arm_rewards.size()); }
};

// Draws from rng only when noise_sigma > 0.
double bandit_pull(const BanditSpec& spec, int arm, Rng& rng);

}  // namespace rlx
