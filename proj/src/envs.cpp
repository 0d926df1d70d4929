#include "rlx/envs.hpp"

#include <istream>
#include <sstream>
#include <stdexcept>

#include "rlx/qnet_io.hpp"

namespace rlx {

void CartPoleParams::validate() const {
  if (!(gravity > 0 && cart_mass > 0 && pole_mass > 0 && half_pole_length > 0 &&
        force_magnitude >= 0 && tau > 0 && x_threshold > 0 &&
        theta_threshold > 0 && max_episode_steps > 0))
    throw std::invalid_argument("CartPoleParams: constants must be positive");
}

CartPoleState cartpole_dynamics(const CartPoleParams& p,
                                const CartPoleState& s, int action) {
  if (action != 0 && action != 1)
    throw std::out_of_range("cart-pole action must be 0 or 1");
  const double force = action == 1 ? p.force_magnitude : -p.force_magnitude;
  const double total_mass = p.cart_mass + p.pole_mass;
  const double polemass_length = p.pole_mass * p.half_pole_length;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);

  const double temp =
      (force + polemass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_pole_length *
       (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  CartPoleState next;
  next.x = s.x + p.tau * s.x_dot;
  next.x_dot = s.x_dot + p.tau * x_acc;
  next.theta = s.theta + p.tau * s.theta_dot;
  next.theta_dot = s.theta_dot + p.tau * theta_acc;
  return next;
}

bool cartpole_out_of_bounds(const CartPoleParams& p, const CartPoleState& s) {
  return s.x < -p.x_threshold || s.x > p.x_threshold ||
         s.theta < -p.theta_threshold || s.theta > p.theta_threshold;
}

CartPole::CartPole(CartPoleParams params) : params_(params) {
  params_.validate();
}

CartPoleState CartPole::reset(Rng& rng) {
  state_.x = rng.uniform(-0.05, 0.05);
  state_.x_dot = rng.uniform(-0.05, 0.05);
  state_.theta = rng.uniform(-0.05, 0.05);
  state_.theta_dot = rng.uniform(-0.05, 0.05);
  steps_ = 0;
  over_ = false;
  return state_;
}

CartPoleState CartPole::reset(const CartPoleState& start) {
  if (!start.finite()) throw std::invalid_argument("start state must be finite");
  state_ = start;
  steps_ = 0;
  over_ = false;
  return state_;
}

StepResult CartPole::step(int action) {
  if (over_)
    throw std::logic_error("CartPole::step called on a finished episode");
  StepResult r;
  r.next_state = cartpole_dynamics(params_, state_, action);
  r.reward = 1.0;
  r.done = cartpole_out_of_bounds(params_, r.next_state);
  ++steps_;
  r.truncated = !r.done && steps_ >= params_.max_episode_steps;
  state_ = r.next_state;
  over_ = r.done || r.truncated;
  return r;
}

void write_trajectory_csv(std::ostream& out,
                          const std::vector<TrajectoryRow>& rows) {
  out << "step,x,x_dot,theta,theta_dot,action,reward,done\n";
  for (const auto& r : rows) {
    out << r.step << ',' << format_real(r.state.x) << ','
        << format_real(r.state.x_dot) << ',' << format_real(r.state.theta)
        << ',' << format_real(r.state.theta_dot) << ',' << r.action << ','
        << format_real(r.reward) << ',' << (r.done ? 1 : 0) << '\n';
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "step,x,x_dot,theta,theta_dot,action,reward,done")
    throw std::runtime_error("trajectory csv: bad header");
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8)
      throw std::runtime_error("trajectory csv: expected 8 fields: " + line);
    TrajectoryRow r;
    r.step = std::stoi(f[0]);
    r.state = {parse_real<double>(f[1]), parse_real<double>(f[2]),
               parse_real<double>(f[3]), parse_real<double>(f[4])};
    r.action = std::stoi(f[5]);
    r.reward = parse_real<double>(f[6]);
    r.done = f[7] == "1";
    rows.push_back(r);
  }
  return rows;
}

void BanditSpec::validate() const {
  if (arm_rewards.size() < 2)
    throw std::invalid_argument("bandit needs at least 2 arms");
  if (noise_sigma < 0)
    throw std::invalid_argument("bandit noise_sigma must be >= 0");
}

double bandit_pull(const BanditSpec& spec, int arm, Rng& rng) {
  if (arm < 0 || arm >= spec.arm_count())
    throw std::out_of_range("bandit arm " + std::to_string(arm) +
                            " out of range");
  double reward = spec.arm_rewards[static_cast<std::size_t>(arm)];
  if (spec.noise_sigma > 0) reward += spec.noise_sigma * rng.normal();
  return reward;
}

}  // namespace rlx
