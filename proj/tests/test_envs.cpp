#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "rlx/envs.hpp"
#include "rlx/policies.hpp"

namespace rlx {
namespace {

TEST(CartPoleReset, ComponentsWithinBounds) {
  Rng rng(0);
  CartPole env;
  for (int i = 0; i < 10000; ++i) {
    const auto s = env.reset(rng).as_vector();
    ASSERT_LE(s.cwiseAbs().maxCoeff(), 0.05);
  }
}

TEST(CartPoleReset, DeterministicGivenSeed) {
  Rng a(5), b(5);
  CartPole e1, e2;
  EXPECT_EQ(e1.reset(a), e2.reset(b));
  EXPECT_EQ(e1.steps(), 0);
}

TEST(CartPoleReset, ComponentMeansNearZero) {
  Rng rng(12);
  CartPole env;
  constexpr int n = 100000;
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (int i = 0; i < n; ++i) sum += env.reset(rng).as_vector();
  // Uniform on [-0.05, 0.05]: sd = 0.1 / sqrt(12).
  const double se = 0.1 / std::sqrt(12.0) / std::sqrt(n);
  for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(sum(k) / n), 3 * se) << k;
}

TEST(CartPoleStep, PushRightFromOrigin) {
  const auto next = cartpole_dynamics({}, {}, 1);
  EXPECT_EQ(next.x, 0.0);
  EXPECT_NEAR(next.x_dot, 0.1951219512195122, 1e-15);
  EXPECT_EQ(next.theta, 0.0);
  EXPECT_NEAR(next.theta_dot, -0.2926829268292683, 1e-15);
}

TEST(CartPoleStep, LeftIsMirrorOfRightAtOrigin) {
  const auto right = cartpole_dynamics({}, {}, 1);
  const auto left = cartpole_dynamics({}, {}, 0);
  EXPECT_EQ(left.as_vector(), -right.as_vector());
}

TEST(CartPoleStep, CrossingTheEdgeEndsEpisodeWithReward) {
  for (const int action : {0, 1}) {
    CartPole env;
    env.reset(CartPoleState{2.39, 3.0, 0.0, 0.0});
    const auto r = env.step(action);
    EXPECT_GT(r.next_state.x, 2.4);
    EXPECT_TRUE(r.done);
    EXPECT_FALSE(r.truncated);
    EXPECT_EQ(r.reward, 1.0);
  }
}

TEST(CartPoleStep, TerminalStepPaysRewardAndBlocksFurtherSteps) {
  CartPole env;
  Rng rng(1);
  env.reset(rng);
  StepResult r;
  do {
    r = env.step(1);  // always right: the pole falls over quickly
  } while (!r.done && !r.truncated);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_THROW(env.step(0), std::logic_error);
}

TEST(CartPoleStep, TruncatesAtTimeLimit) {
  CartPoleParams p;
  p.max_episode_steps = 5;
  CartPole env(p);
  Rng rng(2);
  env.reset(rng);
  StepResult r;
  for (int i = 0; i < 5; ++i) r = env.step(i % 2);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(env.steps(), 5);
  EXPECT_TRUE(env.episode_over());
}

TEST(CartPoleStep, UnforcedUprightPoleIsAFixedPoint) {
  CartPoleParams p;
  p.force_magnitude = 0.0;
  CartPoleState s{};
  for (int i = 0; i < 1000; ++i) s = cartpole_dynamics(p, s, i % 2);
  EXPECT_EQ(s, CartPoleState{});
}

TEST(CartPoleStep, MatchesIndependentDynamics) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const CartPoleState s{rng.uniform(-2.4, 2.4), rng.uniform(-3, 3),
                          rng.uniform(-0.21, 0.21), rng.uniform(-3, 3)};
    const int action = static_cast<int>(rng.below(2));
    const auto got = cartpole_dynamics({}, s, action).as_vector();
    const auto want = oracle::cartpole_step({s.x, s.x_dot, s.theta, s.theta_dot}, action);
    for (int k = 0; k < 4; ++k) ASSERT_NEAR(got(k), want[k], 1e-12) << i << ":" << k;
  }
}

TEST(CartPoleStep, RejectsInvalidAction) {
  EXPECT_THROW(cartpole_dynamics({}, {}, 2), std::out_of_range);
}

TEST(CartPoleEpisode, ReturnEqualsLengthAndStaysInRange) {
  Rng rng(9);
  CartPole env;
  for (int ep = 0; ep < 200; ++ep) {
    env.reset(rng);
    double ret = 0;
    StepResult r;
    do {
      ASSERT_TRUE(env.state().finite());
      r = env.step(random_select(2, rng));
      ret += r.reward;
      if (!r.done) {
        ASSERT_LE(std::abs(r.next_state.x), 2.4);
        ASSERT_LE(std::abs(r.next_state.theta), 0.2095);
      }
    } while (!r.done && !r.truncated);
    EXPECT_EQ(ret, env.steps());
    EXPECT_GE(env.steps(), 1);
    EXPECT_LE(env.steps(), 500);
  }
}

TEST(CartPoleEpisode, TrajectoryDeterministicGivenSeedAndActions) {
  auto roll = [] {
    Rng rng(77);
    CartPole env;
    std::vector<CartPoleState> states{env.reset(rng)};
    for (int i = 0; i < 30 && !env.episode_over(); ++i)
      states.push_back(env.step((i * 7) % 3 == 0 ? 1 : 0).next_state);
    return states;
  };
  EXPECT_EQ(roll(), roll());
}

TEST(Trajectory, CsvDumpReplaysAgainstOracle) {
  Rng rng(4);
  CartPole env;
  env.reset(rng);
  std::vector<TrajectoryRow> rows;
  for (int step = 0; !env.episode_over(); ++step) {
    TrajectoryRow row;
    row.step = step;
    row.state = env.state();
    row.action = random_select(2, rng);
    const auto r = env.step(row.action);
    row.reward = r.reward;
    row.done = r.done;
    rows.push_back(row);
  }
  std::stringstream csv;
  write_trajectory_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "step,x,x_dot,theta,theta_dot,action,reward,done");
  const auto parsed = read_trajectory_csv(csv);
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i + 1 < parsed.size(); ++i) {
    const auto& s = parsed[i].state;
    const auto want = oracle::cartpole_step({s.x, s.x_dot, s.theta, s.theta_dot},
                                            parsed[i].action);
    const auto& n = parsed[i + 1].state;
    EXPECT_NEAR(n.x, want[0], 1e-12);
    EXPECT_NEAR(n.x_dot, want[1], 1e-12);
    EXPECT_NEAR(n.theta, want[2], 1e-12);
    EXPECT_NEAR(n.theta_dot, want[3], 1e-12);
    EXPECT_EQ(parsed[i].state, rows[i].state);  // exact text round trip
  }
  EXPECT_TRUE(parsed.back().done || env.steps() == 500);
}

TEST(Bandit, DefaultArmsPayOneAndTwo) {
  Rng rng(0);
  const BanditSpec spec;
  EXPECT_EQ(bandit_pull(spec, 0, rng), 1.0);
  EXPECT_EQ(bandit_pull(spec, 1, rng), 2.0);
  EXPECT_THROW(bandit_pull(spec, 2, rng), std::out_of_range);
  EXPECT_THROW(bandit_pull(spec, -1, rng), std::out_of_range);
}

TEST(Bandit, NoisyArmMean) {
  Rng rng(8);
  BanditSpec spec;
  spec.noise_sigma = 0.1;
  double sum = 0;
  for (int i = 0; i < 100000; ++i) sum += bandit_pull(spec, 1, rng);
  EXPECT_NEAR(sum / 100000, 2.0, 0.01);
}

TEST(Bandit, NeedsTwoArms) {
  BanditSpec spec;
  spec.arm_rewards = {1.0};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace rlx
