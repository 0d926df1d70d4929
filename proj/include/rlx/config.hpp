#pragma once

#include <string>

#include <json.hpp>

#include "rlx/harness.hpp"

namespace rlx {

/// Builds an experiment from a flat JSON object. Every key is optional;
/// missing keys keep ExperimentConfig defaults, unknown keys are an error.
///
///   env               "cartpole" | "bandit"
///   strategies        ["greedy", ...] or "greedy,random,..."
///   seeds             [7, 9] explicit list, or N meaning 0..N-1
///   episodes, pulls, master_seed, out, no_timing, jobs
///   gamma, batch_size, target_sync_interval, warmup, learn_every,
///   buffer_capacity, grad_clip, learning_rate
///   hidden            [64, 64]
///   dropout_rate, dropout_samples
///   eps_start, eps_end, eps_anneal_steps
///   temp_start, temp_end, temp_anneal_steps
///   threshold, window, max_episode_steps
///   arm_rewards       [1.0, 2.0]
///   noise_sigma
///
/// Schedule keys apply to every strategy; strategies not listed get the
/// environment defaults of default_policy().
ExperimentConfig config_from_json(const nlohmann::json& doc);

nlohmann::json read_json_file(const std::string& path);

}  // namespace rlx
