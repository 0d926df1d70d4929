#include "rlx/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rlx {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "env", "strategies", "seeds", "episodes", "pulls", "master_seed", "out",
      "no_timing", "jobs", "save_checkpoints", "gamma", "batch_size",
      "target_sync_interval", "warmup", "learn_every", "buffer_capacity",
      "grad_clip", "learning_rate", "hidden", "dropout_rate", "dropout_samples",
      "eps_start", "eps_end", "eps_anneal_steps", "temp_start", "temp_end",
      "temp_anneal_steps", "threshold", "window", "max_episode_steps",
      "arm_rewards", "noise_sigma"};
  return keys;
}

std::vector<std::string> strategy_names(const nlohmann::json& value) {
  std::vector<std::string> names;
  if (value.is_string()) {
    std::stringstream ss(value.get<std::string>());
    for (std::string name; std::getline(ss, name, ',');)
      if (!name.empty()) names.push_back(name);
  } else {
    names = value.get<std::vector<std::string>>();
  }
  return names;
}

template <typename T>
void read(const nlohmann::json& doc, const char* key, T& target) {
  if (auto it = doc.find(key); it != doc.end()) target = it->get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& item : doc.items())
    if (!known_keys().contains(item.key()))
      throw std::invalid_argument("unknown config key '" + item.key() + "'");

  ExperimentConfig c;
  try {
    if (doc.contains("env"))
      c.environment = parse_environment(doc["env"].get<std::string>());

    std::vector<std::string> names;
    if (doc.contains("strategies")) {
      names = strategy_names(doc["strategies"]);
    } else {
      for (const auto kind : all_strategies())
        names.emplace_back(strategy_name(kind));
    }
    for (const auto& name : names)
      c.strategies.push_back(default_policy(parse_strategy(name), c.environment));
    for (auto& s : c.strategies) {
      read(doc, "eps_start", s.epsilon.start);
      read(doc, "eps_end", s.epsilon.end);
      read(doc, "eps_anneal_steps", s.epsilon.anneal_steps);
      read(doc, "temp_start", s.temperature.start);
      read(doc, "temp_end", s.temperature.end);
      read(doc, "temp_anneal_steps", s.temperature.anneal_steps);
      read(doc, "dropout_samples", s.dropout_samples);
    }

    if (auto it = doc.find("seeds"); it != doc.end()) {
      c.seeds.clear();
      if (it->is_number_integer()) {
        const auto n = it->get<std::int64_t>();
        if (n < 1) throw std::invalid_argument("seeds count must be >= 1");
        for (std::int64_t i = 0; i < n; ++i) c.seeds.push_back(static_cast<std::uint64_t>(i));
      } else {
        c.seeds = it->get<std::vector<std::uint64_t>>();
      }
    }
    read(doc, "episodes", c.episodes);
    read(doc, "pulls", c.pulls);
    read(doc, "master_seed", c.master_seed);
    read(doc, "out", c.out_dir);
    read(doc, "no_timing", c.no_timing);
    read(doc, "jobs", c.jobs);
    read(doc, "save_checkpoints", c.save_checkpoints);

    read(doc, "gamma", c.agent.gamma);
    read(doc, "batch_size", c.agent.batch_size);
    read(doc, "target_sync_interval", c.agent.target_sync_interval);
    read(doc, "warmup", c.agent.warmup_transitions);
    read(doc, "learn_every", c.agent.learn_every);
    read(doc, "buffer_capacity", c.agent.buffer_capacity);
    read(doc, "grad_clip", c.agent.grad_clip_norm);
    read(doc, "learning_rate", c.agent.adam.learning_rate);

    read(doc, "hidden", c.network.hidden);
    read(doc, "dropout_rate", c.network.dropout_rate);

    read(doc, "threshold", c.solved_threshold);
    read(doc, "window", c.window);
    read(doc, "max_episode_steps", c.cartpole.max_episode_steps);
    read(doc, "arm_rewards", c.bandit.arm_rewards);
    read(doc, "noise_sigma", c.bandit.noise_sigma);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
}

}  // namespace rlx
