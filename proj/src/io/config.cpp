#include "advrl/io/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "advrl/errors.hpp"

namespace advrl {
namespace {

using nlohmann::json;

// Reads typed fields out of one JSON object, remembering which keys were used
// so that leftovers can be rejected.
class Section {
 public:
  Section(const json& doc, std::string name, std::vector<std::string>& notices)
      : name_(std::move(name)), notices_(notices) {
    if (doc.is_null()) {
      obj_ = json::object();
    } else if (!doc.is_object()) {
      throw ConfigError("config section '" + name_ + "' must be an object");
    } else {
      obj_ = doc;
    }
  }

  template <typename T>
  void read(const char* key, T& value) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) {
      notices_.push_back(name_ + "." + key + " not set; using default");
      return;
    }
    try {
      value = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key " + name_ + "." + key + " has the wrong type");
    }
  }

  // Enum-like string fields.
  template <typename T, typename Parse>
  void read_tag(const char* key, T& value, Parse parse) {
    std::string s;
    bool present = obj_.contains(key);
    read(key, s);
    if (!present) return;
    try {
      value = parse(s);
    } catch (const InvalidInput& e) {
      throw ConfigError("config key " + name_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key: " + name_ + "." + it.key());
  }

 private:
  json obj_;
  std::string name_;
  std::vector<std::string>& notices_;
  std::set<std::string> seen_;
};

}  // namespace

ParsedConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    static const std::set<std::string> sections{"env", "agent", "attack", "plan", "output"};
    if (!sections.count(it.key())) throw ConfigError("unknown config section: " + it.key());
  }
  ParsedConfig out;
  auto& notices = out.notices;
  Config& c = out.config;
  ExperimentPlan& plan = c.sweep.base;
  auto section = [&](const char* name) { return Section(doc.contains(name) ? doc.at(name) : json(), name, notices); };

  Section env = section("env");
  env.read_tag("name", plan.env.name, env_kind_from_string);
  env.read("grid_height", plan.env.grid_height);
  env.read("grid_width", plan.env.grid_width);
  env.read("action_count", plan.env.action_count);
  env.read("max_episode_steps", plan.env.max_episode_steps);
  env.read("frame_stack", plan.env.frame_stack);
  env.read("paddle_length", plan.env.paddle_length);
  env.finish();

  AgentConfig& a = plan.agent;
  a.total_steps = plan.env.name == EnvKind::mini_pong ? 150000 : 50000;
  Section agent = section("agent");
  agent.read("gamma", a.gamma);
  agent.read_tag("optimizer", a.optimizer.kind, optimizer_from_string);
  agent.read("learning_rate", a.optimizer.learning_rate);
  agent.read("clip_norm", a.optimizer.clip_norm);
  agent.read("batch_size", a.batch_size);
  agent.read("buffer_capacity", a.buffer_capacity);
  agent.read("target_sync_interval", a.target_sync_interval);
  agent.read("train_start", a.train_start);
  agent.read("train_frequency", a.train_frequency);
  agent.read_tag("exploration", a.exploration, exploration_from_string);
  agent.read("epsilon_start", a.epsilon.start);
  agent.read("epsilon_end", a.epsilon.end);
  agent.read("total_steps", a.total_steps);
  a.epsilon.anneal_steps = std::max<std::uint64_t>(1, a.total_steps / 10);
  agent.read("epsilon_anneal_steps", a.epsilon.anneal_steps);
  agent.read("hidden", a.hidden);
  agent.read("sigma_scale", a.sigma_scale);
  agent.read("train_sigma", a.train_sigma);
  agent.read_tag("noisy_eval", a.noisy_eval, noisy_eval_from_string);
  agent.finish();

  Section attack = section("attack");
  attack.read("probability", plan.attack.probability);
  attack.read("epsilon", plan.attack.epsilon);
  attack.read("onset_step", plan.attack.onset_step);
  attack.finish();

  Section p = section("plan");
  p.read("id", plan.id);
  p.read("seeds", plan.seeds);
  p.read("eval_episodes", plan.eval_episodes);
  p.read("window", plan.window);
  p.read("post_onset_factor", plan.post_onset_factor);
  p.read("eval_attack_probability", plan.eval_attack_probability);
  p.read("clean_eval", plan.clean_eval);
  p.read("attacked_eval", plan.attacked_eval);
  p.read("probabilities", c.sweep.probabilities);
  std::vector<std::string> variants;
  for (auto v : c.sweep.variants) variants.emplace_back(to_string(v));
  p.read("variants", variants);
  c.sweep.variants.clear();
  for (const auto& v : variants) {
    try {
      c.sweep.variants.push_back(exploration_from_string(v));
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("config key plan.variants: ") + e.what());
    }
  }
  p.read("workers", c.sweep.workers);
  p.finish();

  Section o = section("output");
  o.read("dir", c.output_dir);
  o.finish();

  try {
    plan.validate();
    for (double prob : c.sweep.probabilities)
      if (!(prob >= 0.0 && prob <= 1.0)) throw InvalidInput("plan.probabilities entries must lie in [0, 1]");
    if (c.sweep.variants.empty()) throw InvalidInput("plan.variants must not be empty");
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return out;
}

ParsedConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

ParsedConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

json to_json(const Config& c) {
  const ExperimentPlan& plan = c.sweep.base;
  const AgentConfig& a = plan.agent;
  json variants = json::array();
  for (auto v : c.sweep.variants) variants.push_back(std::string(to_string(v)));
  return json{
      {"env",
       {{"name", std::string(to_string(plan.env.name))},
        {"grid_height", plan.env.grid_height},
        {"grid_width", plan.env.grid_width},
        {"action_count", plan.env.action_count},
        {"max_episode_steps", plan.env.max_episode_steps},
        {"frame_stack", plan.env.frame_stack},
        {"paddle_length", plan.env.paddle_length}}},
      {"agent",
       {{"gamma", a.gamma},
        {"optimizer", std::string(to_string(a.optimizer.kind))},
        {"learning_rate", a.optimizer.learning_rate},
        {"clip_norm", a.optimizer.clip_norm},
        {"batch_size", a.batch_size},
        {"buffer_capacity", a.buffer_capacity},
        {"target_sync_interval", a.target_sync_interval},
        {"train_start", a.train_start},
        {"train_frequency", a.train_frequency},
        {"exploration", std::string(to_string(a.exploration))},
        {"epsilon_start", a.epsilon.start},
        {"epsilon_end", a.epsilon.end},
        {"epsilon_anneal_steps", a.epsilon.anneal_steps},
        {"hidden", a.hidden},
        {"sigma_scale", a.sigma_scale},
        {"train_sigma", a.train_sigma},
        {"noisy_eval", std::string(to_string(a.noisy_eval))},
        {"total_steps", a.total_steps}}},
      {"attack",
       {{"probability", plan.attack.probability},
        {"epsilon", plan.attack.epsilon},
        {"onset_step", plan.attack.onset_step}}},
      {"plan",
       {{"id", plan.id},
        {"seeds", plan.seeds},
        {"eval_episodes", plan.eval_episodes},
        {"window", plan.window},
        {"post_onset_factor", plan.post_onset_factor},
        {"eval_attack_probability", plan.eval_attack_probability},
        {"clean_eval", plan.clean_eval},
        {"attacked_eval", plan.attacked_eval},
        {"probabilities", c.sweep.probabilities},
        {"variants", variants},
        {"workers", c.sweep.workers}}},
      {"output", {{"dir", c.output_dir}}},
  };
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must look like key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key: " + key);
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace advrl
