#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "advrl/core/network.hpp"
#include "advrl/core/optimizer.hpp"
#include "advrl/env/environment.hpp"
#include "advrl/explore/exploration.hpp"
#include "advrl/rng.hpp"

namespace advrl {

struct Transition {
  Observation state;
  std::size_t action = 0;
  double reward = 0.0;  // clipped
  Observation next_state;
  bool terminal = false;
};

/// Fixed-capacity ring of transitions. Eviction is oldest-first; sampling is
/// uniform with replacement over the current contents.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void push(Transition t);

  /// i-th oldest transition currently held.
  const Transition& at(std::size_t i) const;

  /// Indices into at(), drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, RngStream& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t cursor_ = 0;  // slot the next push overwrites once full
};

enum class ExplorationKind { epsilon_greedy, noisy_net };

std::string_view to_string(ExplorationKind k);
ExplorationKind exploration_from_string(std::string_view s);

/// How a noisy network acts at evaluation time: fresh noise every step, or
/// the mean network (sigma ignored).
enum class NoisyEvalMode { resample, mean };

std::string_view to_string(NoisyEvalMode m);
NoisyEvalMode noisy_eval_from_string(std::string_view s);

struct AgentConfig {
  double gamma = 0.99;
  OptimizerConfig optimizer{OptimizerKind::sgd, 0.2};
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 10000;
  std::size_t target_sync_interval = 500;
  std::size_t train_start = 500;
  std::size_t train_frequency = 1;
  ExplorationKind exploration = ExplorationKind::epsilon_greedy;
  EpsilonSchedule epsilon{1.0, 0.02, 5000};
  std::vector<std::size_t> hidden{64, 64};
  double sigma_scale = 0.5;
  bool train_sigma = true;
  NoisyEvalMode noisy_eval = NoisyEvalMode::resample;
  std::uint64_t total_steps = 50000;

  void validate() const;
};

/// Clamp to [-1, 1]; the learner only ever sees clipped rewards.
double clip_reward(double r);

/// r + gamma * max_a' Q_target(s', a'), or just r at terminal transitions.
double compute_target(const Transition& t, const Network& target_net, double gamma);

/// Online network, target network, replay memory and optimizer of one DQN learner.
class Agent {
 public:
  Agent(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed);

  const AgentConfig& config() const { return cfg_; }
  const Network& online() const { return online_; }
  Network& online() { return online_; }
  const Network& target() const { return target_; }
  Network& target() { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  ReplayBuffer& buffer() { return buffer_; }

  /// Epsilon-greedy mode: epsilon-greedy over online Q at `step`. Noisy mode:
  /// resample online noise, then pure argmax.
  std::size_t select_action(const Observation& obs, std::uint64_t step);

  /// Pins epsilon to a fixed value regardless of step (nullopt restores the schedule).
  void set_epsilon_override(std::optional<double> eps) { epsilon_override_ = eps; }

  void store(Transition t) { buffer_.push(std::move(t)); }

  /// One minibatch update. Returns the mean squared TD error, or nullopt when
  /// the buffer holds fewer than batch_size transitions.
  std::optional<double> train_step();

  void sync_target();

 private:
  AgentConfig cfg_;
  Network online_;
  Network target_;
  ReplayBuffer buffer_;
  Optimizer optimizer_;
  RngStream explore_rng_;
  RngStream replay_rng_;
  std::optional<double> epsilon_override_;
};

/// Greedy action of a fixed network (evaluation rollouts). Noisy networks in
/// resample mode draw fresh noise from `rng` first.
std::size_t greedy_action(Network& net, const Observation& obs, NoisyEvalMode mode, RngStream& rng);

struct FilteredObservation {
  Observation observation;
  bool attacked = false;
};

/// Sits between the environment and the learner. It sees observations and,
/// read-only, the host's live online network; never rewards or actions.
class ObservationFilter {
 public:
  virtual ~ObservationFilter() = default;
  virtual FilteredObservation apply(const Observation& obs, std::uint64_t global_step,
                                    const Network& live_net) = 0;
};

/// Forwards every observation untouched.
class PassThroughFilter final : public ObservationFilter {
 public:
  FilteredObservation apply(const Observation& obs, std::uint64_t, const Network&) override {
    return {obs, false};
  }
};

struct EpisodeRecord {
  std::size_t episode = 0;
  double raw_return = 0.0;
  std::uint64_t global_step = 0;
  double attacked_fraction = 0.0;
};

/// Per-episode raw (unclipped) returns in completion order.
class LearningCurve {
 public:
  void append(const EpisodeRecord& r);
  const std::vector<EpisodeRecord>& episodes() const { return episodes_; }
  std::size_t size() const { return episodes_.size(); }
  bool empty() const { return episodes_.empty(); }
  std::vector<double> returns() const;

 private:
  std::vector<EpisodeRecord> episodes_;
};

/// Resumable DQN training loop: environment, agent and learning curve of one run.
/// Each observation passes through the active filter exactly once; the filtered
/// frame drives action selection and is stored as both next_state and state.
class Trainer {
 public:
  Trainer(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed);

  /// Called after each completed episode; returning true stops run() there.
  using EpisodeCallback = std::function<bool(const EpisodeRecord&, const LearningCurve&)>;

  /// Advances up to `steps` environment steps. Returns the steps actually taken.
  std::uint64_t run(std::uint64_t steps, ObservationFilter* filter = nullptr,
                    const EpisodeCallback& on_episode = {});

  Agent& agent() { return agent_; }
  const Agent& agent() const { return agent_; }
  const LearningCurve& curve() const { return curve_; }
  const std::vector<double>& losses() const { return losses_; }
  std::uint64_t global_step() const { return global_step_; }
  std::uint64_t seed() const { return seed_; }
  const EnvSpec& env_spec() const { return env_.spec(); }

 private:
  FilteredObservation observe(const Observation& raw, ObservationFilter* filter);

  std::uint64_t seed_;
  Agent agent_;
  Environment env_;
  LearningCurve curve_;
  std::vector<double> losses_;
  std::uint64_t global_step_ = 0;

  bool need_reset_ = true;
  Observation current_;
  double episode_return_ = 0.0;
  std::size_t episode_obs_ = 0;
  std::size_t episode_attacked_ = 0;
};

struct TrainingResult {
  Agent agent;
  LearningCurve curve;
  std::vector<double> losses;
};

/// Trains for cfg.total_steps with an optional observation filter.
TrainingResult run_training(const AgentConfig& cfg, const EnvSpec& env, ObservationFilter* filter,
                            std::uint64_t seed);

}  // namespace advrl
