#include "advrl/agent/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advrl/errors.hpp"

namespace advrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidInput("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw InvalidInput("replay index out of range");
  // Once full, the oldest transition sits at the cursor.
  return items_[(cursor_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, RngStream& rng) const {
  if (items_.empty()) throw InvalidInput("sampling from an empty replay buffer");
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = rng.index(items_.size());
  return out;
}

std::string_view to_string(ExplorationKind k) {
  return k == ExplorationKind::epsilon_greedy ? "epsilon-greedy" : "noisy-net";
}

ExplorationKind exploration_from_string(std::string_view s) {
  if (s == "epsilon-greedy") return ExplorationKind::epsilon_greedy;
  if (s == "noisy-net") return ExplorationKind::noisy_net;
  throw InvalidInput("unknown exploration kind: " + std::string(s));
}

std::string_view to_string(NoisyEvalMode m) { return m == NoisyEvalMode::resample ? "resample" : "mean"; }

NoisyEvalMode noisy_eval_from_string(std::string_view s) {
  if (s == "resample") return NoisyEvalMode::resample;
  if (s == "mean") return NoisyEvalMode::mean;
  throw InvalidInput("unknown noisy evaluation mode: " + std::string(s));
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
  if (!(optimizer.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (batch_size > buffer_capacity) throw InvalidInput("batch_size must not exceed buffer_capacity");
  if (target_sync_interval < 1) throw InvalidInput("target_sync_interval must be >= 1");
  if (train_frequency < 1) throw InvalidInput("train_frequency must be >= 1");
  if (optimizer.clip_norm < 0.0) throw InvalidInput("clip_norm must be >= 0");
  epsilon.validate();
}

double clip_reward(double r) {
  if (!std::isfinite(r)) throw InvalidInput("non-finite reward");
  return std::clamp(r, -1.0, 1.0);
}

double compute_target(const Transition& t, const Network& target_net, double gamma) {
  const double r = clip_reward(t.reward);
  if (t.terminal) return r;
  return r + gamma * forward(target_net, t.next_state).maxCoeff();
}

Agent::Agent(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed)
    : cfg_(cfg),
      buffer_(cfg.buffer_capacity),
      optimizer_(cfg.optimizer),
      explore_rng_(RngStream::derive(seed, StreamKind::exploration)),
      replay_rng_(RngStream::derive(seed, StreamKind::replay)) {
  cfg_.validate();
  RngStream init = RngStream::derive(seed, StreamKind::agent_init);
  NetworkShape shape;
  shape.input_dim = env.observation_size();
  shape.hidden = cfg_.hidden;
  shape.output_dim = env.action_count;
  shape.noisy = cfg_.exploration == ExplorationKind::noisy_net;
  shape.sigma_scale = cfg_.sigma_scale;
  online_ = make_network(shape, init);
  if (online_.has_noisy_layers()) resample_noise(online_, explore_rng_);
  target_ = online_;
}

std::size_t Agent::select_action(const Observation& obs, std::uint64_t step) {
  if (cfg_.exploration == ExplorationKind::noisy_net) {
    resample_noise(online_, explore_rng_);
    return argmax(forward(online_, obs));
  }
  const double eps = epsilon_override_ ? *epsilon_override_ : cfg_.epsilon.value(step);
  return epsilon_greedy_action(forward(online_, obs), eps, explore_rng_);
}

std::optional<double> Agent::train_step() {
  const std::size_t n = cfg_.batch_size;
  if (buffer_.size() < n) return std::nullopt;

  const auto idx = buffer_.sample_indices(n, replay_rng_);
  const auto in = static_cast<Eigen::Index>(online_.input_dim());
  Matrix states(static_cast<Eigen::Index>(n), in);
  Matrix next_states(static_cast<Eigen::Index>(n), in);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = buffer_.at(idx[i]);
    states.row(static_cast<Eigen::Index>(i)) = t.state.transpose();
    next_states.row(static_cast<Eigen::Index>(i)) = t.next_state.transpose();
  }

  // One noise sample per network, held for the whole batch.
  if (cfg_.exploration == ExplorationKind::noisy_net) {
    resample_noise(online_, explore_rng_);
    resample_noise(target_, explore_rng_);
  }

  const Matrix next_q = forward_batch(target_, next_states);
  std::vector<Matrix> inputs, pre;
  const Matrix q = forward_cached(online_, states, inputs, pre);

  Matrix upstream = Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Transition& t = buffer_.at(idx[i]);
    const double r = clip_reward(t.reward);
    const double y = t.terminal ? r : r + cfg_.gamma * next_q.row(row).maxCoeff();
    const auto a = static_cast<Eigen::Index>(t.action);
    const double residual = y - q(row, a);
    loss += residual * residual;
    upstream(row, a) = -2.0 * residual / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");

  GradientSet grads = backward(online_, inputs, pre, upstream);
  if (!cfg_.train_sigma) {
    for (auto& g : grads.layers) {
      g.sigma_weights.setZero();
      g.sigma_biases.setZero();
    }
  }
  optimizer_.step(online_, std::move(grads));
  return loss;
}

void Agent::sync_target() { target_ = online_; }

std::size_t greedy_action(Network& net, const Observation& obs, NoisyEvalMode mode, RngStream& rng) {
  if (!net.has_noisy_layers()) return argmax(forward(net, obs));
  if (mode == NoisyEvalMode::mean) return argmax(forward(mean_network(net), obs));
  resample_noise(net, rng);
  return argmax(forward(net, obs));
}

void LearningCurve::append(const EpisodeRecord& r) {
  if (!episodes_.empty() && r.episode <= episodes_.back().episode)
    throw InvalidInput("episode indices must be strictly increasing");
  episodes_.push_back(r);
}

std::vector<double> LearningCurve::returns() const {
  std::vector<double> out;
  out.reserve(episodes_.size());
  for (const auto& e : episodes_) out.push_back(e.raw_return);
  return out;
}

Trainer::Trainer(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed)
    : seed_(seed), agent_(cfg, env, seed), env_(env, RngStream::derive(seed, StreamKind::environment)) {}

FilteredObservation Trainer::observe(const Observation& raw, ObservationFilter* filter) {
  FilteredObservation f = filter ? filter->apply(raw, global_step_, agent_.online()) : FilteredObservation{raw, false};
  ++episode_obs_;
  if (f.attacked) ++episode_attacked_;
  return f;
}

std::uint64_t Trainer::run(std::uint64_t steps, ObservationFilter* filter, const EpisodeCallback& on_episode) {
  const AgentConfig& cfg = agent_.config();
  std::uint64_t taken = 0;
  while (taken < steps) {
    if (need_reset_) {
      episode_return_ = 0.0;
      episode_obs_ = 0;
      episode_attacked_ = 0;
      current_ = observe(env_.reset(), filter).observation;
      need_reset_ = false;
    }

    const std::size_t action = agent_.select_action(current_, global_step_);
    StepResult r = env_.step(action);
    FilteredObservation next = observe(r.observation, filter);
    episode_return_ += r.reward;

    agent_.store(Transition{current_, action, clip_reward(r.reward), next.observation, r.terminal});
    current_ = std::move(next.observation);
    ++global_step_;
    ++taken;

    if (global_step_ >= cfg.train_start && global_step_ % cfg.train_frequency == 0) {
      if (auto loss = agent_.train_step()) losses_.push_back(*loss);
    }
    if (global_step_ % cfg.target_sync_interval == 0) agent_.sync_target();

    if (r.done()) {
      need_reset_ = true;
      EpisodeRecord rec;
      rec.episode = curve_.size();
      rec.raw_return = episode_return_;
      rec.global_step = global_step_;
      rec.attacked_fraction =
          episode_obs_ == 0 ? 0.0 : static_cast<double>(episode_attacked_) / static_cast<double>(episode_obs_);
      curve_.append(rec);
      if (on_episode && on_episode(rec, curve_)) break;
    }
  }
  return taken;
}

TrainingResult run_training(const AgentConfig& cfg, const EnvSpec& env, ObservationFilter* filter,
                            std::uint64_t seed) {
  Trainer trainer(cfg, env, seed);
  trainer.run(cfg.total_steps, filter);
  return TrainingResult{trainer.agent(), trainer.curve(), trainer.losses()};
}

}  // namespace advrl
