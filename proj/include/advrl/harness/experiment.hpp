#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advrl/agent/dqn.hpp"
#include "advrl/attack/adversary.hpp"
#include "advrl/env/environment.hpp"
#include "advrl/io/checkpoint.hpp"

namespace advrl {

// ---------------------------------------------------------------------------
// Curve statistics

/// Element i is the mean of returns[max(0, i - window + 1) .. i].
std::vector<double> rolling_mean(std::span<const double> returns, std::size_t window);

/// True once `rolling` has at least `window` entries, its last value is within
/// 10% of `optimal`, and it has not fallen more than 5% of |optimal| below its
/// peak over the last `window` entries.
bool check_convergence(std::span<const double> rolling, std::size_t window, double optimal);

struct PhaseTransition {
  std::size_t onset = 0;
  double pre_onset = 0.0;  // rolling mean over the window ending at onset
  std::size_t min_episode = 0;
  double min_value = 0.0;
  bool recovered = false;  // some later rolling mean reaches 80% of pre_onset
  std::optional<std::size_t> recovery_episode;
};

inline constexpr double kRecoveryFraction = 0.8;

/// Locates the minimum of `rolling` on [onset, end] (earliest on ties) and
/// whether the curve climbs back afterwards. Returns nullopt when fewer than
/// `window` episodes follow the onset.
std::optional<PhaseTransition> detect_phase_transition(std::span<const double> rolling, std::size_t onset,
                                                       std::size_t window);

struct CurveStats {
  std::vector<double> rolling;
  std::size_t window = 100;
  std::optional<std::size_t> onset_episode;
  std::optional<PhaseTransition> transition;
};

// ---------------------------------------------------------------------------
// Plans and records

struct ExperimentPlan {
  std::string id = "experiment";
  EnvSpec env{};
  AgentConfig agent{};
  AttackConfig attack{};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t eval_episodes = 100;
  std::size_t window = 100;
  double post_onset_factor = 3.0;  // attacked-phase steps per pretraining step
  double eval_attack_probability = 1.0;
  bool clean_eval = true;
  bool attacked_eval = true;

  void validate() const;
};

struct EvalResult {
  std::string checkpoint;  // "clean" or "adv-trained"
  std::string condition;   // "no-attack" or "attack"
  double probability = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;
  std::size_t episodes = 0;
};

struct AttackSummary {
  std::size_t decisions = 0;
  std::size_t attacked = 0;
  std::size_t flipped = 0;
  std::size_t skipped = 0;
  double max_delta = 0.0;
};

enum class RunStatus { ok, failed_pretrain };

struct RunRecord {
  std::string run_id;
  std::string plan_id;
  ExplorationKind exploration = ExplorationKind::epsilon_greedy;
  double probability = 0.0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::ok;
  LearningCurve curve;
  std::vector<double> losses;
  AttackSummary attack;
  AttackLog attack_log;
  std::optional<Checkpoint> clean;
  std::optional<Checkpoint> adv_trained;
  CurveStats stats;
  std::vector<EvalResult> evals;
  std::uint64_t pretrain_steps = 0;
  std::uint64_t attacked_steps = 0;

  const EvalResult* find_eval(std::string_view checkpoint, std::string_view condition) const;
};

/// "<exploration>_p<probability>_s<seed>".
std::string make_run_id(ExplorationKind exploration, double probability, std::uint64_t seed);

/// Receives progress from running experiments. Calls for one run come from a
/// single thread; different runs may report concurrently.
class RunObserver {
 public:
  virtual ~RunObserver() = default;
  virtual void on_episode(const std::string& /*run_id*/, std::uint64_t /*seed*/, const EpisodeRecord&,
                          double /*rolling*/) {}
  virtual void on_run_complete(const RunRecord&) {}
};

/// Clean training until convergence. `converged` false means the budget ran out.
struct Pretrained {
  Trainer trainer;
  bool converged = false;
  std::size_t onset_episode = 0;
  std::uint64_t steps = 0;
  std::vector<double> rolling;
};

Pretrained pretrain_to_convergence(const ExperimentPlan& plan, std::uint64_t seed);

/// Attacked-training phase from a pretrained state (which is copied, not
/// consumed), followed by the clean and attacked evaluations of both checkpoints.
RunRecord continue_under_attack(const ExperimentPlan& plan, const Pretrained& pre, RunObserver* observer = nullptr);

/// Pretraining plus attacked training for one seed.
RunRecord run_training_attack_experiment(const ExperimentPlan& plan, std::uint64_t seed,
                                         RunObserver* observer = nullptr);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t episodes = 0;
};

using Policy = std::function<std::size_t(const Observation&)>;

/// Rollouts of a fixed policy; no learning. `filter` (optional) sits on the
/// observation channel with read access to `filter_net`.
EvalSummary evaluate_rollouts(const Policy& policy, const EnvSpec& env, std::size_t episodes, std::uint64_t seed,
                              ObservationFilter* filter = nullptr, const Network* filter_net = nullptr);

/// Greedy rollouts of a checkpoint's online network. With `attack`, a MITM
/// filter at attack->probability runs against that same network.
EvalSummary evaluate_policy(const Checkpoint& ckpt, const EnvSpec& env, const AttackConfig* attack,
                            std::size_t episodes, std::uint64_t seed,
                            NoisyEvalMode noisy_mode = NoisyEvalMode::resample);

// ---------------------------------------------------------------------------
// Exploration comparison

struct VariantSummary {
  std::size_t runs = 0;
  std::size_t recovered = 0;
  double min_value = 0.0;         // mean over runs of the post-onset rolling minimum
  double episodes_to_min = 0.0;   // mean over runs, counted from onset
  std::optional<double> episodes_to_recovery;  // mean over recovered runs
  std::optional<double> attacked_eval_mean;    // adv-trained checkpoint under test-time attack
};

struct ComparisonRow {
  double probability = 0.0;
  VariantSummary epsilon_greedy;
  VariantSummary noisy_net;
  double delta_min_value = 0.0;  // noisy-net minus epsilon-greedy
  double delta_episodes_to_min = 0.0;
  std::optional<double> delta_episodes_to_recovery;
  std::optional<double> delta_attacked_eval;
};

/// Paired table per attack probability. Both sides must cover the same
/// (probability, seed) cells; otherwise InvalidInput.
std::vector<ComparisonRow> compare_exploration(std::span<const RunRecord> epsilon_greedy,
                                               std::span<const RunRecord> noisy_net);

// ---------------------------------------------------------------------------
// Sweep

struct SweepPlan {
  ExperimentPlan base;
  std::vector<double> probabilities{0.2, 0.4, 0.8, 1.0};
  std::vector<ExplorationKind> variants{ExplorationKind::epsilon_greedy, ExplorationKind::noisy_net};
  std::size_t workers = 1;
};

/// Every (variant, seed) pair is pretrained once and branched into one attacked
/// run per probability. Groups run on up to `workers` threads. Records come back
/// ordered by variant, then probability, then seed.
std::vector<RunRecord> run_sweep(const SweepPlan& plan, RunObserver* observer = nullptr);

}  // namespace advrl
