#include "advrl/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "advrl/errors.hpp"

namespace advrl {

std::vector<double> rolling_mean(std::span<const double> returns, std::size_t window) {
  if (window < 1) throw InvalidInput("rolling window must be >= 1");
  std::vector<double> out;
  out.reserve(returns.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    sum += returns[i];
    if (i >= window) sum -= returns[i - window];
    const std::size_t n = std::min(i + 1, window);
    out.push_back(sum / static_cast<double>(n));
  }
  return out;
}

bool check_convergence(std::span<const double> rolling, std::size_t window, double optimal) {
  if (window < 1) throw InvalidInput("rolling window must be >= 1");
  if (rolling.size() < window) return false;
  const double scale = std::abs(optimal);
  const double current = rolling.back();
  if (current < optimal - 0.1 * scale) return false;
  const auto recent = rolling.subspan(rolling.size() - window);
  const double peak = *std::max_element(recent.begin(), recent.end());
  return peak - current <= 0.05 * scale;
}

std::optional<PhaseTransition> detect_phase_transition(std::span<const double> rolling, std::size_t onset,
                                                       std::size_t window) {
  if (window < 1) throw InvalidInput("rolling window must be >= 1");
  if (onset >= rolling.size() || rolling.size() - onset - 1 < window) return std::nullopt;
  PhaseTransition t;
  t.onset = onset;
  t.pre_onset = rolling[onset];
  t.min_episode = onset;
  t.min_value = rolling[onset];
  for (std::size_t i = onset + 1; i < rolling.size(); ++i) {
    if (rolling[i] < t.min_value) {
      t.min_value = rolling[i];
      t.min_episode = i;
    }
  }
  const double threshold = kRecoveryFraction * t.pre_onset;
  for (std::size_t i = t.min_episode + 1; i < rolling.size(); ++i) {
    if (rolling[i] >= threshold) {
      t.recovered = true;
      t.recovery_episode = i;
      break;
    }
  }
  return t;
}

void ExperimentPlan::validate() const {
  env.validate();
  agent.validate();
  attack.validate();
  if (seeds.empty()) throw InvalidInput("experiment plan needs at least one seed");
  if (window < 1) throw InvalidInput("rolling window must be >= 1");
  if (!(post_onset_factor > 0.0)) throw InvalidInput("post_onset_factor must be positive");
  if (!(eval_attack_probability >= 0.0 && eval_attack_probability <= 1.0))
    throw InvalidInput("eval attack probability must lie in [0, 1]");
}

const EvalResult* RunRecord::find_eval(std::string_view checkpoint, std::string_view condition) const {
  for (const auto& e : evals)
    if (e.checkpoint == checkpoint && e.condition == condition) return &e;
  return nullptr;
}

std::string make_run_id(ExplorationKind exploration, double probability, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_p%g_s%llu", std::string(to_string(exploration)).c_str(), probability,
                static_cast<unsigned long long>(seed));
  return buf;
}

Pretrained pretrain_to_convergence(const ExperimentPlan& plan, std::uint64_t seed) {
  plan.validate();
  const double optimal = optimal_return(plan.env);
  Pretrained out{Trainer(plan.agent, plan.env, seed), false, 0, 0, {}};
  double sum = 0.0;
  std::vector<double> returns;
  out.trainer.run(plan.agent.total_steps, nullptr, [&](const EpisodeRecord& r, const LearningCurve&) {
    returns.push_back(r.raw_return);
    sum += r.raw_return;
    if (returns.size() > plan.window) sum -= returns[returns.size() - 1 - plan.window];
    out.rolling.push_back(sum / static_cast<double>(std::min(returns.size(), plan.window)));
    if (check_convergence(out.rolling, plan.window, optimal)) {
      out.converged = true;
      return true;
    }
    return false;
  });
  out.steps = out.trainer.global_step();
  out.onset_episode = out.rolling.empty() ? 0 : out.rolling.size() - 1;
  return out;
}

namespace {

AttackSummary summarize(const MitmFilter& f) {
  AttackSummary s;
  s.decisions = f.decisions();
  s.attacked = f.attacks();
  s.flipped = f.log().flipped_count();
  s.skipped = f.log().skipped;
  s.max_delta = f.log().max_delta();
  return s;
}

std::uint64_t probability_salt(double p) { return static_cast<std::uint64_t>(std::llround(p * 1e6)); }

}  // namespace

RunRecord continue_under_attack(const ExperimentPlan& plan, const Pretrained& pre, RunObserver* observer) {
  RunRecord rec;
  rec.plan_id = plan.id;
  rec.exploration = plan.agent.exploration;
  rec.probability = plan.attack.probability;
  rec.seed = pre.trainer.seed();
  rec.run_id = make_run_id(rec.exploration, rec.probability, rec.seed);
  rec.pretrain_steps = pre.steps;
  rec.stats.window = plan.window;

  if (observer) {
    for (std::size_t i = 0; i < pre.trainer.curve().size(); ++i)
      observer->on_episode(rec.run_id, rec.seed, pre.trainer.curve().episodes()[i], pre.rolling[i]);
  }

  if (!pre.converged) {
    rec.status = RunStatus::failed_pretrain;
    rec.curve = pre.trainer.curve();
    rec.losses = pre.trainer.losses();
    rec.stats.rolling = pre.rolling;
    if (observer) observer->on_run_complete(rec);
    return rec;
  }

  Trainer trainer = pre.trainer;
  rec.clean = make_checkpoint(trainer.agent(), plan.env, trainer.global_step());
  if (plan.agent.exploration == ExplorationKind::epsilon_greedy)
    trainer.agent().set_epsilon_override(plan.agent.epsilon.end);

  AttackConfig attack = plan.attack;
  attack.onset_step = trainer.global_step();
  MitmFilter filter(attack, RngStream::derive(rec.seed, StreamKind::attack, probability_salt(attack.probability)));

  const auto budget = std::min<std::uint64_t>(
      static_cast<std::uint64_t>(std::llround(plan.post_onset_factor * static_cast<double>(pre.steps))),
      plan.agent.total_steps);

  std::vector<double> returns = pre.trainer.curve().returns();
  std::vector<double> rolling = pre.rolling;
  double sum = 0.0;
  for (std::size_t i = returns.size() - std::min(returns.size(), plan.window); i < returns.size(); ++i)
    sum += returns[i];
  trainer.run(budget, &filter, [&](const EpisodeRecord& r, const LearningCurve&) {
    returns.push_back(r.raw_return);
    sum += r.raw_return;
    if (returns.size() > plan.window) sum -= returns[returns.size() - 1 - plan.window];
    rolling.push_back(sum / static_cast<double>(std::min(returns.size(), plan.window)));
    if (observer) observer->on_episode(rec.run_id, rec.seed, r, rolling.back());
    return false;
  });

  rec.attacked_steps = trainer.global_step() - pre.steps;
  rec.curve = trainer.curve();
  rec.losses = trainer.losses();
  rec.attack = summarize(filter);
  rec.attack_log = filter.log();
  rec.adv_trained = make_checkpoint(trainer.agent(), plan.env, trainer.global_step());
  // Recomputed from scratch so the stored series matches rolling_mean exactly.
  rec.stats.rolling = rolling_mean(rec.curve.returns(), plan.window);
  rec.stats.onset_episode = pre.onset_episode;
  rec.stats.transition = detect_phase_transition(rec.stats.rolling, pre.onset_episode, plan.window);

  AttackConfig test_attack = plan.attack;
  test_attack.probability = plan.eval_attack_probability;
  test_attack.onset_step = 0;
  const NoisyEvalMode mode = plan.agent.noisy_eval;
  auto eval = [&](const Checkpoint& c, const char* name, const AttackConfig* a) {
    EvalSummary s = evaluate_policy(c, plan.env, a, plan.eval_episodes, rec.seed, mode);
    rec.evals.push_back(EvalResult{name, a ? "attack" : "no-attack", a ? a->probability : 0.0, s.mean, s.std,
                                   s.episodes});
  };
  if (plan.clean_eval) {
    eval(*rec.clean, "clean", nullptr);
    eval(*rec.adv_trained, "adv-trained", nullptr);
  }
  if (plan.attacked_eval) {
    eval(*rec.clean, "clean", &test_attack);
    eval(*rec.adv_trained, "adv-trained", &test_attack);
  }
  if (observer) observer->on_run_complete(rec);
  return rec;
}

RunRecord run_training_attack_experiment(const ExperimentPlan& plan, std::uint64_t seed, RunObserver* observer) {
  const Pretrained pre = pretrain_to_convergence(plan, seed);
  return continue_under_attack(plan, pre, observer);
}

EvalSummary evaluate_rollouts(const Policy& policy, const EnvSpec& env, std::size_t episodes, std::uint64_t seed,
                              ObservationFilter* filter, const Network* filter_net) {
  if (filter != nullptr && filter_net == nullptr) throw InvalidInput("an evaluation filter needs a network to read");
  Environment sim(env, RngStream::derive(seed, StreamKind::evaluation, 1));
  std::uint64_t step = 0;
  auto see = [&](const Observation& raw) {
    return filter ? filter->apply(raw, step, *filter_net).observation : raw;
  };
  std::vector<double> returns;
  returns.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    Observation obs = see(sim.reset());
    double ret = 0.0;
    while (true) {
      StepResult r = sim.step(policy(obs));
      ++step;
      ret += r.reward;
      obs = see(r.observation);
      if (r.done()) break;
    }
    returns.push_back(ret);
  }
  EvalSummary s;
  s.episodes = episodes;
  if (episodes == 0) return s;
  s.mean = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(episodes);
  double var = 0.0;
  for (double r : returns) var += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(var / static_cast<double>(episodes));
  return s;
}

EvalSummary evaluate_policy(const Checkpoint& ckpt, const EnvSpec& env, const AttackConfig* attack,
                            std::size_t episodes, std::uint64_t seed, NoisyEvalMode noisy_mode) {
  require_compatible(ckpt, env);
  Network net = ckpt.online;  // private copy; the checkpoint is never touched
  RngStream noise = RngStream::derive(seed, StreamKind::evaluation, 2);
  if (net.has_noisy_layers()) resample_noise(net, noise);
  Policy policy = [&](const Observation& obs) { return greedy_action(net, obs, noisy_mode, noise); };
  if (attack == nullptr) return evaluate_rollouts(policy, env, episodes, seed);
  AttackConfig a = *attack;
  a.onset_step = 0;
  MitmFilter filter(a, RngStream::derive(seed, StreamKind::attack, 0xe7a1), false);
  return evaluate_rollouts(policy, env, episodes, seed, &filter, &net);
}

namespace {

VariantSummary summarize_variant(const std::vector<const RunRecord*>& runs) {
  VariantSummary s;
  double min_sum = 0.0, to_min = 0.0, to_rec = 0.0, attacked = 0.0;
  std::size_t with_transition = 0, with_eval = 0;
  for (const RunRecord* r : runs) {
    ++s.runs;
    if (const auto& t = r->stats.transition) {
      ++with_transition;
      min_sum += t->min_value;
      to_min += static_cast<double>(t->min_episode - t->onset);
      if (t->recovered) {
        ++s.recovered;
        to_rec += static_cast<double>(*t->recovery_episode - t->onset);
      }
    }
    if (const EvalResult* e = r->find_eval("adv-trained", "attack")) {
      ++with_eval;
      attacked += e->mean_return;
    }
  }
  if (with_transition > 0) {
    s.min_value = min_sum / static_cast<double>(with_transition);
    s.episodes_to_min = to_min / static_cast<double>(with_transition);
  }
  if (s.recovered > 0) s.episodes_to_recovery = to_rec / static_cast<double>(s.recovered);
  if (with_eval > 0) s.attacked_eval_mean = attacked / static_cast<double>(with_eval);
  return s;
}

std::map<double, std::vector<const RunRecord*>> by_probability(std::span<const RunRecord> runs) {
  std::map<double, std::vector<const RunRecord*>> out;
  for (const auto& r : runs) out[r.probability].push_back(&r);
  return out;
}

std::set<std::pair<double, std::uint64_t>> cells(std::span<const RunRecord> runs) {
  std::set<std::pair<double, std::uint64_t>> out;
  for (const auto& r : runs) out.emplace(r.probability, r.seed);
  return out;
}

}  // namespace

std::vector<ComparisonRow> compare_exploration(std::span<const RunRecord> epsilon_greedy,
                                               std::span<const RunRecord> noisy_net) {
  if (cells(epsilon_greedy) != cells(noisy_net))
    throw InvalidInput("exploration comparison needs matching (probability, seed) cells on both sides");
  const auto eg = by_probability(epsilon_greedy);
  const auto nn = by_probability(noisy_net);
  std::vector<ComparisonRow> rows;
  for (const auto& [p, runs] : eg) {
    ComparisonRow row;
    row.probability = p;
    row.epsilon_greedy = summarize_variant(runs);
    row.noisy_net = summarize_variant(nn.at(p));
    row.delta_min_value = row.noisy_net.min_value - row.epsilon_greedy.min_value;
    row.delta_episodes_to_min = row.noisy_net.episodes_to_min - row.epsilon_greedy.episodes_to_min;
    if (row.noisy_net.episodes_to_recovery && row.epsilon_greedy.episodes_to_recovery)
      row.delta_episodes_to_recovery = *row.noisy_net.episodes_to_recovery - *row.epsilon_greedy.episodes_to_recovery;
    if (row.noisy_net.attacked_eval_mean && row.epsilon_greedy.attacked_eval_mean)
      row.delta_attacked_eval = *row.noisy_net.attacked_eval_mean - *row.epsilon_greedy.attacked_eval_mean;
    rows.push_back(row);
  }
  return rows;
}

std::vector<RunRecord> run_sweep(const SweepPlan& plan, RunObserver* observer) {
  plan.base.validate();
  if (plan.probabilities.empty() || plan.variants.empty()) throw InvalidInput("sweep needs probabilities and variants");
  for (double p : plan.probabilities)
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("sweep probabilities must lie in [0, 1]");

  const std::size_t np = plan.probabilities.size();
  const std::size_t ns = plan.base.seeds.size();
  const std::size_t groups = plan.variants.size() * ns;
  std::vector<RunRecord> records(plan.variants.size() * np * ns);

  std::atomic<std::size_t> next{0};
  std::mutex failure_mu;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t g = next++; g < groups; g = next++) {
      try {
        const std::size_t v = g / ns, s = g % ns;
        ExperimentPlan cell = plan.base;
        cell.agent.exploration = plan.variants[v];
        const Pretrained pre = pretrain_to_convergence(cell, plan.base.seeds[s]);
        for (std::size_t k = 0; k < np; ++k) {
          cell.attack.probability = plan.probabilities[k];
          records[(v * np + k) * ns + s] = continue_under_attack(cell, pre, observer);
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = groups;
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(plan.workers, 1, groups);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

}  // namespace advrl
