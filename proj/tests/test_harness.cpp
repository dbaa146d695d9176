#include "doctest.h"

#include <vector>

#include "advrl/errors.hpp"
#include "advrl/harness/experiment.hpp"
#include "advrl/io/checkpoint.hpp"

using namespace advrl;

namespace {

std::vector<double> v_shape(double top, double bottom, std::size_t down, std::size_t up) {
  std::vector<double> out;
  for (std::size_t i = 0; i <= down; ++i) out.push_back(top - (top - bottom) * static_cast<double>(i) / down);
  for (std::size_t i = 1; i <= up; ++i) out.push_back(bottom + (top - bottom) * static_cast<double>(i) / up);
  return out;
}

RunRecord synthetic_record(ExplorationKind kind, double p, std::uint64_t seed, std::size_t onset, std::size_t min_ep,
                           double min_value, std::optional<std::size_t> recovery, double attacked_eval) {
  RunRecord r;
  r.exploration = kind;
  r.probability = p;
  r.seed = seed;
  PhaseTransition t;
  t.onset = onset;
  t.pre_onset = 1.0;
  t.min_episode = min_ep;
  t.min_value = min_value;
  t.recovered = recovery.has_value();
  t.recovery_episode = recovery;
  r.stats.transition = t;
  r.evals.push_back(EvalResult{"adv-trained", "attack", 1.0, attacked_eval, 0.0, 100});
  return r;
}

ExperimentPlan quick_plan() {
  ExperimentPlan plan;
  plan.agent.total_steps = 40000;
  plan.agent.epsilon = EpsilonSchedule{1.0, 0.02, 4000};
  plan.attack.epsilon = 0.1;
  plan.post_onset_factor = 0.25;
  plan.clean_eval = false;
  plan.attacked_eval = false;
  return plan;
}

}  // namespace

TEST_CASE("rolling mean examples") {
  const std::vector<double> r{0, 1, 0, 1};
  CHECK(rolling_mean(r, 2) == std::vector<double>{0, 0.5, 0.5, 0.5});
  CHECK(rolling_mean(r, 1) == r);
  const std::vector<double> c(50, 0.7);
  for (double x : rolling_mean(c, 10)) CHECK(x == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(rolling_mean(std::vector<double>{}, 100).empty());
  CHECK_THROWS_AS(rolling_mean(r, 0), InvalidInput);
}

TEST_CASE("rolling mean agrees with a direct window average") {
  std::vector<double> r;
  RngStream rng(41);
  for (int i = 0; i < 500; ++i) r.push_back(rng.uniform() < 0.6 ? 1.0 : -1.0);
  const auto roll = rolling_mean(r, 100);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const std::size_t lo = i >= 99 ? i - 99 : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += r[j];
    CHECK(roll[i] == doctest::Approx(s / static_cast<double>(i - lo + 1)).epsilon(1e-12));
  }
}

TEST_CASE("convergence check") {
  CHECK(check_convergence(std::vector<double>(100, 1.0), 100, 1.0));
  CHECK_FALSE(check_convergence(std::vector<double>(100, 0.5), 100, 1.0));
  CHECK_FALSE(check_convergence(std::vector<double>(99, 1.0), 100, 1.0));
  std::vector<double> osc;
  for (int i = 0; i < 100; ++i) osc.push_back(0.95 * (i % 2 == 0 ? 1.2 : 0.8));
  osc.push_back(0.95);
  CHECK_FALSE(check_convergence(osc, 100, 1.0));
  // A drawdown of more than 5% of optimum inside the window blocks convergence.
  std::vector<double> dip(100, 1.0);
  dip.back() = 0.94;
  CHECK_FALSE(check_convergence(dip, 100, 1.0));
  dip.back() = 0.96;
  CHECK(check_convergence(dip, 100, 1.0));
}

TEST_CASE("phase transition on constructed curves") {
  std::vector<double> pre(100, 0.9);
  auto curve = pre;
  const auto v = v_shape(0.9, -0.5, 40, 160);
  curve.insert(curve.end(), v.begin() + 1, v.end());
  const auto t = detect_phase_transition(curve, 99, 100);
  REQUIRE(t);
  CHECK(t->min_episode == 139);
  CHECK(t->min_value == doctest::Approx(-0.5));
  CHECK(t->recovered);
  CHECK(*t->recovery_episode > t->min_episode);
  CHECK(curve[*t->recovery_episode] >= 0.8 * 0.9);
  CHECK(curve[*t->recovery_episode - 1] < 0.8 * 0.9);

  auto mono = pre;
  for (int i = 1; i <= 150; ++i) mono.push_back(0.9 - 0.01 * i);
  const auto m = detect_phase_transition(mono, 99, 100);
  REQUIRE(m);
  CHECK(m->min_episode == mono.size() - 1);
  CHECK_FALSE(m->recovered);

  CHECK_FALSE(detect_phase_transition(pre, 50, 100));
}

TEST_CASE("phase transition ties resolve to the earliest minimum") {
  std::vector<double> c(100, 1.0);
  for (double x : {0.5, 0.2, 0.4, 0.2, 0.9}) c.push_back(x);
  c.insert(c.end(), 100, 1.0);
  const auto t = detect_phase_transition(c, 99, 100);
  REQUIRE(t);
  CHECK(t->min_episode == 101);
}

TEST_CASE("phase transition property: decreasing then increasing past the threshold") {
  RngStream rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t onset = 10 + rng.index(50), down = 1 + rng.index(80), up = 101 + rng.index(100);
    const double top = rng.uniform(0.2, 1.0), bottom = rng.uniform(-1.0, top - 0.1);
    std::vector<double> c(onset, top);
    const auto v = v_shape(top, bottom, down, up);
    c.insert(c.end(), v.begin(), v.end());
    const auto t = detect_phase_transition(c, onset, 100);
    REQUIRE(t);
    CHECK(t->min_episode == onset + down);
    CHECK(t->recovered);
  }
}

TEST_CASE("exploration comparison") {
  std::vector<RunRecord> eg, nn;
  for (std::uint64_t s : {1, 2}) {
    eg.push_back(synthetic_record(ExplorationKind::epsilon_greedy, 0.2, s, 100, 150 + s, -0.2, 300 + s, 0.5));
    nn.push_back(synthetic_record(ExplorationKind::noisy_net, 0.2, s, 100, 120 + s, -0.6, 200 + s, 0.1));
  }
  const auto self = compare_exploration(eg, eg);
  REQUIRE(self.size() == 1);
  CHECK(self[0].delta_min_value == 0.0);
  CHECK(self[0].delta_episodes_to_min == 0.0);
  CHECK(*self[0].delta_episodes_to_recovery == 0.0);
  CHECK(*self[0].delta_attacked_eval == 0.0);

  const auto rows = compare_exploration(eg, nn);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].epsilon_greedy.min_value == doctest::Approx(-0.2));
  CHECK(rows[0].epsilon_greedy.episodes_to_min == doctest::Approx(51.5));
  CHECK(rows[0].noisy_net.episodes_to_min == doctest::Approx(21.5));
  CHECK(*rows[0].epsilon_greedy.episodes_to_recovery == doctest::Approx(201.5));
  CHECK(rows[0].delta_min_value == doctest::Approx(-0.4));
  CHECK(rows[0].delta_episodes_to_min == doctest::Approx(-30.0));
  CHECK(*rows[0].delta_episodes_to_recovery == doctest::Approx(-100.0));
  CHECK(*rows[0].delta_attacked_eval == doctest::Approx(-0.4));

  nn.pop_back();
  CHECK_THROWS_AS(compare_exploration(eg, nn), InvalidInput);
}

TEST_CASE("an oracle policy evaluates to the optimum with zero spread") {
  const EnvSpec spec;
  const auto w = static_cast<Eigen::Index>(spec.grid_width);
  const auto f = static_cast<Eigen::Index>(spec.frame_size());
  Policy oracle = [&](const Observation& obs) -> std::size_t {
    const Vector frame = obs.tail(f);
    Eigen::Index obj = 0, pad = 0;
    for (Eigen::Index i = 0; i < f - w; ++i)
      if (frame(i) > 0.5) obj = i % w;
    for (Eigen::Index c = 0; c < w; ++c)
      if (frame(f - w + c) > 0.5) pad = c;
    return pad < obj ? 2 : pad > obj ? 0 : 1;
  };
  const EvalSummary s = evaluate_rollouts(oracle, spec, 200, 5);
  CHECK(s.mean == 1.0);
  CHECK(s.std == 0.0);
  CHECK(s.episodes == 200);
}

TEST_CASE("evaluation leaves the checkpoint untouched and rejects other games") {
  Agent agent(AgentConfig{}, EnvSpec{}, 3);
  const Checkpoint c = make_checkpoint(agent, EnvSpec{}, 0);
  const std::string before = serialize_checkpoint(c);
  AttackConfig a{1.0, 0.1, 0};
  evaluate_policy(c, EnvSpec{}, &a, 20, 1);
  CHECK(serialize_checkpoint(c) == before);
  EnvSpec pong;
  pong.name = EnvKind::mini_pong;
  CHECK_THROWS_AS(evaluate_policy(c, pong, nullptr, 5, 1), CheckpointError);
}

TEST_CASE("attacked training from a converged state") {
  const ExperimentPlan plan = quick_plan();
  const Pretrained pre = pretrain_to_convergence(plan, 1);
  REQUIRE(pre.converged);
  CHECK(pre.rolling.size() == pre.trainer.curve().size());
  CHECK(check_convergence(pre.rolling, plan.window, optimal_return(plan.env)));
  for (std::size_t n = plan.window; n < pre.rolling.size(); ++n)
    CHECK_FALSE(check_convergence(std::span(pre.rolling).first(n), plan.window, 1.0));

  SUBCASE("zero probability matches continued clean training") {
    ExperimentPlan p0 = plan;
    p0.attack.probability = 0.0;
    const RunRecord rec = continue_under_attack(p0, pre);
    Trainer clean = pre.trainer;
    clean.agent().set_epsilon_override(plan.agent.epsilon.end);
    clean.run(rec.attacked_steps);
    CHECK(rec.curve.returns() == clean.curve().returns());
    CHECK(rec.losses == clean.losses());
    CHECK(rec.attack.attacked == 0);
    CHECK(rec.stats.onset_episode == pre.onset_episode);
  }

  SUBCASE("runs are reproducible and branch without touching the pretrained state") {
    ExperimentPlan p2 = plan;
    p2.attack.probability = 0.2;
    const auto steps_before = pre.trainer.global_step();
    const RunRecord a = continue_under_attack(p2, pre);
    const RunRecord b = continue_under_attack(p2, pre);
    CHECK(pre.trainer.global_step() == steps_before);
    CHECK(a.curve.returns() == b.curve.returns());
    CHECK(a.attack.attacked == b.attack.attacked);
    CHECK(a.attack.attacked > 0);
    CHECK(a.attack.max_delta <= 0.1);
    CHECK(a.attacked_steps == static_cast<std::uint64_t>(std::llround(0.25 * static_cast<double>(pre.steps))));
    REQUIRE(a.clean);
    CHECK(a.clean->step == pre.steps);
    CHECK(a.adv_trained->step == pre.steps + a.attacked_steps);
  }
}

TEST_CASE("failed pretraining is reported, not thrown") {
  ExperimentPlan plan = quick_plan();
  plan.agent.total_steps = 900;
  const RunRecord r = run_training_attack_experiment(plan, 1);
  CHECK(r.status == RunStatus::failed_pretrain);
  CHECK_FALSE(r.clean);
  CHECK(r.pretrain_steps == 900);
}
