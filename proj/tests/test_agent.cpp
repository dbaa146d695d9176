#include "doctest.h"

#include <map>
#include <set>

#include "advrl/agent/dqn.hpp"
#include "advrl/errors.hpp"
#include "support.hpp"

using namespace advrl;
using advrl::testing::random_vector;

namespace {

// Two-pixel board, one frame, two actions: observations of length 2, Q of length 2.
EnvSpec tiny_env() {
  EnvSpec s;
  s.grid_height = 2;
  s.grid_width = 1;
  s.frame_stack = 1;
  s.action_count = 2;
  return s;
}

AgentConfig tiny_config() {
  AgentConfig c;
  c.hidden = {};
  c.batch_size = 1;
  c.buffer_capacity = 1;
  c.optimizer.learning_rate = 0.1;
  return c;
}

void set_linear(Network& net, const Matrix& w, const Vector& b) {
  auto& l = std::get<DenseLayer>(net.layers()[0]);
  l.weights = w;
  l.biases = b;
}

AgentConfig short_config(std::uint64_t steps) {
  AgentConfig c;
  c.total_steps = steps;
  c.train_start = 64;
  c.batch_size = 16;
  c.buffer_capacity = 500;
  c.target_sync_interval = 100;
  c.hidden = {16};
  c.epsilon = EpsilonSchedule{1.0, 0.02, steps / 2};
  return c;
}

bool same_params(const Network& a, const Network& b) {
  if (a.layer_count() != b.layer_count()) return false;
  for (std::size_t i = 0; i < a.layer_count(); ++i) {
    const auto& la = a.layers()[i];
    const auto& lb = b.layers()[i];
    if (la.index() != lb.index()) return false;
    if (const auto* d = std::get_if<DenseLayer>(&la)) {
      const auto& e = std::get<DenseLayer>(lb);
      if (d->weights != e.weights || d->biases != e.biases) return false;
    } else {
      const auto& n = std::get<NoisyDenseLayer>(la);
      const auto& m = std::get<NoisyDenseLayer>(lb);
      if (n.mu_weights != m.mu_weights || n.sigma_weights != m.sigma_weights || n.mu_biases != m.mu_biases ||
          n.sigma_biases != m.sigma_biases)
        return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("reward clipping") {
  CHECK(clip_reward(5.0) == 1.0);
  CHECK(clip_reward(-0.3) == -0.3);
  CHECK(clip_reward(-7.0) == -1.0);
  CHECK(clip_reward(0.3) == 0.3);
  CHECK_THROWS_AS(clip_reward(std::nan("")), InvalidInput);
}

TEST_CASE("bootstrap targets") {
  // A target net that outputs exactly its bias vector.
  Network target({DenseLayer{Matrix::Zero(3, 2), Vector::Zero(3), Activation::identity}});
  std::get<DenseLayer>(target.layers()[0]).biases << 0.2, -0.1, 0.7;
  const Vector s = Vector::Zero(2);
  CHECK(compute_target(Transition{s, 0, 1.0, s, true}, target, 0.99) == 1.0);
  CHECK(compute_target(Transition{s, 0, 3.0, s, false}, target, 0.0) == 1.0);
  CHECK(compute_target(Transition{s, 0, 0.0, s, false}, target, 0.9) == doctest::Approx(0.63).epsilon(1e-15));
}

TEST_CASE("train step at a fixed point leaves parameters unchanged") {
  Agent agent(tiny_config(), tiny_env(), 1);
  Matrix w(2, 2);
  w << 0.5, 0.0, 0.25, -0.25;
  Vector b(2);
  b << 0.0, 0.1;
  set_linear(agent.online(), w, b);
  Vector s(2);
  s << 1.0, 0.0;
  agent.store(Transition{s, 0, 0.5, s, true});
  const auto loss = agent.train_step();
  REQUIRE(loss);
  CHECK(*loss == 0.0);
  const auto& l = std::get<DenseLayer>(agent.online().layers()[0]);
  CHECK(l.weights == w);
  CHECK(l.biases == b);
}

TEST_CASE("single-transition SGD step matches the hand-derived update") {
  Agent agent(tiny_config(), tiny_env(), 2);
  Matrix w(2, 2);
  w << 0.3, -0.2, 0.1, 0.4;
  Vector b(2);
  b << 0.05, -0.05;
  set_linear(agent.online(), w, b);
  Vector s(2);
  s << 1.0, 1.0;
  agent.store(Transition{s, 1, 1.0, s, true});
  const double q = 0.1 + 0.4 - 0.05;  // Q(s, 1)
  const double residual = 1.0 - q;
  const auto loss = agent.train_step();
  REQUIRE(loss);
  CHECK(*loss == doctest::Approx(residual * residual).epsilon(1e-14));
  // d/dtheta (y - q)^2 = -2 (y - q) dq/dtheta; SGD adds 2 lr (y - q) x.
  const double lr = 0.1;
  const auto& l = std::get<DenseLayer>(agent.online().layers()[0]);
  CHECK(l.weights(1, 0) == doctest::Approx(0.1 + 2 * lr * residual).epsilon(1e-14));
  CHECK(l.weights(1, 1) == doctest::Approx(0.4 + 2 * lr * residual).epsilon(1e-14));
  CHECK(l.biases(1) == doctest::Approx(-0.05 + 2 * lr * residual).epsilon(1e-14));
  CHECK(l.weights.row(0) == w.row(0));
  CHECK(l.biases(0) == b(0));
}

TEST_CASE("replay buffer sampling is uniform") {
  ReplayBuffer buf(50);
  for (int i = 0; i < 50; ++i) buf.push(Transition{Vector::Constant(1, i), 0, 0.0, Vector::Zero(1), false});
  RngStream rng(3);
  const std::size_t n = 100000;
  std::vector<double> counts(50, 0.0);
  for (std::size_t i : buf.sample_indices(n, rng)) counts[i] += 1.0;
  const double expected = static_cast<double>(n) / 50.0;
  double chi2 = 0.0;
  const double sigma = std::sqrt(static_cast<double>(n) * (1.0 / 50.0) * (1.0 - 1.0 / 50.0));
  for (double c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
    CHECK(std::abs(c - expected) < 4.0 * sigma);
  }
  CHECK(chi2 < 85.35);  // 0.999 quantile of chi-square with 49 degrees of freedom
}

TEST_CASE("replay buffer evicts oldest first") {
  const std::size_t cap = 8, extra = 5;
  ReplayBuffer buf(cap);
  for (std::size_t i = 0; i < cap + extra; ++i)
    buf.push(Transition{Vector::Constant(1, static_cast<double>(i)), 0, 0.0, Vector::Zero(1), false});
  REQUIRE(buf.size() == cap);
  for (std::size_t i = 0; i < cap; ++i) CHECK(buf.at(i).state(0) == static_cast<double>(extra + i));
  CHECK_THROWS_AS(ReplayBuffer(0), InvalidInput);
}

TEST_CASE("target network is constant between syncs and copied exactly at syncs") {
  AgentConfig cfg = short_config(1000);
  cfg.target_sync_interval = 70;
  cfg.train_start = 20;
  Trainer t(cfg, EnvSpec{}, 4);
  t.run(70);
  const Network synced = t.agent().target();
  CHECK(same_params(synced, t.agent().online()));
  t.run(69);
  CHECK(same_params(t.agent().target(), synced));
  CHECK_FALSE(same_params(t.agent().online(), synced));
  t.run(1);
  CHECK(same_params(t.agent().target(), t.agent().online()));
  CHECK_FALSE(same_params(t.agent().target(), synced));
}

TEST_CASE("sync copies noisy parameters and leaves the copy independent") {
  AgentConfig cfg = short_config(1000);
  cfg.exploration = ExplorationKind::noisy_net;
  Agent agent(cfg, EnvSpec{}, 5);
  auto& l = std::get<NoisyDenseLayer>(agent.online().layers()[0]);
  l.sigma_weights(0, 0) += 1.0;
  agent.sync_target();
  CHECK(same_params(agent.target(), agent.online()));
  const Vector x = Vector::Constant(400, 0.5);
  CHECK(forward(agent.target(), x) == forward(agent.online(), x));
  l.mu_weights(0, 0) += 1.0;
  CHECK_FALSE(same_params(agent.target(), agent.online()));
}

TEST_CASE("action selection modes") {
  AgentConfig cfg = short_config(1000);
  Agent greedy(cfg, EnvSpec{}, 6);
  greedy.set_epsilon_override(0.0);
  RngStream rng(7);
  for (int k = 0; k < 10; ++k) {
    const Vector x = random_vector(400, rng, 0.0, 1.0);
    CHECK(greedy.select_action(x, 0) == argmax(forward(greedy.online(), x)));
  }

  cfg.exploration = ExplorationKind::noisy_net;
  cfg.sigma_scale = 0.0;
  Agent still(cfg, EnvSpec{}, 6);
  const Network mean = mean_network(still.online());
  for (int k = 0; k < 10; ++k) {
    const Vector x = random_vector(400, rng, 0.0, 1.0);
    CHECK(still.select_action(x, 0) == argmax(forward(mean, x)));
  }

  cfg.sigma_scale = 5.0;
  Agent loud(cfg, EnvSpec{}, 6);
  const Vector x = random_vector(400, rng, 0.0, 1.0);
  std::set<std::size_t> seen;
  for (int k = 0; k < 10000; ++k) seen.insert(loud.select_action(x, 0));
  CHECK(seen.size() > 1);
}

TEST_CASE("training is deterministic per seed and a pass-through filter changes nothing") {
  const AgentConfig cfg = short_config(3000);
  const TrainingResult a = run_training(cfg, EnvSpec{}, nullptr, 11);
  const TrainingResult b = run_training(cfg, EnvSpec{}, nullptr, 11);
  PassThroughFilter pass;
  const TrainingResult c = run_training(cfg, EnvSpec{}, &pass, 11);
  REQUIRE(a.curve.size() > 100);
  CHECK(a.curve.returns() == b.curve.returns());
  CHECK(a.losses == b.losses);
  CHECK(a.curve.returns() == c.curve.returns());
  CHECK(a.losses == c.losses);
  CHECK(same_params(a.agent.online(), c.agent.online()));
  const TrainingResult d = run_training(cfg, EnvSpec{}, nullptr, 12);
  CHECK(a.losses != d.losses);
}

TEST_CASE("noisy agent with zero sigma reproduces the greedy agent") {
  AgentConfig eg = short_config(3000);
  eg.epsilon = EpsilonSchedule{0.0, 0.0, 1};
  AgentConfig nn = eg;
  nn.exploration = ExplorationKind::noisy_net;
  nn.sigma_scale = 0.0;
  nn.train_sigma = false;
  const TrainingResult a = run_training(eg, EnvSpec{}, nullptr, 13);
  const TrainingResult b = run_training(nn, EnvSpec{}, nullptr, 13);
  CHECK(a.curve.returns() == b.curve.returns());
  CHECK(a.losses == b.losses);
}

// Records what the learner is shown and replaces it with a marked copy.
class MarkingFilter final : public ObservationFilter {
 public:
  FilteredObservation apply(const Observation& obs, std::uint64_t, const Network&) override {
    ++calls;
    Observation o = obs;
    o(0) = 0.5;  // never produced by the binary renderer
    return {o, true};
  }
  std::size_t calls = 0;
};

TEST_CASE("stored transitions hold filtered observations and raw returns stay unclipped") {
  AgentConfig cfg = short_config(200);
  cfg.train_start = 1000;  // no learning; only bookkeeping
  Trainer t(cfg, EnvSpec{}, 14);
  MarkingFilter f;
  t.run(90, &f);
  const auto& buf = t.agent().buffer();
  REQUIRE(buf.size() == 90);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    CHECK(buf.at(i).state(0) == 0.5);
    CHECK(buf.at(i).next_state(0) == 0.5);
  }
  // One observation per step plus one per reset; 90 steps of grid-catch are 10 episodes.
  CHECK(f.calls == 90 + 10);
  for (std::size_t i = 1; i < buf.size(); ++i)
    if (!buf.at(i - 1).terminal) CHECK(buf.at(i).state == buf.at(i - 1).next_state);
  for (const auto& e : t.curve().episodes()) CHECK(e.attacked_fraction == 1.0);
}

TEST_CASE("learning curves reject out-of-order episodes") {
  LearningCurve c;
  c.append(EpisodeRecord{0, 1.0, 9, 0.0});
  CHECK_THROWS_AS(c.append(EpisodeRecord{0, 1.0, 18, 0.0}), InvalidInput);
}

TEST_CASE("agent config validation") {
  AgentConfig c;
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = AgentConfig{};
  c.batch_size = c.buffer_capacity + 1;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  CHECK_NOTHROW(AgentConfig{}.validate());
}
