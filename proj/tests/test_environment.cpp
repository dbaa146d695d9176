#include "doctest.h"

#include <algorithm>
#include <functional>
#include <set>

#include "advrl/env/environment.hpp"
#include "advrl/errors.hpp"

using namespace advrl;

namespace {

EnvSpec catch_spec() { return EnvSpec{}; }

EnvSpec pong_spec() {
  EnvSpec s;
  s.name = EnvKind::mini_pong;
  return s;
}

// Best return over every open-loop action sequence; equals the optimal
// closed-loop return because the dynamics are deterministic.
double brute_force_best(const EnvSpec& spec, const GameState& s, std::size_t remaining) {
  if (remaining == 0) return 0.0;
  double best = -1e9;
  for (std::size_t a = 0; a < spec.action_count; ++a) {
    const GameStep g = advance(spec, s, a);
    best = std::max(best, g.reward + (g.terminal ? 0.0 : brute_force_best(spec, g.next, remaining - 1)));
  }
  return best;
}

double brute_force_optimal(const EnvSpec& spec) {
  const auto starts = initial_states(spec);
  double total = 0.0;
  for (const auto& s : starts) total += brute_force_best(spec, s, spec.max_episode_steps);
  return total / static_cast<double>(starts.size());
}

}  // namespace

TEST_CASE("observation shape and binary pixels") {
  Environment env(catch_spec(), RngStream(1));
  const Observation o = env.reset();
  CHECK(o.size() == 400);
  CHECK(std::all_of(o.begin(), o.end(), [](double v) { return v == 0.0 || v == 1.0; }));
  Environment pong(pong_spec(), RngStream(1));
  const Observation p = pong.reset();
  CHECK(p.size() == 400);
  CHECK(std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0 || v == 1.0; }));
}

TEST_CASE("seeded resets are deterministic") {
  for (std::uint64_t seed : {1, 2, 3, 77}) {
    Environment a(catch_spec(), RngStream(seed)), b(catch_spec(), RngStream(seed));
    for (int ep = 0; ep < 5; ++ep) {
      CHECK(a.reset() == b.reset());
      CHECK(a.state().index() == b.state().index());
    }
  }
}

TEST_CASE("reset replicates the first frame across the stack") {
  Environment env(catch_spec(), RngStream(5));
  const Observation o = env.reset();
  const auto f = static_cast<Eigen::Index>(catch_spec().frame_size());
  for (Eigen::Index k = 1; k < 4; ++k) CHECK(o.segment(k * f, f) == o.head(f));
}

TEST_CASE("frame stack keeps the newest frame last") {
  Environment env(catch_spec(), RngStream(6));
  const Observation o0 = env.reset();
  const auto f = static_cast<Eigen::Index>(catch_spec().frame_size());
  const StepResult r1 = env.step(1);
  const StepResult r2 = env.step(1);
  CHECK(r2.observation.tail(f) == render(catch_spec(), env.state()));
  CHECK(r2.observation.segment(2 * f, f) == r1.observation.tail(f));
  CHECK(r2.observation.segment(f, f) == o0.head(f));
  CHECK(r2.observation.tail(f) != r1.observation.tail(f));
}

TEST_CASE("grid-catch forced catch at the penultimate row") {
  const EnvSpec spec = catch_spec();
  const GameStep g = advance(spec, CatchState{8, 4, 4}, 1);
  CHECK(g.terminal);
  CHECK(g.reward == 1.0);
  const GameStep miss = advance(spec, CatchState{8, 4, 6}, 1);
  CHECK(miss.terminal);
  CHECK(miss.reward == -1.0);
  const GameStep mid = advance(spec, CatchState{3, 4, 6}, 2);
  CHECK_FALSE(mid.terminal);
  CHECK(mid.reward == 0.0);
}

TEST_CASE("grid-catch episodes last height minus one steps") {
  Environment env(catch_spec(), RngStream(7));
  for (int ep = 0; ep < 20; ++ep) {
    env.reset();
    int steps = 0;
    StepResult r;
    do {
      r = env.step(static_cast<std::size_t>(ep % 3));
      ++steps;
    } while (!r.done());
    CHECK(steps == 9);
    CHECK(r.terminal);
  }
}

TEST_CASE("moving toward the object catches it from every start") {
  const EnvSpec spec = catch_spec();
  Environment env(spec, RngStream(8));
  for (const auto& start : initial_states(spec)) {
    env.reset_to(start);
    double ret = 0.0;
    StepResult r;
    do {
      const auto& s = std::get<CatchState>(env.state());
      const std::size_t a = s.paddle_col < s.object_col ? 2 : s.paddle_col > s.object_col ? 0 : 1;
      r = env.step(a);
      ret += r.reward;
    } while (!r.done());
    CHECK(ret == 1.0);
  }
}

TEST_CASE("optimal return of grid-catch") {
  CHECK(optimal_return(catch_spec()) == 1.0);
}

TEST_CASE("frozen paddle catches only by luck") {
  for (std::size_t w : {3, 5, 10}) {
    EnvSpec spec = catch_spec();
    spec.grid_width = w;
    spec.action_count = 1;
    // Enumerate spawn column x paddle column; catches happen on the diagonal.
    double total = 0.0;
    for (std::size_t obj = 0; obj < w; ++obj)
      for (std::size_t pad = 0; pad < w; ++pad) total += obj == pad ? 1.0 : -1.0;
    const double expected = total / static_cast<double>(w * w);
    CHECK(optimal_return(spec) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(2.0 / static_cast<double>(w) - 1.0).epsilon(1e-12));
  }
}

TEST_CASE("mini-pong with no steps has zero return") {
  EnvSpec spec = pong_spec();
  spec.max_episode_steps = 0;
  CHECK(optimal_return(spec) == 0.0);
}

TEST_CASE("memoized optimum matches brute force on small boards") {
  EnvSpec c = catch_spec();
  c.grid_height = 5;
  c.grid_width = 5;
  CHECK(optimal_return(c) == doctest::Approx(brute_force_optimal(c)).epsilon(1e-12));
  c.grid_width = 8;  // paddle cannot always reach the object
  CHECK(optimal_return(c) == doctest::Approx(brute_force_optimal(c)).epsilon(1e-12));
  CHECK(optimal_return(c) < 1.0);

  EnvSpec p = pong_spec();
  p.grid_height = 4;
  p.grid_width = 4;
  p.max_episode_steps = 8;
  CHECK(optimal_return(p) == doctest::Approx(brute_force_optimal(p)).epsilon(1e-12));
  p.paddle_length = 1;
  p.action_count = 2;
  CHECK(optimal_return(p) == doctest::Approx(brute_force_optimal(p)).epsilon(1e-12));
}

TEST_CASE("mini-pong returns and misses") {
  const EnvSpec spec = pong_spec();
  // Ball one column from the paddle side, moving right and down into rows 4..5.
  const GameStep hit = advance(spec, PongState{3, 8, 1, 1, 4}, 1);
  CHECK(hit.reward == 1.0);
  CHECK_FALSE(hit.terminal);
  const auto& after = std::get<PongState>(hit.next);
  CHECK(after.vel_col == -1);
  CHECK(after.ball_col == 8);
  const GameStep miss = advance(spec, PongState{3, 8, 1, 1, 7}, 1);
  CHECK(miss.reward == -1.0);
  CHECK(miss.terminal);
  // Reflection off the top wall.
  const GameStep top = advance(spec, PongState{0, 2, -1, 1, 0}, 1);
  CHECK(std::get<PongState>(top.next).ball_row == 1);
  CHECK(std::get<PongState>(top.next).vel_row == 1);
}

TEST_CASE("mini-pong episodes truncate at the step limit") {
  EnvSpec spec = pong_spec();
  spec.max_episode_steps = 30;
  spec.paddle_length = spec.grid_height;  // a wall: every volley is returned
  Environment env(spec, RngStream(9));
  env.reset();
  StepResult r;
  int steps = 0;
  double ret = 0.0;
  do {
    r = env.step(static_cast<std::size_t>(steps % 3));
    ret += r.reward;
    ++steps;
  } while (!r.done());
  CHECK(ret >= 1.0);
  CHECK(r.truncated);
  CHECK_FALSE(r.terminal);
  CHECK(steps == 30);
}

TEST_CASE("stepping a finished episode is a protocol error") {
  Environment env(catch_spec(), RngStream(10));
  env.reset();
  StepResult r;
  do r = env.step(1);
  while (!r.done());
  CHECK_THROWS_AS(env.step(1), ProtocolError);
  env.reset();
  CHECK_NOTHROW(env.step(1));
}

TEST_CASE("invalid specs and actions are rejected") {
  EnvSpec bad = catch_spec();
  bad.action_count = 1;
  CHECK_THROWS_AS(Environment(bad, RngStream(1)), InvalidInput);
  Environment env(catch_spec(), RngStream(1));
  env.reset();
  CHECK_THROWS_AS(env.step(3), InvalidInput);
  CHECK_THROWS_AS(env_kind_from_string("breakout"), InvalidInput);
}
