#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <variant>

#include "advrl/core/network.hpp"
#include "advrl/rng.hpp"

namespace advrl {

enum class EnvKind { grid_catch, mini_pong };

std::string_view to_string(EnvKind k);
EnvKind env_kind_from_string(std::string_view s);

/// Geometry and limits of a toy pixel environment.
///
/// Action sets by action_count: 3 = {left/up, stay, right/down}, 2 = {left/up,
/// right/down}, 1 = {stay}. The paddle moves one cell per step in both games.
struct EnvSpec {
  EnvKind name = EnvKind::grid_catch;
  std::size_t grid_height = 10;
  std::size_t grid_width = 10;
  std::size_t action_count = 3;
  std::size_t max_episode_steps = 200;
  std::size_t frame_stack = 4;
  std::size_t paddle_length = 2;  // mini-pong only

  /// Full validation for simulation (requires action_count >= 2).
  void validate() const;
  /// Geometry-only validation; accepts single-action and zero-step specs.
  void validate_geometry() const;

  std::size_t frame_size() const { return grid_height * grid_width; }
  std::size_t observation_size() const { return frame_stack * frame_size(); }
  int paddle_move(std::size_t action) const;
};

/// Stacked binary frames, oldest first, each entry in {0, 1}.
using Observation = Vector;

struct CatchState {
  int object_row = 0;
  int object_col = 0;
  int paddle_col = 0;
};

struct PongState {
  int ball_row = 0;
  int ball_col = 0;
  int vel_row = 1;
  int vel_col = 1;
  int paddle_top = 0;
};

using GameState = std::variant<CatchState, PongState>;

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;   // the game ended (catch resolved, ball missed)
  bool truncated = false;  // step limit reached without a terminal event

  bool done() const { return terminal || truncated; }
};

/// Outcome of one deterministic game transition, without rendering.
struct GameStep {
  GameState next;
  double reward = 0.0;
  bool terminal = false;
};

/// Pure game dynamics shared by the simulator and the optimal-return search.
GameStep advance(const EnvSpec& spec, const GameState& state, std::size_t action);

/// Renders one H x W binary frame, row-major.
Vector render(const EnvSpec& spec, const GameState& state);

/// One episode-at-a-time simulator. Owns its RNG stream; spawn positions are
/// drawn from it on reset, and nothing else consumes it.
class Environment {
 public:
  Environment(EnvSpec spec, RngStream rng);

  const EnvSpec& spec() const { return spec_; }
  const GameState& state() const { return state_; }
  std::size_t steps_taken() const { return steps_; }
  bool episode_over() const { return over_; }

  Observation reset();
  StepResult step(std::size_t action);

  /// Starts an episode from a given state (tests and exhaustive checks).
  Observation reset_to(const GameState& state);

 private:
  void push_frame();

  EnvSpec spec_;
  RngStream rng_;
  GameState state_;
  Observation stack_;
  std::size_t steps_ = 0;
  bool over_ = true;
};

/// All start states reset() can produce, each equally likely.
std::vector<GameState> initial_states(const EnvSpec& spec);

/// Expected undiscounted return of an optimal policy from a uniformly drawn
/// start state, found by exhaustive search over the deterministic dynamics.
double optimal_return(const EnvSpec& spec);

}  // namespace advrl
