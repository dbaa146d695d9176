#include "advrl/env/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "advrl/errors.hpp"

namespace advrl {

std::string_view to_string(EnvKind k) { return k == EnvKind::grid_catch ? "grid-catch" : "mini-pong"; }

EnvKind env_kind_from_string(std::string_view s) {
  if (s == "grid-catch") return EnvKind::grid_catch;
  if (s == "mini-pong") return EnvKind::mini_pong;
  throw InvalidInput("unknown environment: " + std::string(s));
}

void EnvSpec::validate_geometry() const {
  if (grid_height < 2 || grid_width < 1) throw InvalidInput("grid must be at least 2 rows by 1 column");
  if (action_count < 1 || action_count > 3) throw InvalidInput("action_count must be 1, 2 or 3");
  if (frame_stack < 1) throw InvalidInput("frame_stack must be >= 1");
  if (name == EnvKind::mini_pong) {
    if (grid_width < 3) throw InvalidInput("mini-pong needs at least 3 columns");
    if (paddle_length < 1 || paddle_length > grid_height)
      throw InvalidInput("mini-pong paddle must fit the grid height");
  }
}

void EnvSpec::validate() const {
  validate_geometry();
  if (action_count < 2) throw InvalidInput("action_count must be >= 2");
  if (max_episode_steps < 1) throw InvalidInput("max_episode_steps must be >= 1");
}

int EnvSpec::paddle_move(std::size_t action) const {
  if (action >= action_count) throw InvalidInput("action " + std::to_string(action) + " out of range");
  switch (action_count) {
    case 1:
      return 0;
    case 2:
      return action == 0 ? -1 : 1;
    default:
      return static_cast<int>(action) - 1;
  }
}

GameStep advance(const EnvSpec& spec, const GameState& state, std::size_t action) {
  const int move = spec.paddle_move(action);
  const int h = static_cast<int>(spec.grid_height);
  const int w = static_cast<int>(spec.grid_width);
  GameStep out;

  if (const auto* c = std::get_if<CatchState>(&state)) {
    CatchState n = *c;
    n.paddle_col = std::clamp(n.paddle_col + move, 0, w - 1);
    n.object_row += 1;
    if (n.object_row >= h - 1) {
      n.object_row = h - 1;
      out.terminal = true;
      out.reward = n.paddle_col == n.object_col ? 1.0 : -1.0;
    }
    out.next = n;
    return out;
  }

  PongState n = std::get<PongState>(state);
  const int len = static_cast<int>(spec.paddle_length);
  n.paddle_top = std::clamp(n.paddle_top + move, 0, h - len);
  n.ball_row += n.vel_row;
  if (n.ball_row < 0) {
    n.ball_row = std::min(1, h - 1);
    n.vel_row = 1;
  } else if (n.ball_row > h - 1) {
    n.ball_row = std::max(h - 2, 0);
    n.vel_row = -1;
  }
  n.ball_col += n.vel_col;
  if (n.ball_col < 0) {
    n.ball_col = 1;
    n.vel_col = 1;
  }
  if (n.ball_col >= w - 1) {
    if (n.ball_row >= n.paddle_top && n.ball_row < n.paddle_top + len) {
      out.reward = 1.0;
      n.ball_col = w - 2;
      n.vel_col = -1;
    } else {
      n.ball_col = w - 1;
      out.reward = -1.0;
      out.terminal = true;
    }
  }
  out.next = n;
  return out;
}

Vector render(const EnvSpec& spec, const GameState& state) {
  const auto w = static_cast<Eigen::Index>(spec.grid_width);
  Vector frame = Vector::Zero(static_cast<Eigen::Index>(spec.frame_size()));
  if (const auto* c = std::get_if<CatchState>(&state)) {
    frame(c->object_row * w + c->object_col) = 1.0;
    frame((static_cast<Eigen::Index>(spec.grid_height) - 1) * w + c->paddle_col) = 1.0;
  } else {
    const auto& p = std::get<PongState>(state);
    frame(p.ball_row * w + p.ball_col) = 1.0;
    for (std::size_t i = 0; i < spec.paddle_length; ++i)
      frame((p.paddle_top + static_cast<Eigen::Index>(i)) * w + (w - 1)) = 1.0;
  }
  return frame;
}

Environment::Environment(EnvSpec spec, RngStream rng) : spec_(spec), rng_(std::move(rng)) {
  spec_.validate();
}

Observation Environment::reset() {
  const int h = static_cast<int>(spec_.grid_height);
  if (spec_.name == EnvKind::grid_catch) {
    CatchState s;
    s.object_col = static_cast<int>(rng_.index(spec_.grid_width));
    s.paddle_col = static_cast<int>(rng_.index(spec_.grid_width));
    return reset_to(s);
  }
  PongState s;
  s.ball_col = 0;
  s.vel_col = 1;
  s.ball_row = static_cast<int>(rng_.index(static_cast<std::size_t>(h)));
  s.vel_row = rng_.index(2) == 0 ? -1 : 1;
  s.paddle_top = static_cast<int>(rng_.index(spec_.grid_height - spec_.paddle_length + 1));
  return reset_to(s);
}

Observation Environment::reset_to(const GameState& state) {
  if ((spec_.name == EnvKind::grid_catch) != std::holds_alternative<CatchState>(state))
    throw InvalidInput("state does not belong to this environment");
  state_ = state;
  steps_ = 0;
  over_ = false;
  const Vector frame = render(spec_, state_);
  const auto f = frame.size();
  stack_.resize(static_cast<Eigen::Index>(spec_.observation_size()));
  for (std::size_t k = 0; k < spec_.frame_stack; ++k) stack_.segment(static_cast<Eigen::Index>(k) * f, f) = frame;
  return stack_;
}

void Environment::push_frame() {
  const Vector frame = render(spec_, state_);
  const auto f = frame.size();
  const auto total = stack_.size();
  if (total > f) stack_.head(total - f) = stack_.tail(total - f).eval();
  stack_.tail(f) = frame;
}

StepResult Environment::step(std::size_t action) {
  if (over_) throw ProtocolError("step() called on a finished episode; call reset() first");
  GameStep g = advance(spec_, state_, action);
  state_ = g.next;
  ++steps_;
  push_frame();

  StepResult r;
  r.observation = stack_;
  r.reward = g.reward;
  r.terminal = g.terminal;
  r.truncated = !g.terminal && steps_ >= spec_.max_episode_steps;
  over_ = r.done();
  return r;
}

std::vector<GameState> initial_states(const EnvSpec& spec) {
  std::vector<GameState> out;
  const int h = static_cast<int>(spec.grid_height);
  const int w = static_cast<int>(spec.grid_width);
  if (spec.name == EnvKind::grid_catch) {
    for (int obj = 0; obj < w; ++obj)
      for (int pad = 0; pad < w; ++pad) out.emplace_back(CatchState{0, obj, pad});
    return out;
  }
  const int tops = h - static_cast<int>(spec.paddle_length) + 1;
  for (int row = 0; row < h; ++row)
    for (int vr : {-1, 1})
      for (int top = 0; top < tops; ++top) out.emplace_back(PongState{row, 0, vr, 1, top});
  return out;
}

namespace {

// Finite-horizon optimal value by memoized search. States are indexed densely;
// the horizon is the remaining step budget.
class OptimalSearch {
 public:
  explicit OptimalSearch(const EnvSpec& spec) : spec_(spec) {
    const std::size_t h = spec.grid_height, w = spec.grid_width;
    per_step_ = spec.name == EnvKind::grid_catch ? h * w * w
                                                 : h * w * 4 * (h - spec.paddle_length + 1);
    const std::size_t cells = per_step_ * (spec.max_episode_steps + 1);
    if (cells > kMaxCells) throw NotAvailable("state space too large for exhaustive optimal-return search");
    memo_.assign(cells, std::numeric_limits<double>::quiet_NaN());
  }

  double value(const GameState& s, std::size_t remaining) {
    if (remaining == 0) return 0.0;
    double& slot = memo_[remaining * per_step_ + index(s)];
    if (!std::isnan(slot)) return slot;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < spec_.action_count; ++a) {
      GameStep g = advance(spec_, s, a);
      const double v = g.reward + (g.terminal ? 0.0 : value(g.next, remaining - 1));
      best = std::max(best, v);
    }
    slot = best;
    return best;
  }

 private:
  std::size_t index(const GameState& s) const {
    const std::size_t h = spec_.grid_height, w = spec_.grid_width;
    if (const auto* c = std::get_if<CatchState>(&s))
      return (static_cast<std::size_t>(c->object_row) * w + static_cast<std::size_t>(c->object_col)) * w +
             static_cast<std::size_t>(c->paddle_col);
    const auto& p = std::get<PongState>(s);
    const std::size_t vel = (p.vel_row > 0 ? 1 : 0) * 2 + (p.vel_col > 0 ? 1 : 0);
    const std::size_t tops = h - spec_.paddle_length + 1;
    return ((static_cast<std::size_t>(p.ball_row) * w + static_cast<std::size_t>(p.ball_col)) * 4 + vel) * tops +
           static_cast<std::size_t>(p.paddle_top);
  }

  static constexpr std::size_t kMaxCells = std::size_t{1} << 27;

  EnvSpec spec_;
  std::size_t per_step_ = 0;
  std::vector<double> memo_;
};

}  // namespace

double optimal_return(const EnvSpec& spec) {
  spec.validate_geometry();
  if (spec.max_episode_steps == 0) return 0.0;
  OptimalSearch search(spec);
  const auto starts = initial_states(spec);
  double total = 0.0;
  for (const auto& s : starts) total += search.value(s, spec.max_episode_steps);
  return total / static_cast<double>(starts.size());
}

}  // namespace advrl
