#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "advrl/agent/dqn.hpp"
#include "advrl/core/network.hpp"
#include "advrl/env/environment.hpp"

namespace advrl {

inline constexpr std::string_view kCheckpointHeader = "ADVRL-CKPT-1";

/// Networks of an agent plus what is needed to refuse a mismatched use.
/// Replay memory and noise samples are never stored.
struct Checkpoint {
  EnvSpec env;
  ExplorationKind exploration = ExplorationKind::epsilon_greedy;
  std::uint64_t step = 0;
  Network online;
  Network target;
};

Checkpoint make_checkpoint(const Agent& agent, const EnvSpec& env, std::uint64_t step);

/// Text format: header line, key/value descriptor lines, then every parameter
/// as a hexadecimal float (exact round trip), terminated by an `end` line.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError unless the checkpoint was trained on `env`'s game and geometry.
void require_compatible(const Checkpoint& ckpt, const EnvSpec& env);

}  // namespace advrl
