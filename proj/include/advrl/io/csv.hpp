#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "advrl/harness/experiment.hpp"

namespace advrl {

/// Plain decimal rendering (no exponent), trailing zeros trimmed.
std::string format_decimal(double v);

inline const std::vector<std::string> kEpisodesHeader{"run_id",   "seed",           "episode",          "global_step",
                                                      "raw_return", "rolling_mean_100", "attacked_fraction"};
inline const std::vector<std::string> kAttacksHeader{"run_id",      "step",       "attacked",
                                                     "pre_action", "post_action", "delta_inf_norm"};
inline const std::vector<std::string> kEvalsHeader{"run_id",      "checkpoint", "condition", "p",
                                                   "mean_return", "std_return", "episodes"};

/// Append-only CSV file. The header is written on creation; every row is
/// flushed so a crashed run leaves a parseable prefix.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
};

CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> episode_row(const std::string& run_id, std::uint64_t seed, const EpisodeRecord& e,
                                     double rolling);
std::vector<std::string> attack_row(const std::string& run_id, const AttackRecord& r);
std::vector<std::string> eval_row(const std::string& run_id, const EvalResult& e);

/// Concatenates CSV files sharing one header into `dest` (header once).
void merge_csv(const std::vector<std::filesystem::path>& parts, const std::filesystem::path& dest,
               const std::vector<std::string>& header);

}  // namespace advrl
