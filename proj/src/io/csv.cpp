#include "advrl/io/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "advrl/errors.hpp"

namespace advrl {

std::string format_decimal(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", v);
  std::string s(buf);
  const auto dot = s.find('.');
  if (dot != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

namespace {

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  if (fresh) {
    out_ << join(header) << '\n';
    out_.flush();
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw InvalidInput("CSV row width does not match header of " + path_.string());
  out_ << join(cells) << '\n';
  out_.flush();
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw InvalidInput("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) break;  // torn final row of a crashed run
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::vector<std::string> episode_row(const std::string& run_id, std::uint64_t seed, const EpisodeRecord& e,
                                     double rolling) {
  return {run_id,
          std::to_string(seed),
          std::to_string(e.episode),
          std::to_string(e.global_step),
          format_decimal(e.raw_return),
          format_decimal(rolling),
          format_decimal(e.attacked_fraction)};
}

std::vector<std::string> attack_row(const std::string& run_id, const AttackRecord& r) {
  return {run_id,
          std::to_string(r.step),
          r.attacked ? "1" : "0",
          std::to_string(r.pre_action),
          std::to_string(r.post_action),
          format_decimal(r.delta_inf_norm)};
}

std::vector<std::string> eval_row(const std::string& run_id, const EvalResult& e) {
  return {run_id,
          e.checkpoint,
          e.condition,
          format_decimal(e.probability),
          format_decimal(e.mean_return),
          format_decimal(e.std_return),
          std::to_string(e.episodes)};
}

void merge_csv(const std::vector<std::filesystem::path>& parts, const std::filesystem::path& dest,
               const std::vector<std::string>& header) {
  if (dest.has_parent_path()) std::filesystem::create_directories(dest.parent_path());
  std::ofstream out(dest, std::ios::trunc);
  if (!out) throw Error("cannot write " + dest.string());
  out << join(header) << '\n';
  for (const auto& p : parts) {
    std::ifstream in(p);
    if (!in) continue;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line))
      if (!line.empty()) out << line << '\n';
  }
}

}  // namespace advrl
