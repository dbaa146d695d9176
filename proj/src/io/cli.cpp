#include "advrl/io/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "advrl/errors.hpp"
#include "advrl/harness/experiment.hpp"
#include "advrl/io/checkpoint.hpp"
#include "advrl/io/config.hpp"
#include "advrl/io/csv.hpp"
#include "advrl/io/svg.hpp"

namespace advrl {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string attack;
  std::optional<std::size_t> episodes;
};

Config resolve_config(const Options& o) {
  nlohmann::json doc = nlohmann::json::object();
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw ConfigError("cannot read config file " + o.config_path);
    try {
      doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  for (const auto& s : o.overrides) apply_override(doc, s);
  ParsedConfig parsed = parse_config(doc);
  for (const auto& n : parsed.notices) std::cerr << "note: " << n << '\n';
  Config c = parsed.config;
  if (o.seed) c.sweep.base.seeds = {*o.seed};
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

fs::path run_dir(const fs::path& out, const std::string& run_id) { return out / "runs" / run_id; }

// Streams every run into its own directory; one writer per file.
class RunWriter : public RunObserver {
 public:
  explicit RunWriter(fs::path out) : out_(std::move(out)) {}

  void on_episode(const std::string& run_id, std::uint64_t seed, const EpisodeRecord& e, double rolling) override {
    CsvWriter* w = nullptr;
    {
      std::lock_guard lock(mu_);
      auto it = episodes_.find(run_id);
      if (it == episodes_.end()) {
        const fs::path dir = run_dir(out_, run_id);
        fs::remove_all(dir);
        it = episodes_.emplace(run_id, std::make_unique<CsvWriter>(dir / "episodes.csv", kEpisodesHeader)).first;
      }
      w = it->second.get();
    }
    w->row(episode_row(run_id, seed, e, rolling));
  }

  void on_run_complete(const RunRecord& rec) override {
    const fs::path dir = run_dir(out_, rec.run_id);
    {
      std::lock_guard lock(mu_);
      if (!episodes_.count(rec.run_id)) fs::remove_all(dir);
      episodes_.erase(rec.run_id);
    }
    fs::create_directories(dir);
    if (!fs::exists(dir / "episodes.csv")) CsvWriter(dir / "episodes.csv", kEpisodesHeader);
    {
      CsvWriter attacks(dir / "attacks.csv", kAttacksHeader);
      for (const auto& r : rec.attack_log.records) attacks.row(attack_row(rec.run_id, r));
    }
    {
      CsvWriter evals(dir / "evals.csv", kEvalsHeader);
      for (const auto& e : rec.evals) evals.row(eval_row(rec.run_id, e));
    }
    if (rec.clean) save_checkpoint(*rec.clean, dir / "clean.ckpt");
    if (rec.adv_trained) save_checkpoint(*rec.adv_trained, dir / "adv-trained.ckpt");

    std::lock_guard lock(mu_);
    std::cerr << rec.run_id << ": ";
    if (rec.status == RunStatus::failed_pretrain) {
      std::cerr << "pretraining did not converge in " << rec.pretrain_steps << " steps\n";
    } else if (const auto& t = rec.stats.transition) {
      std::cerr << "pre-onset " << format_decimal(t->pre_onset) << ", min " << format_decimal(t->min_value)
                << " at episode " << t->min_episode << ", " << (t->recovered ? "recovered" : "not recovered")
                << ", final " << format_decimal(rec.stats.rolling.back()) << '\n';
    } else {
      std::cerr << "too few post-onset episodes to assess\n";
    }
  }

 private:
  fs::path out_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<CsvWriter>> episodes_;
};

std::string opt_decimal(const std::optional<double>& v) { return v ? format_decimal(*v) : ""; }

void write_summary(const std::vector<RunRecord>& records, const fs::path& path) {
  fs::remove(path);
  CsvWriter w(path, {"run_id", "exploration", "p", "seed", "status", "pretrain_steps", "attacked_steps",
                     "onset_episode", "pre_onset", "min_episode", "min_value", "recovered", "recovery_episode",
                     "final_rolling", "decisions", "attacked", "flipped", "max_delta_inf_norm"});
  for (const auto& r : records) {
    const auto& t = r.stats.transition;
    w.row({r.run_id, std::string(to_string(r.exploration)), format_decimal(r.probability), std::to_string(r.seed),
           r.status == RunStatus::ok ? "ok" : "failed-pretrain", std::to_string(r.pretrain_steps),
           std::to_string(r.attacked_steps), r.stats.onset_episode ? std::to_string(*r.stats.onset_episode) : "",
           t ? format_decimal(t->pre_onset) : "", t ? std::to_string(t->min_episode) : "",
           t ? format_decimal(t->min_value) : "", t ? (t->recovered ? "1" : "0") : "",
           t && t->recovery_episode ? std::to_string(*t->recovery_episode) : "",
           r.stats.rolling.empty() ? "" : format_decimal(r.stats.rolling.back()), std::to_string(r.attack.decisions),
           std::to_string(r.attack.attacked), std::to_string(r.attack.flipped), format_decimal(r.attack.max_delta)});
  }
}

void write_comparison(const std::vector<ComparisonRow>& rows, const fs::path& path) {
  fs::remove(path);
  CsvWriter w(path, {"p", "runs", "eg_recovered", "nn_recovered", "eg_min_value", "nn_min_value", "delta_min_value",
                     "eg_episodes_to_min", "nn_episodes_to_min", "delta_episodes_to_min", "eg_episodes_to_recovery",
                     "nn_episodes_to_recovery", "delta_episodes_to_recovery", "eg_attacked_eval", "nn_attacked_eval",
                     "delta_attacked_eval"});
  for (const auto& r : rows) {
    const auto& e = r.epsilon_greedy;
    const auto& n = r.noisy_net;
    w.row({format_decimal(r.probability), std::to_string(e.runs), std::to_string(e.recovered),
           std::to_string(n.recovered), format_decimal(e.min_value), format_decimal(n.min_value),
           format_decimal(r.delta_min_value), format_decimal(e.episodes_to_min), format_decimal(n.episodes_to_min),
           format_decimal(r.delta_episodes_to_min), opt_decimal(e.episodes_to_recovery),
           opt_decimal(n.episodes_to_recovery), opt_decimal(r.delta_episodes_to_recovery),
           opt_decimal(e.attacked_eval_mean), opt_decimal(n.attacked_eval_mean), opt_decimal(r.delta_attacked_eval)});
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

CsvTable read_or_empty(const fs::path& path) {
  if (!fs::exists(path) || fs::file_size(path) == 0) return {};
  return read_csv(path);
}

void render_plots(const fs::path& out) {
  write_text(out / "training_curves.svg", training_curves_svg(read_or_empty(out / "episodes.csv")));
  if (fs::exists(out / "evals.csv"))
    write_text(out / "evaluations.svg", evaluations_svg(read_or_empty(out / "evals.csv")));
}

// Merges per-run CSVs and writes the derived tables and plots.
void finalize(const std::vector<RunRecord>& records, const fs::path& out) {
  std::vector<fs::path> episodes, attacks, evals;
  for (const auto& r : records) {
    const fs::path dir = run_dir(out, r.run_id);
    episodes.push_back(dir / "episodes.csv");
    attacks.push_back(dir / "attacks.csv");
    evals.push_back(dir / "evals.csv");
  }
  merge_csv(episodes, out / "episodes.csv", kEpisodesHeader);
  merge_csv(attacks, out / "attacks.csv", kAttacksHeader);
  merge_csv(evals, out / "evals.csv", kEvalsHeader);
  write_summary(records, out / "summary.csv");

  std::vector<RunRecord> eg, nn;
  for (const auto& r : records) (r.exploration == ExplorationKind::epsilon_greedy ? eg : nn).push_back(r);
  if (!eg.empty() && !nn.empty()) {
    try {
      write_comparison(compare_exploration(eg, nn), out / "comparison.csv");
    } catch (const InvalidInput& e) {
      std::cerr << "note: no exploration comparison: " << e.what() << '\n';
    }
  }
  render_plots(out);
}

int status_code(const std::vector<RunRecord>& records) {
  for (const auto& r : records)
    if (r.status == RunStatus::failed_pretrain) return exit_failed_pretrain;
  return exit_ok;
}

int cmd_train(const Options& o) {
  const Config c = resolve_config(o);
  const ExperimentPlan& plan = c.sweep.base;
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  std::vector<fs::path> parts;
  for (std::uint64_t seed : plan.seeds) {
    const std::string id = std::string(to_string(plan.agent.exploration)) + "_clean_s" + std::to_string(seed);
    const fs::path dir = run_dir(out, id);
    fs::remove_all(dir);
    CsvWriter w(dir / "episodes.csv", kEpisodesHeader);
    Trainer trainer(plan.agent, plan.env, seed);
    std::vector<double> returns;
    trainer.run(plan.agent.total_steps, nullptr, [&](const EpisodeRecord& e, const LearningCurve&) {
      returns.push_back(e.raw_return);
      const auto recent = std::span<const double>(returns).last(std::min(returns.size(), plan.window));
      w.row(episode_row(id, seed, e, rolling_mean(recent, plan.window).back()));
      return false;
    });
    save_checkpoint(make_checkpoint(trainer.agent(), plan.env, trainer.global_step()), dir / "clean.ckpt");
    const auto rolling = rolling_mean(returns, plan.window);
    std::cout << id << ": " << returns.size() << " episodes, final rolling mean "
              << (rolling.empty() ? "n/a" : format_decimal(rolling.back())) << ", checkpoint "
              << (dir / "clean.ckpt").string() << '\n';
    parts.push_back(dir / "episodes.csv");
  }
  merge_csv(parts, out / "episodes.csv", kEpisodesHeader);
  render_plots(out);
  return exit_ok;
}

int cmd_attack_train(const Options& o) {
  const Config c = resolve_config(o);
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  RunWriter writer(out);
  std::vector<RunRecord> records;
  for (std::uint64_t seed : c.sweep.base.seeds)
    records.push_back(run_training_attack_experiment(c.sweep.base, seed, &writer));
  finalize(records, out);
  return status_code(records);
}

int cmd_sweep(const Options& o) {
  const Config c = resolve_config(o);
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  const auto start = std::chrono::steady_clock::now();
  RunWriter writer(out);
  const auto records = run_sweep(c.sweep, &writer);
  finalize(records, out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << records.size() << " runs in " << format_decimal(std::round(secs)) << " s; outputs in " << out.string()
            << '\n';
  return status_code(records);
}

int cmd_eval(const Options& o, bool attack_default) {
  const Config c = resolve_config(o);
  const ExperimentPlan& plan = c.sweep.base;
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const std::string mode = o.attack.empty() ? (attack_default ? "fgsm" : "none") : o.attack;
  if (mode != "none" && mode != "fgsm") throw ConfigError("--attack must be none or fgsm");
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  require_compatible(ckpt, plan.env);

  AttackConfig attack = plan.attack;
  attack.probability = plan.eval_attack_probability;
  attack.onset_step = 0;
  const AttackConfig* a = mode == "fgsm" ? &attack : nullptr;
  const std::size_t episodes = o.episodes.value_or(plan.eval_episodes);
  const std::uint64_t seed = plan.seeds.front();
  const EvalSummary s = evaluate_policy(ckpt, plan.env, a, episodes, seed, plan.agent.noisy_eval);

  const fs::path out = c.output_dir;
  fs::create_directories(out);
  CsvWriter w(out / "evals.csv", kEvalsHeader);
  const EvalResult r{fs::path(o.checkpoint).stem().string(), a ? "attack" : "no-attack", a ? attack.probability : 0.0,
                     s.mean, s.std, s.episodes};
  w.row(eval_row(fs::path(o.checkpoint).parent_path().filename().string(), r));
  std::cout << "mean return " << format_decimal(s.mean) << " +/- " << format_decimal(s.std) << " over " << s.episodes
            << " episodes (" << r.condition << ")\n";
  return exit_ok;
}

int cmd_plot(const Options& o) {
  const Config c = resolve_config(o);
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  render_plots(out);
  std::cout << "wrote " << (out / "training_curves.svg").string() << '\n';
  return exit_ok;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Training-time adversarial attacks on DQN agents with epsilon-greedy and NoisyNet exploration"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "Config override key=value (repeatable)")->take_all();
    sub->add_option("--seed", o.seed, "Run a single seed instead of the plan's seeds");
    sub->add_option("--out", o.out, "Output directory");
  };
  auto* train = app.add_subcommand("train", "Clean DQN training");
  auto* attack_train = app.add_subcommand("attack-train", "Pretrain to convergence, then train under attack");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  auto* attack_eval = app.add_subcommand("attack-eval", "Evaluate a checkpoint under test-time FGSM attack");
  auto* sweep = app.add_subcommand("sweep", "Attack probability x exploration variant x seed matrix");
  auto* plot = app.add_subcommand("plot", "Render SVG plots from the CSVs in the output directory");
  for (auto* s : {train, attack_train, eval, attack_eval, sweep, plot}) common(s);
  for (auto* s : {eval, attack_eval}) {
    s->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    s->add_option("--attack", o.attack, "none or fgsm")->check(CLI::IsMember({"none", "fgsm"}));
    s->add_option("--episodes", o.episodes, "Evaluation episodes");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*train) return cmd_train(o);
    if (*attack_train) return cmd_attack_train(o);
    if (*eval) return cmd_eval(o, false);
    if (*attack_eval) return cmd_eval(o, true);
    if (*sweep) return cmd_sweep(o);
    if (*plot) return cmd_plot(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_config;
}

}  // namespace advrl
