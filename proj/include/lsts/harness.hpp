#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsts/baselines.hpp"
#include "lsts/gridworld.hpp"
#include "lsts/teacher.hpp"

// Experiment harness: JSON config ingestion, seeded multi-trial runs,
// deterministic CSV emission, and cross-run statistics. Every output except
// timings.csv is a pure function of (config, seeds) and reruns byte-identical.

namespace lsts::harness {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateVarianceError : std::runtime_error {
  DegenerateVarianceError()
      : std::runtime_error("both samples have zero variance; t statistic undefined") {}
};

// Keys (JSON object, see assets/configs/ for examples):
//   env: "doorkey" | "search_rescue"     layout: path (relative to the config)
//   spec: path | spec_text: inline       algo, seeds, budget, out
//   max_episode_steps (optional)         threshold (time-to-threshold, 0.9)
//   params.{x, alpha, epsilon, eta, tau, eval_episodes, step_budget,
//           soft_discard_bias, learning_rate, discount, student_epsilon,
//           compose_episodes, deterministic_eval, per_edge_budget,
//           shaping_scale, slope_window}
struct ExperimentConfig {
  std::string env_name;
  std::string layout_path;  // absolute after loading
  std::string spec_text;
  std::string algo = "lsts";
  std::vector<uint64_t> seeds;
  uint64_t budget = 2000000;
  std::string out_dir = "out";
  int max_episode_steps = 500;
  double threshold = 0.9;
  baselines::BaselineParams params;
};

// Parses and validates a config file; relative layout/spec paths resolve
// against the config file's directory. Throws ConfigError naming the field.
ExperimentConfig load_config(const std::string& path);

// Sets one field by dotted key (e.g. "budget", "algo", "params.x",
// "seeds" = "1,2,3"). Throws ConfigError on unknown keys or bad values.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct TrialRecord {
  std::string algo;
  uint64_t seed = 0;
  uint64_t total_interactions = 0;
  bool converged = false;
  double final_success_rate = 0.0;
  double wall_time_ms = 0.0;  // kept out of trials.csv so reruns are byte-identical
  std::string learned_path;   // "q0-q2-q3-q4", empty when not converged
};

struct ExperimentResult {
  graph::AbstractGraph graph;
  std::vector<TrialRecord> trials;
  std::vector<std::pair<uint64_t, teacher::RunResult>> runs;  // (seed, run), config order
};

// Runs one algorithm by name ("lsts", "lsts_ct", "lfs", "gsrs", "qrm",
// "dirl", "dirl_c", "tscl"). Throws ConfigError for unknown names.
teacher::RunResult dispatch_run(const std::string& algo, const graph::AbstractGraph& g,
                                env::LabeledMdp& env, const spec::SpecPtr& phi,
                                const baselines::BaselineParams& params, uint64_t budget,
                                uint64_t master_seed);

// One trial per seed, sequential, deterministic per (config, seed).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes trials.csv, curves.csv, and timings.csv under cfg.out_dir.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res);

// trials.csv round-trip (wall_time_ms comes back 0; it lives in timings.csv).
std::vector<TrialRecord> read_trials(const std::string& csv_path);

struct CurveRow {
  std::string algo;
  uint64_t seed = 0;
  uint64_t interaction_stamp = 0;
  std::string series;  // "q<src>-q<dst>" or "composed"
  double success_rate = 0.0;
};

std::vector<CurveRow> read_curves(const std::string& csv_path);

// First interaction stamp at which a composed-series row for `seed` reaches
// `threshold`; nullopt when it never does.
std::optional<uint64_t> time_to_threshold(const std::vector<CurveRow>& rows, uint64_t seed,
                                          double threshold);

struct Summary {
  int n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample SD (n-1 denominator), 0 when n < 2
};

Summary summarize(const std::vector<double>& xs);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Unequal-variance t test with Welch–Satterthwaite degrees of freedom.
// Requires at least two samples per side; throws DegenerateVarianceError
// when both sample variances are zero.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Reads <in_dir>/<algo>/{trials,curves}.csv for both algorithms and renders a
// plain-text report: per-algo summaries, time-to-threshold, and the Welch
// test on total interactions.
std::string compare_report(const std::string& in_dir, const std::string& algo_a,
                           const std::string& algo_b, double threshold = 0.9);

}  // namespace lsts::harness
