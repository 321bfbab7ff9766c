#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lsts/harness.hpp"
#include "oracles.hpp"

using namespace lsts;
using harness::ConfigError;
using harness::ExperimentConfig;

namespace fs = std::filesystem;

namespace {

const char* kTinyDoorKey =
    "#####\n"
    "#1.2#\n"
    "#A@E.D#\n"
    "#.LG#\n"
    "#####\n";

const char* kSpecText = "((achieve k1 or achieve k2) ; achieve d ; achieve g) ensuring !l";

// A fresh scratch directory per call, removed when the guard dies.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("lsts_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name, const std::string& content) const {
    fs::path p = path / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p.string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes layout + spec files and a config JSON referencing them relatively.
std::string write_config(const TempDir& dir, const std::string& extra_json) {
  dir.file("tiny.txt", kTinyDoorKey);
  dir.file("task.spec", std::string(kSpecText) + "\n");
  std::string body = std::string("{\n") +
                     "  \"env\": \"doorkey\",\n"
                     "  \"layout\": \"tiny.txt\",\n"
                     "  \"spec\": \"task.spec\",\n"
                     "  \"seeds\": [1, 2],\n"
                     "  \"max_episode_steps\": 200,\n"
                     "  \"params\": {\"step_budget\": 40}" +
                     (extra_json.empty() ? "" : ",\n  " + extra_json) + "\n}\n";
  return dir.file("config.json", body);
}

void expect_config_error(const std::string& json_body, const std::string& needle) {
  TempDir dir;
  dir.file("tiny.txt", kTinyDoorKey);
  dir.file("task.spec", kSpecText);
  std::string path = dir.file("config.json", json_body);
  try {
    harness::load_config(path);
    FAIL_CHECK("expected ConfigError containing '" << needle << "'");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("config files load with relative paths resolved and defaults applied") {
  TempDir dir;
  std::string path = write_config(dir, "\"algo\": \"lsts_ct\", \"budget\": 12345,\n"
                                       "  \"out\": \"results\", \"threshold\": 0.8");
  ExperimentConfig cfg = harness::load_config(path);
  CHECK(cfg.env_name == "doorkey");
  CHECK(fs::path(cfg.layout_path).is_absolute());
  CHECK(fs::path(cfg.layout_path).filename() == "tiny.txt");
  CHECK(cfg.spec_text.find("achieve k1") != std::string::npos);
  CHECK(cfg.algo == "lsts_ct");
  CHECK(cfg.seeds == std::vector<uint64_t>{1, 2});
  CHECK(cfg.budget == 12345);
  CHECK(cfg.out_dir == "results");
  CHECK(cfg.max_episode_steps == 200);
  CHECK(cfg.threshold == 0.8);
  CHECK(cfg.params.teacher.step_budget == 40);

  SUBCASE("inline spec text replaces the file reference") {
    std::string p2 = dir.file("inline.json",
                              "{\"env\": \"doorkey\", \"layout\": \"tiny.txt\","
                              " \"spec_text\": \"achieve g\", \"seeds\": [7]}");
    ExperimentConfig c2 = harness::load_config(p2);
    CHECK(c2.spec_text == "achieve g");
    CHECK(c2.algo == "lsts");           // defaults
    CHECK(c2.budget == 2000000);
    CHECK(c2.max_episode_steps == 500);
    CHECK(c2.threshold == 0.9);
  }
}

TEST_CASE("config validation names the offending field") {
  expect_config_error("[1,2]", "config: top level must be an object");
  expect_config_error("{not json", "config:");
  expect_config_error(R"({"layout":"tiny.txt","spec":"task.spec","seeds":[1]})",
                      "env: missing required key");
  expect_config_error(
      R"({"env":"mars","layout":"tiny.txt","spec":"task.spec","seeds":[1]})",
      "env: unknown environment 'mars'");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","spec_text":"achieve g","seeds":[1]})",
      "spec: give exactly one");
  expect_config_error(R"({"env":"doorkey","layout":"tiny.txt","seeds":[1]})",
                      "spec: give exactly one");
  // The spec file is read eagerly; the layout is only read when a run starts.
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"missing.spec","seeds":[1]})",
      "cannot read file");
  expect_config_error(R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec"})",
                      "seeds: must be a nonempty array");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[]})",
      "seeds: must be a nonempty array");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[-1]})",
      "seeds: must be nonnegative integers");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[3,3]})",
      "seeds: seeds must be distinct");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"budget":0})",
      "budget: must be a positive integer");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"algo":"sarsa"})",
      "algo: unknown algorithm 'sarsa'");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"threshold":1.5})",
      "threshold: must be in (0, 1]");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"max_episode_steps":0})",
      "max_episode_steps: must be a positive integer");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"params":{"warp":1}})",
      "params.warp: unknown key");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"params":{"x":"fast"}})",
      "params.x: wrong value type");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"params":[1]})",
      "params: must be an object");
  expect_config_error(
      R"({"env":"doorkey","layout":"tiny.txt","spec":"task.spec","seeds":[1],"color":"red"})",
      "color: unknown key");
}

TEST_CASE("dotted-key overrides update fields and reject bad values") {
  ExperimentConfig cfg;
  harness::apply_override(cfg, "algo", "dirl_c");
  CHECK(cfg.algo == "dirl_c");
  harness::apply_override(cfg, "seeds", "4,5,6");
  CHECK(cfg.seeds == std::vector<uint64_t>{4, 5, 6});
  harness::apply_override(cfg, "budget", "777");
  CHECK(cfg.budget == 777);
  harness::apply_override(cfg, "threshold", "0.5");
  CHECK(cfg.threshold == 0.5);
  harness::apply_override(cfg, "max_episode_steps", "123");
  CHECK(cfg.max_episode_steps == 123);
  harness::apply_override(cfg, "out", "elsewhere");
  CHECK(cfg.out_dir == "elsewhere");
  harness::apply_override(cfg, "spec_text", "achieve g");
  CHECK(cfg.spec_text == "achieve g");
  harness::apply_override(cfg, "params.x", "250");
  CHECK(cfg.params.teacher.x == 250);
  harness::apply_override(cfg, "params.eta", "0.9");
  CHECK(cfg.params.teacher.eta == 0.9);
  harness::apply_override(cfg, "params.per_edge_budget", "4096");
  CHECK(cfg.params.per_edge_budget == 4096);
  harness::apply_override(cfg, "params.deterministic_eval", "true");
  CHECK(cfg.params.teacher.deterministic_eval);
  harness::apply_override(cfg, "params.deterministic_eval", "0");
  CHECK_FALSE(cfg.params.teacher.deterministic_eval);

  CHECK_THROWS_AS(harness::apply_override(cfg, "algo", "sarsa"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "seeds", "1,oops"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "seeds", "2,2"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "budget", "0"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "budget", "10k"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "threshold", "2"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "params.x", "0"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "params.slope_window", "1"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "params.deterministic_eval", "maybe"),
                  ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "params.warp", "1"), ConfigError);
  CHECK_THROWS_AS(harness::apply_override(cfg, "nope", "1"), ConfigError);
}

TEST_CASE("sample statistics: mean and sample standard deviation") {
  harness::Summary empty = harness::summarize({});
  CHECK(empty.n == 0);
  CHECK(empty.mean == 0.0);
  CHECK(empty.stddev == 0.0);

  harness::Summary one = harness::summarize({5.0});
  CHECK(one.n == 1);
  CHECK(one.mean == 5.0);
  CHECK(one.stddev == 0.0);  // undefined below two samples; reported as zero

  harness::Summary two = harness::summarize({2.0, 4.0});
  CHECK(two.n == 2);
  CHECK(two.mean == 3.0);
  CHECK(two.stddev == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  harness::Summary three = harness::summarize({1.0, 2.0, 3.0});
  CHECK(three.mean == 2.0);
  CHECK(three.stddev == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unequal-variance t test matches the closed form") {
  harness::WelchResult w = harness::welch_t_test({1, 2, 3}, {4, 5, 6});
  CHECK(w.t == doctest::Approx(oracles::welch_t_123_456()).epsilon(1e-12));
  CHECK(w.df == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(w.p == doctest::Approx(oracles::welch_p_123_456()).epsilon(1e-9));
  CHECK(w.p < 0.05);

  harness::WelchResult flipped = harness::welch_t_test({4, 5, 6}, {1, 2, 3});
  CHECK(flipped.t == doctest::Approx(-w.t).epsilon(1e-12));
  CHECK(flipped.p == doctest::Approx(w.p).epsilon(1e-12));

  harness::WelchResult same = harness::welch_t_test({1, 2, 3}, {1, 2, 3});
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);

  // One-sided zero variance is fine; both-sided is undefined.
  CHECK_NOTHROW(harness::welch_t_test({1, 1, 1}, {1, 2, 3}));
  CHECK_THROWS_AS(harness::welch_t_test({1, 1, 1}, {2, 2, 2}),
                  harness::DegenerateVarianceError);
  CHECK_THROWS_AS(harness::welch_t_test({1}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(harness::welch_t_test({1, 2}, {}), std::invalid_argument);
}

TEST_CASE("threshold crossing scans composed rows only, in file order") {
  std::vector<harness::CurveRow> rows = {
      {"lsts", 1, 100, "q0-q1", 0.99},     // edge series never counts
      {"lsts", 1, 200, "composed", 0.50},
      {"lsts", 2, 250, "composed", 0.95},  // other seed
      {"lsts", 1, 300, "composed", 0.90},
      {"lsts", 1, 400, "composed", 1.00},
  };
  CHECK(harness::time_to_threshold(rows, 1, 0.9) == 300);
  CHECK(harness::time_to_threshold(rows, 1, 0.99) == 400);
  CHECK(harness::time_to_threshold(rows, 2, 0.9) == 250);
  CHECK_FALSE(harness::time_to_threshold(rows, 3, 0.9).has_value());
  CHECK_FALSE(harness::time_to_threshold(rows, 1, 1.01).has_value());
}

TEST_CASE("experiments run per seed and round-trip through the CSV files") {
  TempDir dir;
  std::string path = write_config(dir, "\"budget\": 500000");
  ExperimentConfig cfg = harness::load_config(path);
  cfg.out_dir = (dir.path / "out_a").string();

  harness::ExperimentResult res = harness::run_experiment(cfg);
  REQUIRE(res.trials.size() == 2);
  REQUIRE(res.runs.size() == 2);
  for (size_t i = 0; i < res.trials.size(); ++i) {
    const harness::TrialRecord& t = res.trials[i];
    CHECK(t.algo == "lsts");
    CHECK(t.seed == cfg.seeds[i]);
    CHECK(t.converged);
    CHECK(t.final_success_rate == 1.0);
    CHECK(t.learned_path.substr(0, 3) == "q0-");
    CHECK(t.learned_path.substr(t.learned_path.size() - 3) == "-q4");
    CHECK(t.total_interactions == res.runs[i].second.total_interactions);
    CHECK(t.wall_time_ms > 0.0);
  }

  harness::write_outputs(cfg, res);
  auto trials = harness::read_trials((fs::path(cfg.out_dir) / "trials.csv").string());
  REQUIRE(trials.size() == 2);
  for (size_t i = 0; i < trials.size(); ++i) {
    CHECK(trials[i].algo == res.trials[i].algo);
    CHECK(trials[i].seed == res.trials[i].seed);
    CHECK(trials[i].total_interactions == res.trials[i].total_interactions);
    CHECK(trials[i].converged == res.trials[i].converged);
    CHECK(trials[i].final_success_rate ==
          doctest::Approx(res.trials[i].final_success_rate).epsilon(1e-6));
    CHECK(trials[i].learned_path == res.trials[i].learned_path);
    CHECK(trials[i].wall_time_ms == 0.0);  // lives in timings.csv only
  }

  auto curves = harness::read_curves((fs::path(cfg.out_dir) / "curves.csv").string());
  size_t expected_rows = 0;
  for (const auto& [seed, run] : res.runs) expected_rows += run.curves.size();
  REQUIRE(curves.size() == expected_rows);
  size_t row = 0;
  for (const auto& [seed, run] : res.runs) {
    for (const teacher::CurvePoint& cp : run.curves) {
      CHECK(curves[row].seed == seed);
      CHECK(curves[row].interaction_stamp == cp.stamp);
      if (cp.edge < 0) {
        CHECK(curves[row].series == "composed");
      } else {
        std::string want = "q" + std::to_string(res.graph.edges[cp.edge].src) + "-q" +
                           std::to_string(res.graph.edges[cp.edge].dst);
        CHECK(curves[row].series == want);
      }
      ++row;
    }
  }
  for (uint64_t seed : cfg.seeds) {
    auto reached = harness::time_to_threshold(curves, seed, 0.9);
    REQUIRE(reached.has_value());
    CHECK(*reached > 0);
  }

  SUBCASE("a rerun reproduces trials.csv and curves.csv byte for byte") {
    ExperimentConfig cfg2 = cfg;
    cfg2.out_dir = (dir.path / "out_b").string();
    harness::write_outputs(cfg2, harness::run_experiment(cfg2));
    CHECK(slurp(fs::path(cfg.out_dir) / "trials.csv") ==
          slurp(fs::path(cfg2.out_dir) / "trials.csv"));
    CHECK(slurp(fs::path(cfg.out_dir) / "curves.csv") ==
          slurp(fs::path(cfg2.out_dir) / "curves.csv"));
    std::string timings = slurp(fs::path(cfg2.out_dir) / "timings.csv");
    CHECK(timings.find("# lsts-timings-v1") == 0);
    CHECK(timings.find("algo,seed,wall_time_ms") != std::string::npos);
  }

  SUBCASE("the CSV headers carry a format version") {
    CHECK(slurp(fs::path(cfg.out_dir) / "trials.csv").rfind("# lsts-trials-v1\n", 0) == 0);
    CHECK(slurp(fs::path(cfg.out_dir) / "curves.csv").rfind("# lsts-curves-v1\n", 0) == 0);
  }
}

TEST_CASE("CSV readers reject missing files, wrong versions, and torn rows") {
  TempDir dir;
  CHECK_THROWS_AS(harness::read_trials((dir.path / "absent.csv").string()), ConfigError);
  std::string bad_version = dir.file("v.csv", "# other-v9\nalgo\n");
  CHECK_THROWS_AS(harness::read_trials(bad_version), ConfigError);
  std::string bad_cols = dir.file(
      "c.csv", "# lsts-trials-v1\nwrong,columns\n");
  CHECK_THROWS_AS(harness::read_trials(bad_cols), ConfigError);
  std::string torn = dir.file(
      "t.csv",
      "# lsts-trials-v1\n"
      "algo,seed,total_interactions,converged,final_success_rate,learned_path\n"
      "lsts,1,100\n");
  CHECK_THROWS_AS(harness::read_trials(torn), ConfigError);
  std::string bad_num = dir.file(
      "n.csv",
      "# lsts-curves-v1\n"
      "algo,seed,interaction_stamp,edge_or_composed,success_rate\n"
      "lsts,1,abc,composed,0.5\n");
  CHECK_THROWS_AS(harness::read_curves(bad_num), ConfigError);
}

TEST_CASE("algorithm dispatch covers every runner name and rejects strangers") {
  grid::DoorKeyEnv env(grid::parse_layout(kTinyDoorKey), 200);
  spec::SpecPtr phi = spec::parse_spec("achieve k2");
  graph::AbstractGraph g = graph::compile(phi);
  baselines::BaselineParams P;
  P.teacher.step_budget = 40;
  for (const char* algo : {"lsts", "lsts_ct", "lfs", "gsrs", "qrm", "dirl", "dirl_c", "tscl"}) {
    teacher::RunResult rr = harness::dispatch_run(algo, g, env, phi, P, 2000, 1);
    CHECK(rr.final_success_rate >= 0.0);
    CHECK(rr.final_success_rate <= 1.0);
  }
  CHECK_THROWS_AS(harness::dispatch_run("sarsa", g, env, phi, P, 2000, 1), ConfigError);
}

TEST_CASE("the comparison report summarizes both algorithms and runs the t test") {
  TempDir dir;
  std::string path = write_config(dir, "\"budget\": 500000");
  ExperimentConfig cfg = harness::load_config(path);

  for (const char* algo : {"lsts", "lsts_ct"}) {
    ExperimentConfig c = cfg;
    c.algo = algo;
    c.seeds = {1, 2, 3};
    c.out_dir = (dir.path / "cmp" / algo).string();
    harness::write_outputs(c, harness::run_experiment(c));
  }

  std::string report =
      harness::compare_report((dir.path / "cmp").string(), "lsts", "lsts_ct", 0.9);
  CHECK(report.find("comparison: lsts vs lsts_ct") != std::string::npos);
  CHECK(report.find("lsts: n=3 converged=3/3") != std::string::npos);
  CHECK(report.find("lsts_ct: n=3 converged=3/3") != std::string::npos);
  CHECK(report.find("time_to_0.90=") != std::string::npos);
  CHECK(report.find("never") == std::string::npos);  // every trial reaches 0.9
  bool has_test = report.find("welch interactions: t=") != std::string::npos;
  bool degenerate = report.find("undefined (both variances zero)") != std::string::npos;
  CHECK((has_test || degenerate));
}
