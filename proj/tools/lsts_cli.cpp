// Command-line front end. Links only the shared library's C interface.
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsts/lsts.h"

namespace {

int report_error(lsts_status st) {
  std::fprintf(stderr, "error: %s\n", lsts_last_error());
  return st == LSTS_ERR_CONFIG || st == LSTS_ERR_SYNTAX ? 2 : 1;
}

bool read_text_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_text_file(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << text;
  return bool(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Specification-guided curriculum RL experiments"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run an experiment described by a config file");
  std::string config_path, algo, seeds, out_dir;
  uint64_t budget = 0;
  bool require_convergence = false;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--algo", algo, "Override the configured algorithm");
  run->add_option("--seeds", seeds, "Override seeds, comma-separated");
  run->add_option("--budget", budget, "Override the interaction budget");
  run->add_option("--out", out_dir, "Override the output directory");
  run->add_flag("--require-convergence", require_convergence,
                "Exit with status 3 unless every trial converged");

  CLI::App* cmp = app.add_subcommand("compare", "Compare two algorithms' result directories");
  std::string in_dir, algos;
  double threshold = 0.9;
  cmp->add_option("--in", in_dir, "Directory holding <algo>/trials.csv subdirectories")
      ->required();
  cmp->add_option("--algos", algos, "Two algorithm names, comma-separated")->required();
  cmp->add_option("--threshold", threshold, "Success threshold for time-to-threshold");

  CLI::App* gr = app.add_subcommand("graph", "Compile a spec file into its task DAG");
  std::string spec_path, dot_path, plain_path;
  gr->add_option("--spec", spec_path, "Spec file")->required();
  gr->add_option("--dot", dot_path, "Write Graphviz output here");
  gr->add_option("--plain", plain_path, "Write the line-oriented dump here");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    lsts_config* cfg = nullptr;
    lsts_status st = lsts_config_load(config_path.c_str(), &cfg);
    if (st != LSTS_OK) return report_error(st);
    auto set = [&](const char* key, const std::string& value) {
      if (st == LSTS_OK && !value.empty()) st = lsts_config_set(cfg, key, value.c_str());
    };
    set("algo", algo);
    set("seeds", seeds);
    set("out", out_dir);
    if (st == LSTS_OK && run->count("--budget"))
      st = lsts_config_set(cfg, "budget", std::to_string(budget).c_str());
    if (st != LSTS_OK) {
      lsts_config_free(cfg);
      return report_error(st);
    }
    lsts_trials* trials = nullptr;
    st = lsts_run_experiment(cfg, &trials);
    lsts_config_free(cfg);
    if (st != LSTS_OK) return report_error(st);
    char* summary = nullptr;
    if (lsts_trials_summary(trials, &summary) == LSTS_OK) {
      std::fputs(summary, stdout);
      lsts_string_free(summary);
    }
    int rc = require_convergence && !lsts_trials_all_converged(trials) ? 3 : 0;
    lsts_trials_free(trials);
    return rc;
  }

  if (cmp->parsed()) {
    size_t comma = algos.find(',');
    if (comma == std::string::npos || algos.find(',', comma + 1) != std::string::npos) {
      std::fprintf(stderr, "error: --algos wants exactly two names, e.g. lsts,dirl_c\n");
      return 2;
    }
    std::string a = algos.substr(0, comma), b = algos.substr(comma + 1);
    char* report = nullptr;
    lsts_status st = lsts_compare_dirs(in_dir.c_str(), a.c_str(), b.c_str(), threshold, &report);
    if (st != LSTS_OK) return report_error(st);
    std::fputs(report, stdout);
    lsts_string_free(report);
    return 0;
  }

  // graph
  std::string text;
  if (!read_text_file(spec_path, text)) {
    std::fprintf(stderr, "error: cannot read spec file: %s\n", spec_path.c_str());
    return 2;
  }
  lsts_spec* sp = nullptr;
  lsts_status st = lsts_spec_parse(text.c_str(), &sp);
  if (st != LSTS_OK) return report_error(st);
  lsts_graph* g = nullptr;
  st = lsts_graph_compile(sp, &g);
  lsts_spec_free(sp);
  if (st != LSTS_OK) return report_error(st);

  int rc = 0;
  uint64_t paths = 0;
  lsts_graph_path_count(g, &paths);
  std::printf("nodes=%d edges=%d paths=%llu\n", lsts_graph_node_count(g),
              lsts_graph_edge_count(g), static_cast<unsigned long long>(paths));
  char* dot = nullptr;
  if (!dot_path.empty()) {
    if (lsts_graph_to_dot(g, &dot) != LSTS_OK || !write_text_file(dot_path, dot)) {
      std::fprintf(stderr, "error: cannot write %s\n", dot_path.c_str());
      rc = 1;
    }
    lsts_string_free(dot);
  }
  char* plain = nullptr;
  if (rc == 0 && (lsts_graph_to_plain(g, &plain) == LSTS_OK)) {
    if (!plain_path.empty()) {
      if (!write_text_file(plain_path, plain)) {
        std::fprintf(stderr, "error: cannot write %s\n", plain_path.c_str());
        rc = 1;
      }
    } else if (dot_path.empty()) {
      std::fputs(plain, stdout);
    }
    lsts_string_free(plain);
  }
  lsts_graph_free(g);
  return rc;
}
