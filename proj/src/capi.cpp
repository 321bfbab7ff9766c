#include "lsts/lsts.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "lsts/graph.hpp"
#include "lsts/gridworld.hpp"
#include "lsts/harness.hpp"
#include "lsts/spec.hpp"

using namespace lsts;

struct lsts_spec {
  spec::SpecPtr ptr;
};

struct lsts_graph {
  graph::AbstractGraph g;
};

struct lsts_config {
  harness::ExperimentConfig cfg;
};

struct lsts_trials {
  std::vector<harness::TrialRecord> trials;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

lsts_status fail(lsts_status st, const std::string& msg) {
  g_last_error = msg;
  return st;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

template <typename F>
lsts_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const spec::SyntaxError& e) {
    return fail(LSTS_ERR_SYNTAX, e.what());
  } catch (const spec::EmptyTraceError& e) {
    return fail(LSTS_ERR_INVALID_ARG, e.what());
  } catch (const graph::PathExplosionError& e) {
    return fail(LSTS_ERR_SEMANTIC, e.what());
  } catch (const graph::EmptyGraphError& e) {
    return fail(LSTS_ERR_SEMANTIC, e.what());
  } catch (const grid::InvalidLayoutError& e) {
    return fail(LSTS_ERR_CONFIG, e.what());
  } catch (const harness::ConfigError& e) {
    return fail(LSTS_ERR_CONFIG, e.what());
  } catch (const harness::DegenerateVarianceError& e) {
    return fail(LSTS_ERR_INVALID_ARG, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(LSTS_ERR_INVALID_ARG, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(LSTS_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(LSTS_ERR_INTERNAL, e.what());
  }
}

std::string render_summary(const std::vector<harness::TrialRecord>& trials) {
  std::vector<double> interactions, success;
  int converged = 0;
  std::string algo = trials.empty() ? "" : trials.front().algo;
  std::string out;
  for (const harness::TrialRecord& r : trials) {
    interactions.push_back(static_cast<double>(r.total_interactions));
    success.push_back(r.final_success_rate);
    converged += r.converged ? 1 : 0;
    char line[256];
    std::snprintf(line, sizeof line, "%s seed=%llu interactions=%llu converged=%d rate=%.6f %s\n",
                  r.algo.c_str(), static_cast<unsigned long long>(r.seed),
                  static_cast<unsigned long long>(r.total_interactions), r.converged ? 1 : 0,
                  r.final_success_rate, r.learned_path.c_str());
    out += line;
  }
  harness::Summary si = harness::summarize(interactions);
  harness::Summary sr = harness::summarize(success);
  char line[256];
  std::snprintf(line, sizeof line,
                "%s: n=%d converged=%d/%d interactions=%.1f \xC2\xB1 %.1f success=%.3f \xC2\xB1 %.3f\n",
                algo.c_str(), si.n, converged, si.n, si.mean, si.stddev, sr.mean, sr.stddev);
  out += line;
  return out;
}

}  // namespace

extern "C" {

const char* lsts_last_error(void) { return g_last_error.c_str(); }

void lsts_string_free(char* s) { std::free(s); }

lsts_status lsts_spec_parse(const char* text, lsts_spec** out) {
  if (!text || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* h = new lsts_spec{spec::parse_spec(text)};
    *out = h;
    return LSTS_OK;
  });
}

lsts_status lsts_spec_print(const lsts_spec* sp, char** out) {
  if (!sp || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = dup_string(spec::print_spec(sp->ptr));
    return *out ? LSTS_OK : fail(LSTS_ERR_INTERNAL, "allocation failed");
  });
}

void lsts_spec_free(lsts_spec* sp) { delete sp; }

lsts_status lsts_graph_compile(const lsts_spec* sp, lsts_graph** out) {
  if (!sp || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* h = new lsts_graph{graph::compile(sp->ptr)};
    *out = h;
    return LSTS_OK;
  });
}

int lsts_graph_node_count(const lsts_graph* g) { return g ? g->g.node_count : 0; }

int lsts_graph_edge_count(const lsts_graph* g) {
  return g ? static_cast<int>(g->g.edges.size()) : 0;
}

lsts_status lsts_graph_path_count(const lsts_graph* g, uint64_t* out) {
  if (!g || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    // Node ids ascend topologically, so a single forward pass counts paths.
    std::vector<uint64_t> ways(g->g.node_count, 0);
    ways[g->g.q0] = 1;
    for (const graph::GuardedEdge& e : g->g.edges) ways[e.dst] += ways[e.src];
    uint64_t total = 0;
    for (int f : g->g.finals) total += ways[f];
    *out = total;
    return LSTS_OK;
  });
}

lsts_status lsts_graph_to_dot(const lsts_graph* g, char** out) {
  if (!g || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = dup_string(graph::to_dot(g->g));
    return *out ? LSTS_OK : fail(LSTS_ERR_INTERNAL, "allocation failed");
  });
}

lsts_status lsts_graph_to_plain(const lsts_graph* g, char** out) {
  if (!g || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = dup_string(graph::to_plain(g->g));
    return *out ? LSTS_OK : fail(LSTS_ERR_INTERNAL, "allocation failed");
  });
}

void lsts_graph_free(lsts_graph* g) { delete g; }

lsts_status lsts_config_load(const char* path, lsts_config** out) {
  if (!path || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* h = new lsts_config{harness::load_config(path)};
    *out = h;
    return LSTS_OK;
  });
}

lsts_status lsts_config_set(lsts_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    harness::apply_override(cfg->cfg, key, value);
    return LSTS_OK;
  });
}

void lsts_config_free(lsts_config* cfg) { delete cfg; }

lsts_status lsts_run_experiment(const lsts_config* cfg, lsts_trials** out) {
  if (!cfg || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = nullptr;
  return guarded([&] {
    harness::ExperimentResult res = harness::run_experiment(cfg->cfg);
    harness::write_outputs(cfg->cfg, res);
    auto* h = new lsts_trials{std::move(res.trials), ""};
    h->summary = render_summary(h->trials);
    *out = h;
    return LSTS_OK;
  });
}

int lsts_trials_count(const lsts_trials* t) { return t ? static_cast<int>(t->trials.size()) : 0; }

int lsts_trials_all_converged(const lsts_trials* t) {
  if (!t) return 0;
  for (const harness::TrialRecord& r : t->trials)
    if (!r.converged) return 0;
  return 1;
}

lsts_status lsts_trials_summary(const lsts_trials* t, char** out) {
  if (!t || !out) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out = dup_string(t->summary);
  return *out ? LSTS_OK : fail(LSTS_ERR_INTERNAL, "allocation failed");
}

void lsts_trials_free(lsts_trials* t) { delete t; }

lsts_status lsts_compare_dirs(const char* in_dir, const char* algo_a, const char* algo_b,
                              double threshold, char** out_report) {
  if (!in_dir || !algo_a || !algo_b || !out_report)
    return fail(LSTS_ERR_INVALID_ARG, "null argument");
  *out_report = nullptr;
  return guarded([&] {
    *out_report = dup_string(harness::compare_report(in_dir, algo_a, algo_b, threshold));
    return *out_report ? LSTS_OK : fail(LSTS_ERR_INTERNAL, "allocation failed");
  });
}

lsts_status lsts_welch_t_test(const double* a, size_t na, const double* b, size_t nb,
                              double* out_t, double* out_p) {
  if (!a || !b || !out_t || !out_p) return fail(LSTS_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    harness::WelchResult w =
        harness::welch_t_test(std::vector<double>(a, a + na), std::vector<double>(b, b + nb));
    *out_t = w.t;
    *out_p = w.p;
    return LSTS_OK;
  });
}

}  // extern "C"
