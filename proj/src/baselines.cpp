#include "lsts/baselines.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>

#include "lsts/rng.hpp"
#include "lsts/student.hpp"

namespace lsts::baselines {

namespace {

using env::LabeledMdp;
using graph::AbstractGraph;
using student::TabularPolicy;
using teacher::RunResult;
using teacher::TeacherParams;

// Label sets for every possible atom mask, so per-step acceptor feeds avoid
// rebuilding string sets.
std::vector<spec::LabelSet> mask_labels(const LabeledMdp& env) {
  std::vector<spec::LabelSet> out(size_t{1} << env.atoms().size());
  for (uint32_t m = 0; m < out.size(); ++m) out[m] = env.labels_of(m);
  return out;
}

// (state, DAG node) composite for learners that carry the tracker in the
// state. Built-in env keys stay below 2^32.
uint64_t composite_key(uint64_t state, int node) {
  assert(state >> 32 == 0);
  return state | (static_cast<uint64_t>(node) << 32);
}

TabularPolicy& make_policy(student::PolicyTable& table, int key, const TeacherParams& p) {
  TabularPolicy& pi = table.by_edge[key];
  pi.learning_rate = p.learning_rate;
  pi.discount = p.discount;
  pi.epsilon = p.student_epsilon;
  return pi;
}

// Greedy full-task episodes; success = the label trace is accepted by the
// streaming acceptor (equivalent to interval satisfaction of the spec).
// `choose` maps (state key, tracker node) to an action.
double greedy_full_eval(LabeledMdp& env, const AbstractGraph& g,
                        const std::vector<spec::LabelSet>& labels,
                        const std::function<int(uint64_t, int)>& choose, int n_episodes,
                        uint64_t* counter, bool fast_path) {
  graph::Acceptor acc(g);
  env::DagTracker tracker(g, env.atoms());
  int runs = fast_path ? 1 : n_episodes;
  int ok = 0;
  for (int ep = 0; ep < runs; ++ep) {
    env.reset(0);
    acc.reset();
    tracker.reset();
    tracker.feed(env.labels_mask());  // edges may fire on the reset observation
    bool accepted = acc.feed(labels[env.labels_mask()]);
    while (!accepted && !env.terminal()) {
      env::StepResult r = env.step(choose(env.state_key(), tracker.current()));
      if (counter) ++*counter;
      tracker.feed(r.labels);
      accepted = acc.feed(labels[r.labels]);
    }
    if (accepted) ++ok;
  }
  return static_cast<double>(ok) / runs;
}

// Lowest-cost q0->target path over `allowed` edges by summed edge cost
// (relaxation in topological node order; deterministic lowest-index ties).
// target == -1 means any final node.
std::vector<int> min_cost_path(const AbstractGraph& g, const std::vector<double>& cost,
                               const std::set<int>& allowed, int from, int target) {
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.node_count, kInf);
  std::vector<int> parent(g.node_count, -1);
  dist[from] = 0.0;
  for (int u = 0; u < g.node_count; ++u) {
    if (dist[u] == kInf) continue;
    for (int ei : g.out_edges(u)) {
      if (!allowed.count(ei)) continue;
      int v = g.edges[ei].dst;
      if (dist[u] + cost[ei] < dist[v]) {
        dist[v] = dist[u] + cost[ei];
        parent[v] = ei;
      }
    }
  }
  int best = -1;
  if (target == -1) {
    for (int f : g.finals)
      if (dist[f] < kInf && (best == -1 || dist[f] < dist[best])) best = f;
  } else if (dist[target] < kInf) {
    best = target;
  }
  std::vector<int> path;
  if (best < 0) return path;
  for (int n = best; n != from;) {
    path.push_back(parent[n]);
    n = g.edges[parent[n]].src;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void finish_with_path(RunResult& rr, const AbstractGraph& g, LabeledMdp& env,
                      const spec::SpecPtr& phi, const TeacherParams& P,
                      const std::vector<int>& path) {
  rr.table.ordered = path;
  for (int ei : path) rr.table.converged.insert(ei);
  rr.learned_path_nodes.push_back(g.q0);
  for (int ei : path) rr.learned_path_nodes.push_back(g.edges[ei].dst);
  rr.final_success_rate = student::compose_eval(rr.table, env, g, phi, P.compose_episodes,
                                                P.step_budget, &rr.eval_interactions);
  rr.curves.push_back({-1, rr.total_interactions, rr.final_success_rate});
}

}  // namespace

RunResult run_lfs(const AbstractGraph& g, LabeledMdp& env, const spec::SpecPtr& phi,
                  const BaselineParams& params, uint64_t budget, uint64_t master_seed) {
  (void)phi;
  const TeacherParams& P = params.teacher;
  RunResult rr;
  std::mt19937_64 student_rng = derive_stream(master_seed, "student");
  TabularPolicy& pi = make_policy(rr.table, -1, P);
  std::vector<spec::LabelSet> labels = mask_labels(env);
  graph::Acceptor acc(g);
  int n_actions = env.action_count();
  int K = env.max_episode_steps();
  auto choose = [&pi, n_actions](uint64_t s, int) { return pi.greedy_action(s, n_actions); };
  while (rr.total_interactions < budget) {
    uint64_t burst_start = rr.total_interactions;
    while (rr.total_interactions - burst_start < static_cast<uint64_t>(P.x) &&
           rr.total_interactions < budget) {
      env.reset(0);
      acc.reset();
      bool accepted = acc.feed(labels[env.labels_mask()]);
      int t = 0;
      while (!accepted && !env.terminal() && rr.total_interactions < budget) {
        uint64_t s = env.state_key();
        int a = pi.act(s, n_actions, student_rng);
        env::StepResult r = env.step(a);
        ++rr.total_interactions;
        ++t;
        accepted = acc.feed(labels[r.labels]);
        double reward = accepted ? 1.0 - 0.9 * static_cast<double>(t) / K : 0.0;
        pi.update(s, a, reward, r.state, accepted || r.terminal(), n_actions);
      }
      if (t == 0) break;  // degenerate: satisfied or terminal at reset
    }
    if (rr.total_interactions == burst_start) break;
    double rate = greedy_full_eval(env, g, labels, choose, P.eval_episodes,
                                   &rr.eval_interactions, P.deterministic_eval);
    rr.curves.push_back({-1, rr.total_interactions, rate});
  }
  rr.final_success_rate = greedy_full_eval(env, g, labels, choose, P.compose_episodes,
                                           &rr.eval_interactions, false);
  return rr;
}

RunResult run_gsrs(const AbstractGraph& g, LabeledMdp& env, const spec::SpecPtr& phi,
                   const BaselineParams& params, uint64_t budget, uint64_t master_seed) {
  (void)phi;
  const TeacherParams& P = params.teacher;
  RunResult rr;
  std::mt19937_64 student_rng = derive_stream(master_seed, "student");
  TabularPolicy& pi = make_policy(rr.table, -1, P);
  std::vector<spec::LabelSet> labels = mask_labels(env);
  std::vector<int> dist = graph::distance_to_finals(g);
  env::DagTracker tracker(g, env.atoms());
  int n_actions = env.action_count();
  auto choose = [&pi, n_actions](uint64_t s, int node) {
    return pi.greedy_action(composite_key(s, node), n_actions);
  };
  while (rr.total_interactions < budget) {
    uint64_t burst_start = rr.total_interactions;
    while (rr.total_interactions - burst_start < static_cast<uint64_t>(P.x) &&
           rr.total_interactions < budget) {
      env.reset(0);
      tracker.reset();
      int node = tracker.feed(env.labels_mask());  // reset observation counts
      int t = 0;
      while (!env.terminal() && g.finals.count(node) == 0 &&
             rr.total_interactions < budget) {
        uint64_t cs = composite_key(env.state_key(), node);
        int a = pi.act(cs, n_actions, student_rng);
        env::StepResult r = env.step(a);
        ++rr.total_interactions;
        ++t;
        int next_node = tracker.feed(r.labels);
        double reward =
            next_node != node ? params.shaping_scale / (1.0 + dist[next_node]) : 0.0;
        bool done = r.terminal() || g.finals.count(next_node) > 0;
        pi.update(cs, a, reward, composite_key(r.state, next_node), done, n_actions);
        node = next_node;
      }
      if (t == 0) break;
    }
    if (rr.total_interactions == burst_start) break;
    double rate = greedy_full_eval(env, g, labels, choose, P.eval_episodes,
                                   &rr.eval_interactions, P.deterministic_eval);
    rr.curves.push_back({-1, rr.total_interactions, rate});
  }
  rr.final_success_rate = greedy_full_eval(env, g, labels, choose, P.compose_episodes,
                                           &rr.eval_interactions, false);
  return rr;
}

RunResult run_qrm(const AbstractGraph& g, LabeledMdp& env, const spec::SpecPtr& phi,
                  const BaselineParams& params, uint64_t budget, uint64_t master_seed) {
  (void)phi;
  const TeacherParams& P = params.teacher;
  RunResult rr;
  std::mt19937_64 student_rng = derive_stream(master_seed, "student");
  // One Q-function per DAG node, stored under the node id.
  for (int u = 0; u < g.node_count; ++u) make_policy(rr.table, u, P);
  std::vector<spec::LabelSet> labels = mask_labels(env);
  env::DagTracker tracker(g, env.atoms());
  int n_actions = env.action_count();
  auto pol = [&rr](int node) -> TabularPolicy& { return rr.table.by_edge.at(node); };
  auto choose = [&pol, n_actions](uint64_t s, int node) {
    return pol(node).greedy_action(s, n_actions);
  };
  while (rr.total_interactions < budget) {
    uint64_t burst_start = rr.total_interactions;
    while (rr.total_interactions - burst_start < static_cast<uint64_t>(P.x) &&
           rr.total_interactions < budget) {
      env.reset(0);
      tracker.reset();
      int node = tracker.feed(env.labels_mask());  // reset observation counts
      int t = 0;
      while (!env.terminal() && g.finals.count(node) == 0 &&
             rr.total_interactions < budget) {
        uint64_t s = env.state_key();
        int a = pol(node).act(s, n_actions, student_rng);
        env::StepResult r = env.step(a);
        ++rr.total_interactions;
        ++t;
        // Counterfactual sharing: the same experience updates every node's
        // Q-function with that node's own transition reward and bootstrap.
        for (int u = 0; u < g.node_count; ++u) {
          if (g.finals.count(u)) continue;
          int u2 = tracker.step_from(u, r.labels);
          double ru = u2 != u ? 1.0 : 0.0;
          bool done = r.terminal() || g.finals.count(u2) > 0;
          double target = ru + (done ? 0.0 : pol(u).discount * pol(u2).max_q(r.state, n_actions));
          pol(u).update_toward(s, a, target);
        }
        node = tracker.feed(r.labels);
      }
      if (t == 0) break;
    }
    if (rr.total_interactions == burst_start) break;
    double rate = greedy_full_eval(env, g, labels, choose, P.eval_episodes,
                                   &rr.eval_interactions, P.deterministic_eval);
    rr.curves.push_back({-1, rr.total_interactions, rate});
  }
  rr.final_success_rate = greedy_full_eval(env, g, labels, choose, P.compose_episodes,
                                           &rr.eval_interactions, false);
  return rr;
}

RunResult run_dirl(const AbstractGraph& g, LabeledMdp& env, const spec::SpecPtr& phi,
                   const BaselineParams& params, uint64_t budget, uint64_t master_seed) {
  const TeacherParams& P = params.teacher;
  RunResult rr;
  std::mt19937_64 student_rng = derive_stream(master_seed, "student");
  std::vector<double> cost(g.edges.size(), 1.0);
  std::set<int> trained;
  bool complete = true;
  // Edge indices ascend with src, and node ids are topological, so index
  // order processes every edge after all edges into its source.
  for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
    if (rr.total_interactions >= budget) {
      complete = false;
      break;
    }
    make_policy(rr.table, e, P);
    std::vector<int> prefix = min_cost_path(g, cost, trained, g.q0, g.edges[e].src);
    uint64_t edge_start = rr.total_interactions;
    double last_rate = 0.0;
    while (rr.total_interactions - edge_start < params.per_edge_budget) {
      if (rr.total_interactions >= budget) {
        complete = false;
        break;
      }
      uint64_t remaining = params.per_edge_budget - (rr.total_interactions - edge_start);
      remaining = std::min(remaining, budget - rr.total_interactions);
      int xi = static_cast<int>(std::min<uint64_t>(P.x, remaining));
      student::BurstResult b = student::train_burst(env, g, rr.table, e, prefix, xi,
                                                    P.step_budget, &rr.total_interactions,
                                                    student_rng, /*truncate_at_x=*/true);
      last_rate = student::success_rate(env, g, rr.table, e, prefix, P.eval_episodes,
                                        P.step_budget, &rr.eval_interactions,
                                        P.deterministic_eval);
      rr.curves.push_back({e, rr.total_interactions, last_rate});
      if (b.steps == 0) break;  // degenerate zero-step sub-task
    }
    rr.interactions_per_edge[e] = rr.total_interactions - edge_start;
    cost[e] = 1.0 - last_rate;
    trained.insert(e);
    if (!complete) break;
  }
  rr.converged = complete;
  if (complete)
    finish_with_path(rr, g, env, phi, P, min_cost_path(g, cost, trained, g.q0, -1));
  return rr;
}

RunResult run_dirl_c(const AbstractGraph& g, LabeledMdp& env, const spec::SpecPtr& phi,
                     const BaselineParams& params, uint64_t budget, uint64_t master_seed) {
  const TeacherParams& P = params.teacher;
  RunResult rr;
  std::mt19937_64 student_rng = derive_stream(master_seed, "student");
  std::vector<double> cost(g.edges.size(), 1.0);
  std::set<int> trained;
  bool complete = true;
  for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
    if (rr.total_interactions >= budget) {
      complete = false;
      break;
    }
    make_policy(rr.table, e, P);
    std::vector<int> prefix = min_cost_path(g, cost, trained, g.q0, g.edges[e].src);
    uint64_t edge_start = rr.total_interactions;
    // The per-edge stopping rule is the teacher's convergence criterion.
    teacher::TeacherState ts;
    ts.params = P;
    ts.at.insert(e);
    ts.q[e] = 0.0;
    double last_rate = 0.0;
    bool edge_converged = false;
    while (!edge_converged) {
      if (rr.total_interactions >= budget) {
        complete = false;
        break;
      }
      // Away from the budget boundary bursts finish their last episode; the
      // final burst truncates so the run consumes exactly `budget`.
      uint64_t room = budget - rr.total_interactions;
      bool cut = room < static_cast<uint64_t>(P.x) + env.max_episode_steps() + 1;
      int xi = static_cast<int>(std::min<uint64_t>(P.x, room));
      student::BurstResult b = student::train_burst(env, g, rr.table, e, prefix, xi,
                                                    P.step_budget, &rr.total_interactions,
                                                    student_rng, /*truncate_at_x=*/cut);
      teacher::update_teacher(ts, e, b.g);
      last_rate = student::success_rate(env, g, rr.table, e, prefix, P.eval_episodes,
                                        P.step_budget, &rr.eval_interactions,
                                        P.deterministic_eval);
      rr.curves.push_back({e, rr.total_interactions, last_rate});
      if (ts.recent_g[e].size() >= 2 && teacher::check_convergence(ts, e, last_rate))
        edge_converged = true;
    }
    rr.interactions_per_edge[e] = rr.total_interactions - edge_start;
    if (!complete) break;
    cost[e] = 1.0 - last_rate;
    trained.insert(e);
    rr.table.converged.insert(e);
  }
  rr.converged = complete;
  if (complete)
    finish_with_path(rr, g, env, phi, P, min_cost_path(g, cost, trained, g.q0, -1));
  return rr;
}

RunResult run_tscl(const AbstractGraph& g, LabeledMdp& env, const spec::SpecPtr& phi,
                   const BaselineParams& params, uint64_t budget, uint64_t master_seed) {
  const TeacherParams& P = params.teacher;
  RunResult rr;
  std::mt19937_64 teacher_rng = derive_stream(master_seed, "teacher");
  std::mt19937_64 student_rng = derive_stream(master_seed, "student");
  teacher::TeacherState ts;
  ts.params = P;
  std::map<int, std::vector<double>> g_hist;
  for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
    ts.at.insert(e);
    ts.q[e] = 0.0;
    make_policy(rr.table, e, P);
  }
  // Learning-progress value: absolute least-squares slope of recent returns.
  auto slope_value = [&](int e) {
    const std::vector<double>& h = g_hist[e];
    size_t k = h.size();
    if (k < 2) return 0.0;
    double mean_i = (k - 1) / 2.0;
    double mean_g = 0.0;
    for (double v : h) mean_g += v;
    mean_g /= k;
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < k; ++i) {
      num += (i - mean_i) * (h[i] - mean_g);
      den += (i - mean_i) * (i - mean_i);
    }
    return std::abs(num / den);
  };
  auto sample = [&]() {
    if (rand_u01(teacher_rng) < P.epsilon) {
      auto it = ts.at.begin();
      std::advance(it, rand_below(teacher_rng, static_cast<int>(ts.at.size())));
      return *it;
    }
    int best = -1;
    double best_v = 0.0;
    for (int e : ts.at) {
      double v = slope_value(e);
      if (best < 0 || v > best_v) {
        best = e;
        best_v = v;
      }
    }
    return best;
  };
  const std::vector<int> no_prefix;
  while (rr.total_interactions < budget && !ts.at.empty() && !rr.converged) {
    int e = sample();
    rr.burst_log.emplace_back(e, rr.total_interactions);
    uint64_t before = rr.total_interactions;
    uint64_t room = budget - rr.total_interactions;
    bool cut = room < static_cast<uint64_t>(P.x) + env.max_episode_steps() + 1;
    int xi = static_cast<int>(std::min<uint64_t>(P.x, room));
    student::BurstResult b = student::train_burst(env, g, rr.table, e, no_prefix, xi,
                                                  P.step_budget, &rr.total_interactions,
                                                  student_rng, /*truncate_at_x=*/cut);
    rr.interactions_per_edge[e] += rr.total_interactions - before;
    teacher::update_teacher(ts, e, b.g);
    std::vector<double>& h = g_hist[e];
    h.push_back(b.g);
    if (static_cast<int>(h.size()) > params.slope_window) h.erase(h.begin());
    double rate = student::success_rate(env, g, rr.table, e, no_prefix, P.eval_episodes,
                                        P.step_budget, &rr.eval_interactions,
                                        P.deterministic_eval);
    rr.curves.push_back({e, rr.total_interactions, rate});
    if (ts.recent_g[e].size() < 2 || !teacher::check_convergence(ts, e, rate)) continue;
    ts.at.erase(e);
    ts.lt.insert(e);
    rr.table.converged.insert(e);
    std::vector<int> path = teacher::shortest_edge_path(g, ts.lt, g.q0, -1);
    if (!path.empty()) {
      rr.converged = true;
      finish_with_path(rr, g, env, phi, P, path);
    }
  }
  return rr;
}

}  // namespace lsts::baselines
