#include "lsts/teacher.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>

#include "lsts/rng.hpp"

namespace lsts::teacher {

namespace {

double teacher_value(const TeacherState& ts, int edge) {
  auto it = ts.q.find(edge);
  return it == ts.q.end() ? 0.0 : it->second;
}

int argmax_edge(const TeacherState& ts, const std::set<int>& pool) {
  int best = -1;
  double best_q = 0.0;
  for (int e : pool) {
    double v = teacher_value(ts, e);
    if (best < 0 || v > best_q) {
      best = e;
      best_q = v;
    }
  }
  return best;
}

void ensure_policy(student::PolicyTable& table, int edge, const TeacherParams& p) {
  if (table.by_edge.count(edge)) return;
  student::TabularPolicy& pi = table.by_edge[edge];
  pi.learning_rate = p.learning_rate;
  pi.discount = p.discount;
  pi.epsilon = p.student_epsilon;
}

}  // namespace

int sample_task(const TeacherState& ts, std::mt19937_64& rng) {
  bool soft_pool = ts.params.soft_discard_bias > 0.0 && !ts.dt.empty();
  if (ts.at.empty() && !soft_pool) throw EmptyActiveSetError();
  if (rand_u01(rng) < ts.params.epsilon) {
    if (!soft_pool) {
      auto it = ts.at.begin();
      std::advance(it, rand_below(rng, static_cast<int>(ts.at.size())));
      return *it;
    }
    double bias = ts.params.soft_discard_bias;
    double u = rand_u01(rng) * (static_cast<double>(ts.at.size()) + bias * ts.dt.size());
    for (int e : ts.at) {
      if (u < 1.0) return e;
      u -= 1.0;
    }
    for (int e : ts.dt) {
      if (u < bias) return e;
      u -= bias;
    }
    return ts.at.empty() ? *ts.dt.rbegin() : *ts.at.rbegin();
  }
  return argmax_edge(ts, ts.at.empty() ? ts.dt : ts.at);
}

void update_teacher(TeacherState& ts, int edge, double g) {
  auto it = ts.q.find(edge);
  if (it == ts.q.end()) throw graph::UnknownEdgeError(edge);
  it->second = ts.params.alpha * g + (1.0 - ts.params.alpha) * it->second;
  std::vector<double>& hist = ts.recent_g[edge];
  hist.push_back(g);
  if (hist.size() > 2) hist.erase(hist.begin());
}

bool check_convergence(const TeacherState& ts, int edge, double rate) {
  auto it = ts.recent_g.find(edge);
  if (it == ts.recent_g.end() || it->second.size() < 2) throw InsufficientHistoryError();
  const std::vector<double>& h = it->second;
  return rate >= ts.params.eta && std::abs(h[1] - h[0]) < ts.params.tau;
}

std::vector<int> shortest_edge_path(const graph::AbstractGraph& g, const std::set<int>& allowed,
                                    int from, int to) {
  auto is_target = [&](int n) { return to == -1 ? g.finals.count(n) > 0 : n == to; };
  std::vector<int> parent_edge(g.node_count, -1);
  std::vector<char> seen(g.node_count, 0);
  seen[from] = 1;
  int found = is_target(from) ? from : -1;
  std::deque<int> queue{from};
  while (!queue.empty() && found < 0) {
    int u = queue.front();
    queue.pop_front();
    for (int ei : g.out_edges(u)) {
      if (!allowed.count(ei)) continue;
      int v = g.edges[ei].dst;
      if (seen[v]) continue;
      seen[v] = 1;
      parent_edge[v] = ei;
      if (is_target(v)) {
        found = v;
        break;
      }
      queue.push_back(v);
    }
  }
  std::vector<int> path;
  if (found < 0) return path;
  for (int n = found; n != from;) {
    int ei = parent_edge[n];
    path.push_back(ei);
    n = g.edges[ei].src;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

namespace {

// One training phase of a sub-task starting at the base env's current state.
std::pair<env::SubTaskStatus, double> train_phase(env::LabeledMdp& base,
                                                  const graph::SubTask& task,
                                                  student::TabularPolicy& pi, int step_budget,
                                                  uint64_t* counter, std::mt19937_64& rng) {
  env::SubTaskEnv senv(base, task, step_budget, counter);
  senv.begin_segment();
  double ep_return = senv.done() && senv.status() == env::SubTaskStatus::Success
                         ? env::subtask_reward(true, 0, step_budget)
                         : 0.0;
  int n_actions = base.action_count();
  while (!senv.done()) {
    uint64_t s = senv.state();
    int a = pi.act(s, n_actions, rng);
    env::SubTaskEnv::Step st = senv.step(a);
    pi.update(s, a, st.reward, st.state, st.done, n_actions);
    ep_return += st.reward;
  }
  return {senv.status(), ep_return};
}

int sample_followon(const TeacherState& ts, const std::vector<int>& cand,
                    std::mt19937_64& rng) {
  if (cand.size() == 1) return cand[0];
  if (rand_u01(rng) < ts.params.epsilon)
    return cand[rand_below(rng, static_cast<int>(cand.size()))];
  int best = cand[0];
  double best_q = teacher_value(ts, cand[0]);
  for (size_t i = 1; i < cand.size(); ++i) {
    double v = teacher_value(ts, cand[i]);
    if (v > best_q) {
      best = cand[i];
      best_q = v;
    }
  }
  return best;
}

// Continuation burst: after a sub-task success at a non-final node the
// episode keeps going on a freshly sampled follow-on task.
student::BurstResult ct_burst(env::LabeledMdp& base, const graph::AbstractGraph& g,
                              student::PolicyTable& table, TeacherState& ts, int edge_index,
                              const std::vector<int>& prefix, uint64_t* counter,
                              std::mt19937_64& teacher_rng, std::mt19937_64& student_rng,
                              RunResult& rr) {
  const TeacherParams& P = ts.params;
  student::BurstResult out;
  uint64_t start = *counter;
  double total_return = 0.0;
  while (*counter - start < static_cast<uint64_t>(P.x)) {
    base.reset(0);
    uint64_t ep_start = *counter;
    if (!student::run_prefix(base, g, table, prefix, P.step_budget, counter)) {
      rr.interactions_per_edge[edge_index] += *counter - ep_start;
      ++out.episodes;
      if (*counter == ep_start) break;  // zero-interaction episode: no progress possible
      continue;
    }
    auto [status, ep_return] = train_phase(base, graph::subtask_of(g, edge_index),
                                           table.by_edge[edge_index], P.step_budget, counter,
                                           student_rng);
    rr.interactions_per_edge[edge_index] += *counter - ep_start;
    ++out.episodes;
    total_return += ep_return;
    if (status != env::SubTaskStatus::Success) {
      if (*counter == ep_start) break;  // zero-interaction episode: no progress possible
      continue;
    }
    ++out.successes;
    int cur = edge_index;
    while (true) {
      int reached = g.edges[cur].dst;
      if (g.finals.count(reached)) break;  // spec satisfied: reset
      std::vector<int> cand;
      for (int ei : g.out_edges(reached))
        if (!ts.dt.count(ei)) cand.push_back(ei);
      if (cand.empty()) break;
      int follow = sample_followon(ts, cand, teacher_rng);
      ensure_policy(table, follow, P);
      uint64_t phase_start = *counter;
      auto [fstatus, fret] = train_phase(base, graph::subtask_of(g, follow),
                                         table.by_edge[follow], P.step_budget, counter,
                                         student_rng);
      (void)fret;  // only the sampled task's return feeds the teacher
      rr.interactions_per_edge[follow] += *counter - phase_start;
      if (fstatus != env::SubTaskStatus::Success) break;
      cur = follow;
    }
    if (*counter == ep_start) break;  // zero-interaction episode: no progress possible
  }
  out.steps = *counter - start;
  out.g = out.episodes > 0 ? total_return / out.episodes : 0.0;
  return out;
}

RunResult run_impl(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                   const TeacherParams& params, uint64_t budget, uint64_t master_seed,
                   bool continuation) {
  RunResult rr;
  TeacherState ts;
  ts.params = params;
  std::mt19937_64 teacher_rng = derive_stream(master_seed, "teacher");
  std::mt19937_64 student_rng = derive_stream(master_seed, "student");
  student::PolicyTable& table = rr.table;
  bool soft = params.soft_discard_bias > 0.0;

  auto activate = [&](int e) {
    if (ts.at.count(e) || ts.lt.count(e) || ts.dt.count(e)) return;
    ts.at.insert(e);
    ts.q[e] = 0.0;
    ensure_policy(table, e, params);
  };
  for (const graph::SubTask& t : graph::initial_tasks(g)) activate(t.edge_index);

  while (true) {
    if (rr.total_interactions >= budget) break;
    if (ts.at.empty() && !(soft && !ts.dt.empty())) break;
    int e = sample_task(ts, teacher_rng);
    ensure_policy(table, e, params);  // soft mode can sample never-activated edges
    rr.burst_log.emplace_back(e, rr.total_interactions);
    std::vector<int> prefix = shortest_edge_path(g, ts.lt, g.q0, g.edges[e].src);
    double g_t;
    if (continuation) {
      g_t = ct_burst(env, g, table, ts, e, prefix, &rr.total_interactions, teacher_rng,
                     student_rng, rr)
                .g;
    } else {
      uint64_t before = rr.total_interactions;
      g_t = student::train_burst(env, g, table, e, prefix, params.x, params.step_budget,
                                 &rr.total_interactions, student_rng)
                .g;
      rr.interactions_per_edge[e] += rr.total_interactions - before;
    }
    update_teacher(ts, e, g_t);
    double rate = student::success_rate(env, g, table, e, prefix, params.eval_episodes,
                                        params.step_budget, &rr.eval_interactions,
                                        params.deterministic_eval);
    rr.curves.push_back({e, rr.total_interactions, rate});
    if (ts.recent_g[e].size() < 2 || !check_convergence(ts, e, rate)) continue;

    // Promotion: the sub-task is learned.
    ts.at.erase(e);
    ts.dt.erase(e);
    ts.lt.insert(e);
    table.converged.insert(e);
    int p = g.edges[e].dst;
    for (int d : graph::discarded_edges(g, p, ts.lt)) {
      if (!ts.dt.insert(d).second) continue;
      rr.discard_stamp[d] = rr.total_interactions;
      ts.at.erase(d);
      if (soft)
        ts.q.emplace(d, 0.0);
      else
        ts.q.erase(d);
    }
    if (g.finals.count(p)) {
      rr.converged = true;
      break;
    }
    for (const graph::SubTask& t : graph::next_tasks(g, p, ts.dt)) activate(t.edge_index);
  }

  rr.discarded = ts.dt;
  if (rr.converged) {
    std::vector<int> path = shortest_edge_path(g, ts.lt, g.q0, -1);
    assert(!path.empty());
    table.ordered = path;
    rr.learned_path_nodes.push_back(g.q0);
    for (int ei : path) rr.learned_path_nodes.push_back(g.edges[ei].dst);
    rr.final_success_rate = student::compose_eval(table, env, g, phi, params.compose_episodes,
                                                  params.step_budget, &rr.eval_interactions);
    rr.curves.push_back({-1, rr.total_interactions, rr.final_success_rate});
  }
  return rr;
}

}  // namespace

RunResult lsts_run(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                   const TeacherParams& params, uint64_t budget, uint64_t master_seed) {
  return run_impl(g, env, phi, params, budget, master_seed, false);
}

RunResult lsts_ct_run(const graph::AbstractGraph& g, env::LabeledMdp& env,
                      const spec::SpecPtr& phi, const TeacherParams& params, uint64_t budget,
                      uint64_t master_seed) {
  return run_impl(g, env, phi, params, budget, master_seed, true);
}

}  // namespace lsts::teacher
