#include "lsts/student.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lsts/rng.hpp"

namespace lsts::student {

const std::array<double, TabularPolicy::kMaxActions>* TabularPolicy::row(uint64_t state) const {
  auto it = table_.find(state);
  return it == table_.end() ? nullptr : &it->second;
}

double TabularPolicy::q(uint64_t state, int action) const {
  const auto* r = row(state);
  return r ? (*r)[action] : 0.0;
}

double TabularPolicy::max_q(uint64_t state, int n_actions) const {
  const auto* r = row(state);
  if (!r) return 0.0;
  double best = (*r)[0];
  for (int a = 1; a < n_actions; ++a) best = std::max(best, (*r)[a]);
  return best;
}

int TabularPolicy::greedy_action(uint64_t state, int n_actions) const {
  const auto* r = row(state);
  if (!r) return 0;
  int best = 0;
  for (int a = 1; a < n_actions; ++a)
    if ((*r)[a] > (*r)[best]) best = a;
  return best;
}

int TabularPolicy::act(uint64_t state, int n_actions, std::mt19937_64& rng) const {
  if (rand_u01(rng) < epsilon) return rand_below(rng, n_actions);
  const auto* r = row(state);
  if (!r) return rand_below(rng, n_actions);
  double best = (*r)[0];
  for (int a = 1; a < n_actions; ++a) best = std::max(best, (*r)[a]);
  int ties[kMaxActions];
  int n_ties = 0;
  for (int a = 0; a < n_actions; ++a)
    if ((*r)[a] == best) ties[n_ties++] = a;
  if (n_ties == 1) return ties[0];
  return ties[rand_below(rng, n_ties)];
}

void TabularPolicy::update(uint64_t state, int action, double reward, uint64_t next_state,
                           bool terminal, int n_actions) {
  double target = reward;
  if (!terminal) {
    const auto* r = row(next_state);
    double best = 0.0;
    if (r)
      for (int a = 0; a < n_actions; ++a) best = std::max(best, (*r)[a]);
    target += discount * best;
  }
  auto& qrow = table_[state];
  qrow[action] += learning_rate * (target - qrow[action]);
}

void TabularPolicy::update_toward(uint64_t state, int action, double target) {
  auto& qrow = table_[state];
  qrow[action] += learning_rate * (target - qrow[action]);
}

void TabularPolicy::set(uint64_t state, int action, double value) {
  table_[state][action] = value;
}

env::PolicyFn greedy_fn(const TabularPolicy& pi, int n_actions) {
  return [&pi, n_actions](uint64_t state, std::mt19937_64&) {
    return pi.greedy_action(state, n_actions);
  };
}

bool run_prefix(env::LabeledMdp& base, const graph::AbstractGraph& g, const PolicyTable& table,
                const std::vector<int>& prefix, int step_budget, uint64_t* counter,
                uint64_t counter_limit, bool* truncated) {
  int n_actions = base.action_count();
  for (int edge : prefix) {
    env::SubTaskEnv seg(base, graph::subtask_of(g, edge), step_budget, counter);
    seg.begin_segment();
    const TabularPolicy& pi = table.by_edge.at(edge);
    while (!seg.done()) {
      if (counter && *counter >= counter_limit) {
        if (truncated) *truncated = true;
        return false;
      }
      seg.step(pi.greedy_action(seg.state(), n_actions));
    }
    if (seg.status() != env::SubTaskStatus::Success) return false;
  }
  return true;
}

BurstResult train_burst(env::LabeledMdp& base, const graph::AbstractGraph& g, PolicyTable& table,
                        int edge_index, const std::vector<int>& prefix, int x, int step_budget,
                        uint64_t* counter, std::mt19937_64& rng, bool truncate_at_x) {
  BurstResult out;
  graph::SubTask task = graph::subtask_of(g, edge_index);
  TabularPolicy& pi = table.by_edge[edge_index];
  int n_actions = base.action_count();
  uint64_t start = *counter;
  uint64_t limit = truncate_at_x ? start + static_cast<uint64_t>(x) : UINT64_MAX;
  auto consumed = [&] { return *counter - start; };
  double total_return = 0.0;
  while (consumed() < static_cast<uint64_t>(x)) {
    const uint64_t episode_start = *counter;
    base.reset(0);
    bool prefix_truncated = false;
    if (!run_prefix(base, g, table, prefix, step_budget, counter, limit, &prefix_truncated)) {
      if (prefix_truncated) break;
      ++out.episodes;  // prefix failure: completed zero-return episode, no updates
      if (*counter == episode_start) break;  // zero-interaction episode: no progress possible
      continue;
    }
    env::SubTaskEnv senv(base, task, step_budget, counter);
    senv.begin_segment();
    double ep_return = senv.done() && senv.status() == env::SubTaskStatus::Success
                           ? env::subtask_reward(true, 0, step_budget)
                           : 0.0;
    bool truncated = false;
    while (!senv.done()) {
      if (truncate_at_x && consumed() >= static_cast<uint64_t>(x)) {
        truncated = true;
        break;
      }
      uint64_t s = senv.state();
      int a = pi.act(s, n_actions, rng);
      env::SubTaskEnv::Step st = senv.step(a);
      pi.update(s, a, st.reward, st.state, st.done, n_actions);
      ep_return += st.reward;
    }
    if (truncated) break;
    ++out.episodes;
    total_return += ep_return;
    if (senv.status() == env::SubTaskStatus::Success) ++out.successes;
    if (*counter == episode_start) break;  // zero-interaction episode: no progress possible
  }
  out.steps = consumed();
  out.g = out.episodes > 0 ? total_return / out.episodes : 0.0;
  return out;
}

double success_rate(env::LabeledMdp& base, const graph::AbstractGraph& g,
                    const PolicyTable& table, int edge_index, const std::vector<int>& prefix,
                    int n_episodes, int step_budget, uint64_t* counter,
                    bool deterministic_fast_path) {
  graph::SubTask task = graph::subtask_of(g, edge_index);
  const TabularPolicy& pi = table.by_edge.at(edge_index);
  int n_actions = base.action_count();
  int runs = deterministic_fast_path ? 1 : n_episodes;
  int successes = 0;
  for (int ep = 0; ep < runs; ++ep) {
    base.reset(0);
    if (!run_prefix(base, g, table, prefix, step_budget, counter)) continue;
    env::SubTaskEnv senv(base, task, step_budget, counter);
    senv.begin_segment();
    while (!senv.done()) senv.step(pi.greedy_action(senv.state(), n_actions));
    if (senv.status() == env::SubTaskStatus::Success) ++successes;
  }
  return static_cast<double>(successes) / runs;
}

double compose_eval(const PolicyTable& table, env::LabeledMdp& base,
                    const graph::AbstractGraph& g, const spec::SpecPtr& phi, int n_episodes,
                    int step_budget, uint64_t* counter) {
  if (!table.ordered) throw MissingOrderedListError();
  const std::vector<int>& path = *table.ordered;
  if (path.empty()) return 0.0;
  env::DagTracker tracker(g, base.atoms());
  int n_actions = base.action_count();
  int satisfied = 0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    base.reset(0);
    tracker.reset();
    spec::LabelTrace trace{base.labels()};
    size_t phase = 0;
    int phase_steps = 0;
    while (phase < path.size() && !base.terminal() && phase_steps < step_budget) {
      const graph::GuardedEdge& e = g.edges[path[phase]];
      const TabularPolicy& pi = table.by_edge.at(path[phase]);
      env::StepResult r = base.step(pi.greedy_action(base.state_key(), n_actions));
      if (counter) ++*counter;
      ++phase_steps;
      trace.push_back(base.labels_of(r.labels));
      int before = tracker.current();
      int now = tracker.feed(r.labels);
      if (now != before) {
        if (now != e.dst) break;  // advanced off the chosen path
        ++phase;
        phase_steps = 0;
      }
    }
    if (spec::sat_spec(phi, trace)) ++satisfied;
  }
  return static_cast<double>(satisfied) / n_episodes;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string save_policy_table(const PolicyTable& table) {
  std::ostringstream out;
  out << "lsts-policy-v1\n";
  for (const auto& [edge, pi] : table.by_edge) {
    out << "edge " << edge << ' ' << fmt_double(pi.learning_rate) << ' '
        << fmt_double(pi.discount) << ' ' << fmt_double(pi.epsilon) << '\n';
    std::vector<std::pair<uint64_t, int>> keys;
    for (const auto& [state, row] : pi.entries())
      for (int a = 0; a < TabularPolicy::kMaxActions; ++a)
        if (row[a] != 0.0) keys.emplace_back(state, a);
    std::sort(keys.begin(), keys.end());
    for (const auto& [state, a] : keys)
      out << state << ' ' << a << ' ' << fmt_double(pi.q(state, a)) << '\n';
  }
  out << "converged";
  for (int e : table.converged) out << ' ' << e;
  out << '\n';
  if (table.ordered) {
    out << "ordered";
    for (int e : *table.ordered) out << ' ' << e;
    out << '\n';
  }
  return out.str();
}

PolicyTable load_policy_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "lsts-policy-v1")
    throw CheckpointFormatError("missing lsts-policy-v1 header");
  PolicyTable table;
  TabularPolicy* current = nullptr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "edge") {
      int idx;
      double lr, disc, eps;
      if (!(ls >> idx >> lr >> disc >> eps))
        throw CheckpointFormatError("malformed edge line: " + line);
      current = &table.by_edge[idx];
      current->learning_rate = lr;
      current->discount = disc;
      current->epsilon = eps;
    } else if (word == "converged") {
      int e;
      while (ls >> e) table.converged.insert(e);
    } else if (word == "ordered") {
      std::vector<int> path;
      int e;
      while (ls >> e) path.push_back(e);
      table.ordered = std::move(path);
    } else {
      if (!current) throw CheckpointFormatError("q-value line before any edge: " + line);
      uint64_t state = 0;
      int action;
      double value;
      std::istringstream row(line);
      if (!(row >> state >> action >> value) || action < 0 ||
          action >= TabularPolicy::kMaxActions)
        throw CheckpointFormatError("malformed q-value line: " + line);
      current->set(state, action, value);
    }
  }
  return table;
}

void save_policy_table_file(const PolicyTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointFormatError("cannot open for writing: " + path);
  out << save_policy_table(table);
}

PolicyTable load_policy_table_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointFormatError("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_policy_table(buf.str());
}

}  // namespace lsts::student
