#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsts/env.hpp"
#include "lsts/graph.hpp"

// Tabular RL student: one Q-table per sub-task edge, training bursts of a
// fixed interaction count, greedy prefix execution to reach a sub-task's
// start region, and composed evaluation of an ordered policy list.

namespace lsts::student {

struct MissingOrderedListError : std::runtime_error {
  MissingOrderedListError()
      : std::runtime_error("policy table has no ordered policy list to evaluate") {}
};

struct CheckpointFormatError : std::runtime_error {
  explicit CheckpointFormatError(const std::string& what) : std::runtime_error(what) {}
};

// One-step Q-learning over opaque state keys. Unseen (state, action) pairs
// read as 0. Greedy extraction breaks ties toward the lowest action index;
// epsilon-greedy training breaks argmax ties uniformly at random so a
// zero-initialized table still explores.
class TabularPolicy {
 public:
  static constexpr int kMaxActions = 8;

  double learning_rate = 0.1;
  double discount = 0.95;
  double epsilon = 0.1;

  double q(uint64_t state, int action) const;
  double max_q(uint64_t state, int n_actions) const;
  int greedy_action(uint64_t state, int n_actions) const;
  int act(uint64_t state, int n_actions, std::mt19937_64& rng) const;
  void update(uint64_t state, int action, double reward, uint64_t next_state, bool terminal,
              int n_actions);
  // One-step move toward an externally computed target (used when the
  // bootstrap value lives in a different table).
  void update_toward(uint64_t state, int action, double target);

  size_t state_count() const { return table_.size(); }
  const std::unordered_map<uint64_t, std::array<double, kMaxActions>>& entries() const {
    return table_;
  }
  void set(uint64_t state, int action, double value);

 private:
  std::unordered_map<uint64_t, std::array<double, kMaxActions>> table_;
  const std::array<double, kMaxActions>* row(uint64_t state) const;
};

// Edge-indexed policy dictionary plus the converged subset and, once a run
// finishes, the ordered edge path used for composed evaluation.
struct PolicyTable {
  std::map<int, TabularPolicy> by_edge;
  std::set<int> converged;
  std::optional<std::vector<int>> ordered;  // edge indices forming a q0->finals path
};

// Deterministic greedy policy function over a Q-table.
env::PolicyFn greedy_fn(const TabularPolicy& pi, int n_actions);

// Runs each prefix edge's sub-task greedily from the base env's current
// state (per-edge step cap = step_budget). Returns false as soon as one
// segment ends without success. Steps are added to `counter`; when `counter`
// would pass `counter_limit` the walk stops and, if given, *truncated is set
// (the caller drops the episode instead of counting it as a failure).
bool run_prefix(env::LabeledMdp& base, const graph::AbstractGraph& g, const PolicyTable& table,
                const std::vector<int>& prefix, int step_budget, uint64_t* counter,
                uint64_t counter_limit = UINT64_MAX, bool* truncated = nullptr);

struct BurstResult {
  double g = 0.0;          // mean episodic return over completed episodes
  int episodes = 0;        // completed episodes (prefix failures included)
  int successes = 0;       // sub-task successes among them
  uint64_t steps = 0;      // base-env interactions consumed by the burst
};

// Trains the policy of `edge_index` with one-step Q-learning for (at least) x
// base-env interactions. Each episode resets the base env, executes the
// prefix greedily, then trains on the sub-task; a failed prefix counts as a
// zero-return episode with no updates. The final episode normally runs to
// completion (overrun < step_budget); with truncate_at_x the burst cuts off
// mid-episode at exactly x consumed steps and the partial episode is
// dropped from the return average.
BurstResult train_burst(env::LabeledMdp& base, const graph::AbstractGraph& g, PolicyTable& table,
                        int edge_index, const std::vector<int>& prefix, int x, int step_budget,
                        uint64_t* counter, std::mt19937_64& rng, bool truncate_at_x = false);

// Fraction of greedy episodes (reset, prefix, then the sub-task with
// epsilon = 0) ending in sub-task success. With deterministic_fast_path the
// caller asserts that the base env and the greedy policies are deterministic,
// so a single episode decides the rate exactly.
double success_rate(env::LabeledMdp& base, const graph::AbstractGraph& g,
                    const PolicyTable& table, int edge_index, const std::vector<int>& prefix,
                    int n_episodes, int step_budget, uint64_t* counter,
                    bool deterministic_fast_path = false);

// Executes the ordered policy list: phase i runs edge ordered[i]'s policy
// greedily (per-phase cap step_budget) until the DAG tracker advances; an
// advance to the expected node hands over to the next phase, any other
// advance ends the episode. Returns the fraction of episodes whose raw label
// trace (reset labels included) satisfies the spec, judged by sat_spec alone.
double compose_eval(const PolicyTable& table, env::LabeledMdp& base,
                    const graph::AbstractGraph& g, const spec::SpecPtr& phi, int n_episodes,
                    int step_budget, uint64_t* counter);

// Line-oriented checkpoint ("lsts-policy-v1"): per edge, sorted
// (state, action, q) triples with %.17g values, then the converged set and
// the ordered list. save(load(s)) == s for any saved table.
std::string save_policy_table(const PolicyTable& table);
PolicyTable load_policy_table(const std::string& text);
void save_policy_table_file(const PolicyTable& table, const std::string& path);
PolicyTable load_policy_table_file(const std::string& path);

}  // namespace lsts::student
