#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsts/spec.hpp"

// Compilation of specs into abstract reachability DAGs. Nodes are abstract
// milestones, edges carry the predicate that must fire to traverse them.
// Each edge also records a "safety" predicate: the conjunction of every
// `ensuring` invariant in scope, which governs steps spent idling inside the
// edge's segment. Guards already subsume safety (guard = target & safety), so
// golden structural comparisons only involve guards; the acceptor uses safety
// to reject traces that violate an invariant between transitions.

namespace lsts::graph {

using spec::LabelSet;
using spec::LabelTrace;
using spec::PredPtr;
using spec::SpecPtr;

struct EmptyGraphError : std::runtime_error {
  EmptyGraphError() : std::runtime_error("no path from the initial node to any final node") {}
};

struct UnknownEdgeError : std::runtime_error {
  explicit UnknownEdgeError(int idx)
      : std::runtime_error("unknown edge index " + std::to_string(idx)) {}
};

struct PathExplosionError : std::runtime_error {
  explicit PathExplosionError(size_t cap)
      : std::runtime_error("more than " + std::to_string(cap) + " initial-to-final paths") {}
};

struct GuardedEdge {
  int src = 0;
  int dst = 0;
  PredPtr guard;   // fires the transition
  PredPtr safety;  // null means "true"; must hold while idling in this edge's segment
};

struct AbstractGraph {
  int node_count = 0;
  std::vector<GuardedEdge> edges;  // sorted by (src, dst, guard text)
  int q0 = 0;
  std::set<int> finals;

  std::vector<int> out_edges(int node) const;  // edge indices, ascending
  std::vector<int> in_edges(int node) const;
};

// Compile a spec to its abstract DAG. The result is pruned (every edge lies on
// some q0->finals path), densely numbered in topological order with q0 = 0,
// and deduplicated (structurally identical edges appear once).
AbstractGraph compile(const SpecPtr& spec);

// Keep exactly the nodes/edges on some q0->finals path; renumber densely in
// topological order. Throws EmptyGraphError when nothing survives.
AbstractGraph prune_unreachable(const AbstractGraph& g);

// True iff the trace can drive the DAG from q0 into a final node: at most one
// edge fires per step, an edge may fire only when its guard holds, and every
// idle step inside an edge's segment must satisfy that edge's safety
// predicate. All branch choices are explored.
bool dag_accepts(const AbstractGraph& g, const LabelTrace& trace);

// Streaming form of dag_accepts: feed one label set per step.
class Acceptor {
 public:
  explicit Acceptor(const AbstractGraph& g);
  void reset();
  // Returns accepted() after consuming the step.
  bool feed(const LabelSet& labels);
  bool accepted() const { return accepted_; }

 private:
  const AbstractGraph& g_;
  // Two bits per edge: "pre" (sitting at src, this edge's segment underway)
  // and "post" (sitting at dst, having fired this edge).
  std::vector<uint64_t> state_;
  std::vector<uint64_t> next_;
  bool accepted_ = false;

  void spawn_successors(int edge_idx);
};

// Reach-avoid sub-task for one edge: achieve the guard while none of the
// sibling out-edge guards fire.
struct SubTask {
  int edge_index = -1;
  GuardedEdge edge;
  PredPtr achieve;
  std::vector<PredPtr> avoid;  // guards of the other out-edges of edge.src
};

SubTask subtask_of(const AbstractGraph& g, int edge_index);  // throws UnknownEdgeError

// Sub-tasks for the out-edges of q0.
std::vector<SubTask> initial_tasks(const AbstractGraph& g);

// Sub-tasks for out-edges of `reached` whose indices are not in `discarded`.
std::vector<SubTask> next_tasks(const AbstractGraph& g, int reached,
                                const std::set<int>& discarded);

// Edges made redundant once `p` has been reached: every edge e=(u,v) not in
// `learned`, with u reachable from q0, u neither p nor a descendant of p, and
// either v == p or every v->finals path passing through p.
std::set<int> discarded_edges(const AbstractGraph& g, int p, const std::set<int>& learned);

// All simple q0->finals paths as node sequences, DFS order with ascending
// edge indices. Throws PathExplosionError beyond `cap` paths.
std::vector<std::vector<int>> enumerate_paths(const AbstractGraph& g, size_t cap = 10000);

// Graphviz DOT rendering: node ids, doubled circles for finals, guard text on
// edges.
std::string to_dot(const AbstractGraph& g);

// Line format, one entry per line:
//   EDGE <src> <dst> <guard>
//   FINAL <id>
std::string to_plain(const AbstractGraph& g);

// Shortest edge distance from each node to any final (edge count); -1 when no
// final is reachable.
std::vector<int> distance_to_finals(const AbstractGraph& g);

// Node-set reachability helpers (forward from `from`).
std::vector<char> reachable_from(const AbstractGraph& g, int from);

}  // namespace lsts::graph
