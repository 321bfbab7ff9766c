#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "lsts/env.hpp"
#include "lsts/graph.hpp"
#include "lsts/student.hpp"

// The Teacher: a nonstationary bandit over active sub-tasks. It samples a
// sub-task, lets the Student train on it for a burst of x interactions,
// scores the burst by its mean return, and promotes a sub-task to "learned"
// once its greedy success rate and burst returns stabilize. Learning a
// sub-task unlocks its successor edges and discards edges made redundant by
// the progress, so later bursts concentrate on one viable path.

namespace lsts::teacher {

struct EmptyActiveSetError : std::runtime_error {
  EmptyActiveSetError() : std::runtime_error("no active sub-task to sample") {}
};

struct InsufficientHistoryError : std::runtime_error {
  InsufficientHistoryError()
      : std::runtime_error("convergence check needs at least two recorded burst returns") {}
};

struct TeacherParams {
  int x = 500;             // base-env interactions per training burst
  double alpha = 0.1;      // recency weight of the teacher value update
  double epsilon = 0.2;    // teacher exploration rate
  double eta = 0.95;       // success rate required for convergence
  double tau = 0.01;       // max |g_t - g_{t-1}| allowed at convergence
  int eval_episodes = 20;  // greedy evaluation window after each burst
  int step_budget = 100;   // per sub-task step cap
  // 0 removes discarded tasks outright; a positive value keeps them
  // sampleable in the exploration branch with this relative weight.
  double soft_discard_bias = 0.0;
  // Student hyperparameters for newly activated edge policies.
  double learning_rate = 0.1;
  double discount = 0.95;
  double student_epsilon = 0.1;
  // Composed-evaluation settings for the final success measurement.
  int compose_episodes = 200;
  // The built-in envs and greedy policies are deterministic, so evaluation
  // episodes repeat exactly; when set, one episode decides the window.
  bool deterministic_eval = true;
};

// Edges are identified by their index in the graph's edge list.
struct TeacherState {
  TeacherParams params;
  std::map<int, double> q;                      // teacher values on at ∪ lt (∪ dt when soft)
  std::set<int> at, lt, dt;                     // active / learned / discarded
  std::map<int, std::vector<double>> recent_g;  // last two burst returns per edge
};

// Epsilon-greedy over the active set: with probability epsilon a uniform
// member, otherwise the argmax of the teacher values (lowest edge index on
// ties). With soft_discard_bias > 0 the exploration branch also draws
// discarded edges at the reduced weight.
int sample_task(const TeacherState& ts, std::mt19937_64& rng);

// q[e] <- alpha * g + (1 - alpha) * q[e]; records g for the stability test.
// Throws graph::UnknownEdgeError when e has no teacher value.
void update_teacher(TeacherState& ts, int edge, double g);

// True iff rate >= eta and the last two burst returns differ by less than
// tau. Throws InsufficientHistoryError with fewer than two recorded returns.
bool check_convergence(const TeacherState& ts, int edge, double rate);

struct CurvePoint {
  int edge = -1;  // -1 marks a composed/full-task measurement
  uint64_t stamp = 0;
  double rate = 0.0;
};

struct RunResult {
  student::PolicyTable table;
  uint64_t total_interactions = 0;  // training + prefix steps
  uint64_t eval_interactions = 0;   // greedy evaluation steps (not budgeted)
  bool converged = false;
  double final_success_rate = 0.0;
  std::vector<int> learned_path_nodes;  // node sequence q0..final when converged
  std::vector<CurvePoint> curves;       // one point per burst (+ composed at the end)
  std::set<int> discarded;
  std::map<int, uint64_t> interactions_per_edge;
  std::map<int, uint64_t> discard_stamp;            // total_interactions at discard time
  std::vector<std::pair<int, uint64_t>> burst_log;  // (edge, total_interactions at burst start)
};

// Shortest path by edge count from `from` to `to` (or to any final when
// to == -1), using only `allowed` edge indices; deterministic lowest-index
// tie-break. Returns the edge index sequence, empty when unreachable.
std::vector<int> shortest_edge_path(const graph::AbstractGraph& g, const std::set<int>& allowed,
                                    int from, int to);

// The main loop: seeds "teacher" and "student" RNG streams from master_seed,
// activates the initial tasks, then repeats sample -> burst -> update ->
// convergence check until an edge into a final node converges (converged =
// true) or total_interactions reaches the budget (converged = false).
RunResult lsts_run(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                   const TeacherParams& params, uint64_t budget, uint64_t master_seed);

// Continuation variant: when a training episode completes its sub-task at a
// non-final node, a follow-on task is sampled from that node's out-edges
// (minus discarded ones) and the same episode keeps going, training the
// follow-on policy; the env resets only on failure or reaching a final node.
// Only the originally sampled task receives the teacher update. On a
// single-edge graph this is step-for-step identical to lsts_run.
RunResult lsts_ct_run(const graph::AbstractGraph& g, env::LabeledMdp& env,
                      const spec::SpecPtr& phi, const TeacherParams& params, uint64_t budget,
                      uint64_t master_seed);

}  // namespace lsts::teacher
