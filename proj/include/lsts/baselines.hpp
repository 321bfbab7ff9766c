#pragma once

#include <cstdint>

#include "lsts/env.hpp"
#include "lsts/graph.hpp"
#include "lsts/teacher.hpp"

// Comparison algorithms sharing the tabular student, the environments, and
// the interaction accounting:
//   lfs     one policy on the full task, reward only on spec satisfaction
//   gsrs    one policy over (state, DAG node) with distance-shaped bonuses
//   qrm     one Q-function per DAG node with counterfactual updates
//   dirl    per-edge policies, fixed interaction budget per edge, min-cost
//           path composition
//   dirl_c  dirl but each edge trains to the teacher's convergence criteria
//   tscl    sub-task teacher with learning-progress sampling, no DAG order,
//           no prefixes, no discarding
// All runners report success as spec satisfaction of the induced label
// traces, measured with the streaming trace acceptor (equivalent to the
// interval semantics) or composed evaluation where an ordered list exists.

namespace lsts::baselines {

using teacher::RunResult;

struct BaselineParams {
  teacher::TeacherParams teacher;    // burst size, step budget, student hyperparameters
  uint64_t per_edge_budget = 50000;  // dirl: interactions per edge, exact
  double shaping_scale = 1.0;        // gsrs: bonus = scale / (1 + distance)
  int slope_window = 10;             // tscl: learning-progress regression window
};

RunResult run_lfs(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                  const BaselineParams& params, uint64_t budget, uint64_t master_seed);

RunResult run_gsrs(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                   const BaselineParams& params, uint64_t budget, uint64_t master_seed);

RunResult run_qrm(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                  const BaselineParams& params, uint64_t budget, uint64_t master_seed);

RunResult run_dirl(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                   const BaselineParams& params, uint64_t budget, uint64_t master_seed);

RunResult run_dirl_c(const graph::AbstractGraph& g, env::LabeledMdp& env,
                     const spec::SpecPtr& phi, const BaselineParams& params, uint64_t budget,
                     uint64_t master_seed);

RunResult run_tscl(const graph::AbstractGraph& g, env::LabeledMdp& env, const spec::SpecPtr& phi,
                   const BaselineParams& params, uint64_t budget, uint64_t master_seed);

}  // namespace lsts::baselines
