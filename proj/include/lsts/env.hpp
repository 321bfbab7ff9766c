#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsts/graph.hpp"
#include "lsts/spec.hpp"

// Environment core: labeled MDPs expose an opaque 64-bit state key plus a
// bitmask of true atomic propositions; predicates are pre-bound to that mask
// layout so per-step guard checks never touch strings.

namespace lsts::env {

using spec::LabelSet;
using spec::LabelTrace;
using spec::PredPtr;

struct EpisodeOverError : std::runtime_error {
  EpisodeOverError() : std::runtime_error("step() called on a finished episode") {}
};

struct UnknownAtomError : std::runtime_error {
  explicit UnknownAtomError(const std::string& atom)
      : std::runtime_error("predicate atom '" + atom + "' is not produced by this environment") {}
};

enum class StepOutcome { Running, TerminalGoal, TerminalHazard, TerminalTimeout };

struct StepResult {
  uint64_t state = 0;
  uint32_t labels = 0;
  StepOutcome outcome = StepOutcome::Running;
  bool terminal() const { return outcome != StepOutcome::Running; }
};

class LabeledMdp {
 public:
  virtual ~LabeledMdp() = default;
  // Starts a fresh episode; the seed is stored for reproducibility but the
  // built-in gridworlds are deterministic. Returns the initial state key.
  virtual uint64_t reset(uint64_t seed) = 0;
  virtual StepResult step(int action) = 0;  // throws EpisodeOverError after terminal
  virtual uint64_t state_key() const = 0;
  virtual uint32_t labels_mask() const = 0;
  virtual bool terminal() const = 0;
  virtual int action_count() const = 0;
  virtual int max_episode_steps() const = 0;
  virtual const std::vector<std::string>& atoms() const = 0;
  virtual std::unique_ptr<LabeledMdp> clone() const = 0;

  LabelSet labels() const;              // current labels as strings
  LabelSet labels_of(uint32_t mask) const;
};

// A predicate bound to an environment's atom order for mask evaluation.
class BoundPred {
 public:
  BoundPred() = default;
  BoundPred(const PredPtr& pred, const std::vector<std::string>& atoms);  // throws UnknownAtomError
  bool eval(uint32_t mask) const;
  bool valid() const { return !nodes_.empty(); }

 private:
  struct Node {
    spec::Pred::Kind kind;
    uint32_t bit = 0;
    bool negated = false;
    int lhs = -1, rhs = -1;
  };
  std::vector<Node> nodes_;  // root last
  int build(const PredPtr& pred, const std::vector<std::string>& atoms);
  bool eval_node(int idx, uint32_t mask) const;
};

// Deterministic tracker over the abstract DAG: advances when exactly one
// out-edge guard fires; on ties takes the edge with the lowest dst index; on
// none stays put.
class DagTracker {
 public:
  DagTracker(const graph::AbstractGraph& g, const std::vector<std::string>& atoms);
  void reset();
  int feed(uint32_t labels_mask);  // returns the current node after the step
  // The node the tracker would move to from `node` on these labels (no state
  // change); `node` itself when no out-edge guard fires.
  int step_from(int node, uint32_t labels_mask) const;
  int current() const { return current_; }
  bool at_final() const;
  const graph::AbstractGraph& graph() const { return *g_; }

 private:
  const graph::AbstractGraph* g_;
  int current_ = 0;
  std::vector<std::vector<std::pair<int, BoundPred>>> out_;  // node -> (dst, guard)
};

// Terminal sub-task reward: success earns 1 - 0.9 * steps/budget, failure 0.
double subtask_reward(bool success, int steps_taken, int step_budget);

enum class SubTaskStatus { Running, Success, FailedAvoid, FailedTerminal, FailedBudget };

// Wraps a base environment as a reach-avoid episode: succeed when the achieve
// predicate fires, fail when any avoid predicate fires, the base episode ends
// without success, or the step budget runs out. Guards are checked on the
// reset state as well, so a task can succeed after zero steps.
class SubTaskEnv {
 public:
  SubTaskEnv(LabeledMdp& base, const graph::SubTask& task, int step_budget,
             uint64_t* interaction_counter = nullptr);

  // Begins a sub-task episode at the base environment's current state without
  // resetting it (used for prefix handoff and continuation training).
  void begin_segment();
  // Resets the base environment, then begins a segment.
  void reset(uint64_t seed);

  SubTaskStatus status() const { return status_; }
  bool done() const { return status_ != SubTaskStatus::Running; }
  uint64_t state() const { return base_->state_key(); }
  int steps_taken() const { return steps_; }
  int step_budget() const { return budget_; }
  // Reward of the step that just ran (terminal sub-task reward on success).
  struct Step {
    uint64_t state;
    double reward;
    bool done;
  };
  Step step(int action);  // throws EpisodeOverError when done

  LabeledMdp& base() { return *base_; }

 private:
  LabeledMdp* base_;
  BoundPred achieve_;
  std::vector<BoundPred> avoid_;
  int budget_;
  uint64_t* counter_;
  SubTaskStatus status_ = SubTaskStatus::Running;
  int steps_ = 0;

  void evaluate(uint32_t labels, bool base_terminal);
};

// One sub-task episode under `policy` (state -> action). Returns the episode
// return, success flag, steps consumed and the visited label trace (including
// the reset state's labels).
struct EpisodeResult {
  double episode_return = 0.0;
  bool success = false;
  int steps = 0;
  LabelTrace trace;
};

using PolicyFn = std::function<int(uint64_t state, std::mt19937_64& rng)>;

EpisodeResult run_episode(SubTaskEnv& env, const PolicyFn& policy, uint64_t seed,
                          std::mt19937_64& rng, bool collect_trace = false);

}  // namespace lsts::env
