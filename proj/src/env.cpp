#include "lsts/env.hpp"

#include <algorithm>
#include <cassert>

namespace lsts::env {

LabelSet LabeledMdp::labels() const { return labels_of(labels_mask()); }

LabelSet LabeledMdp::labels_of(uint32_t mask) const {
  LabelSet out;
  const std::vector<std::string>& names = atoms();
  for (size_t i = 0; i < names.size(); ++i)
    if (mask & (1u << i)) out.insert(names[i]);
  return out;
}

BoundPred::BoundPred(const PredPtr& pred, const std::vector<std::string>& atoms) {
  build(pred, atoms);
}

int BoundPred::build(const PredPtr& pred, const std::vector<std::string>& atoms) {
  Node n;
  n.kind = pred->kind;
  if (pred->kind == spec::Pred::Kind::Literal) {
    auto it = std::find(atoms.begin(), atoms.end(), pred->atom);
    if (it == atoms.end()) throw UnknownAtomError(pred->atom);
    n.bit = 1u << (it - atoms.begin());
    n.negated = pred->negated;
  } else {
    n.lhs = build(pred->lhs, atoms);
    n.rhs = build(pred->rhs, atoms);
  }
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

bool BoundPred::eval_node(int idx, uint32_t mask) const {
  const Node& n = nodes_[idx];
  switch (n.kind) {
    case spec::Pred::Kind::Literal: {
      bool present = (mask & n.bit) != 0;
      return n.negated ? !present : present;
    }
    case spec::Pred::Kind::And:
      return eval_node(n.lhs, mask) && eval_node(n.rhs, mask);
    case spec::Pred::Kind::Or:
      return eval_node(n.lhs, mask) || eval_node(n.rhs, mask);
  }
  return false;
}

bool BoundPred::eval(uint32_t mask) const {
  assert(!nodes_.empty());
  return eval_node(static_cast<int>(nodes_.size()) - 1, mask);
}

DagTracker::DagTracker(const graph::AbstractGraph& g, const std::vector<std::string>& atoms)
    : g_(&g), out_(g.node_count) {
  for (const graph::GuardedEdge& e : g.edges)
    out_[e.src].emplace_back(e.dst, BoundPred(e.guard, atoms));
  // Lowest dst first so ties resolve deterministically.
  for (auto& lst : out_)
    std::stable_sort(lst.begin(), lst.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  reset();
}

void DagTracker::reset() { current_ = g_->q0; }

int DagTracker::step_from(int node, uint32_t labels_mask) const {
  for (const auto& [dst, guard] : out_[node])
    if (guard.eval(labels_mask)) return dst;
  return node;
}

int DagTracker::feed(uint32_t labels_mask) {
  current_ = step_from(current_, labels_mask);
  return current_;
}

bool DagTracker::at_final() const { return g_->finals.count(current_) > 0; }

double subtask_reward(bool success, int steps_taken, int step_budget) {
  if (!success) return 0.0;
  return 1.0 - 0.9 * static_cast<double>(steps_taken) / static_cast<double>(step_budget);
}

SubTaskEnv::SubTaskEnv(LabeledMdp& base, const graph::SubTask& task, int step_budget,
                       uint64_t* interaction_counter)
    : base_(&base),
      achieve_(task.achieve, base.atoms()),
      budget_(step_budget),
      counter_(interaction_counter) {
  for (const PredPtr& p : task.avoid) avoid_.emplace_back(p, base.atoms());
}

void SubTaskEnv::begin_segment() {
  status_ = SubTaskStatus::Running;
  steps_ = 0;
  evaluate(base_->labels_mask(), base_->terminal());
}

void SubTaskEnv::reset(uint64_t seed) {
  base_->reset(seed);
  begin_segment();
}

void SubTaskEnv::evaluate(uint32_t labels, bool base_terminal) {
  // Success is checked first: reaching the target on a terminal step (for
  // example stepping onto the goal) still counts.
  if (achieve_.eval(labels)) {
    status_ = SubTaskStatus::Success;
    return;
  }
  for (const BoundPred& a : avoid_)
    if (a.eval(labels)) {
      status_ = SubTaskStatus::FailedAvoid;
      return;
    }
  if (base_terminal) {
    status_ = SubTaskStatus::FailedTerminal;
    return;
  }
  if (steps_ >= budget_) status_ = SubTaskStatus::FailedBudget;
}

SubTaskEnv::Step SubTaskEnv::step(int action) {
  if (done()) throw EpisodeOverError();
  StepResult r = base_->step(action);
  ++steps_;
  if (counter_) ++*counter_;
  evaluate(r.labels, r.terminal());
  double reward =
      status_ == SubTaskStatus::Success ? subtask_reward(true, steps_, budget_) : 0.0;
  return {r.state, reward, done()};
}

EpisodeResult run_episode(SubTaskEnv& env, const PolicyFn& policy, uint64_t seed,
                          std::mt19937_64& rng, bool collect_trace) {
  EpisodeResult out;
  env.reset(seed);
  if (collect_trace) out.trace.push_back(env.base().labels());
  if (env.done() && env.status() == SubTaskStatus::Success)
    out.episode_return = subtask_reward(true, 0, env.step_budget());
  while (!env.done()) {
    int action = policy(env.state(), rng);
    SubTaskEnv::Step s = env.step(action);
    out.episode_return += s.reward;
    ++out.steps;
    if (collect_trace) out.trace.push_back(env.base().labels_of(env.base().labels_mask()));
  }
  out.success = env.status() == SubTaskStatus::Success;
  return out;
}

}  // namespace lsts::env
