#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "lsts/baselines.hpp"
#include "lsts/gridworld.hpp"
#include "lsts/spec.hpp"
#include "lsts/student.hpp"

using namespace lsts;
using baselines::BaselineParams;
using teacher::RunResult;

namespace {

const char* kTinyDoorKey =
    "#####\n"
    "#1.2#\n"
    "#A@E.D#\n"
    "#.LG#\n"
    "#####\n";

const char* kSpecText = "((achieve k1 or achieve k2) ; achieve d ; achieve g) ensuring !l";

struct Fixture {
  grid::DoorKeyEnv env;
  graph::AbstractGraph g;
  spec::SpecPtr phi;
  BaselineParams P;

  Fixture() : env(grid::parse_layout(kTinyDoorKey), 200) {
    phi = spec::parse_spec(kSpecText);
    g = graph::compile(phi);
    P.teacher.step_budget = 40;
  }
};

uint64_t per_edge_sum(const RunResult& rr) {
  uint64_t total = 0;
  for (const auto& [e, n] : rr.interactions_per_edge) total += n;
  return total;
}

bool curves_equal(const RunResult& a, const RunResult& b) {
  if (a.curves.size() != b.curves.size()) return false;
  for (size_t i = 0; i < a.curves.size(); ++i)
    if (a.curves[i].edge != b.curves[i].edge || a.curves[i].stamp != b.curves[i].stamp ||
        a.curves[i].rate != b.curves[i].rate)
      return false;
  return true;
}

}  // namespace

TEST_CASE("single-policy runner trains on satisfaction only and tracks its budget") {
  Fixture f;
  RunResult rr = baselines::run_lfs(f.g, f.env, f.phi, f.P, 20000, 1);
  CHECK(rr.total_interactions == 20000);  // runs truncate exactly at the budget
  CHECK_FALSE(rr.converged);
  CHECK(rr.learned_path_nodes.empty());
  CHECK_FALSE(rr.table.ordered.has_value());
  CHECK(rr.table.by_edge.size() == 1);  // one policy for the whole task
  CHECK(rr.table.by_edge.count(-1) == 1);
  CHECK(rr.eval_interactions > 0);
  CHECK(rr.final_success_rate >= 0.0);
  CHECK(rr.final_success_rate <= 1.0);
  REQUIRE(!rr.curves.empty());
  for (const auto& c : rr.curves) {
    CHECK(c.edge == -1);
    CHECK(c.stamp <= rr.total_interactions);
  }

  RunResult again = baselines::run_lfs(f.g, f.env, f.phi, f.P, 20000, 1);
  CHECK(again.total_interactions == rr.total_interactions);
  CHECK(again.final_success_rate == rr.final_success_rate);
  CHECK(curves_equal(again, rr));
  CHECK(student::save_policy_table(again.table) == student::save_policy_table(rr.table));
}

TEST_CASE("trivially satisfied tasks finish without consuming interactions") {
  Fixture f;
  spec::SpecPtr easy = spec::parse_spec("achieve !k1");  // true at reset
  graph::AbstractGraph eg = graph::compile(easy);
  for (auto* run : {&baselines::run_lfs, &baselines::run_gsrs, &baselines::run_qrm,
                    &baselines::run_tscl}) {
    RunResult rr = (*run)(eg, f.env, easy, f.P, 10000, 1);
    CHECK(rr.total_interactions == 0);
    CHECK(rr.final_success_rate == 1.0);
  }
  RunResult dirl = baselines::run_dirl(eg, f.env, easy, f.P, 10000, 1);
  CHECK(dirl.total_interactions == 0);
  CHECK(dirl.converged);
  CHECK(dirl.final_success_rate == 1.0);
}

TEST_CASE("node-distance shaping learns the small world and respects its scale") {
  Fixture f;
  RunResult rr = baselines::run_gsrs(f.g, f.env, f.phi, f.P, 80000, 1);
  CHECK(rr.final_success_rate == 1.0);  // dense shaping cracks the small world
  CHECK(rr.total_interactions == 80000);

  // Composite state keys carry the DAG node in the high bits; training must
  // have visited non-initial nodes.
  const auto& pi = rr.table.by_edge.at(-1);
  std::set<int> nodes_seen;
  for (const auto& [key, row] : pi.entries()) nodes_seen.insert(static_cast<int>(key >> 32));
  CHECK(nodes_seen.count(0) == 1);
  CHECK(nodes_seen.size() > 1);

  // A zero scale removes every reward, leaving the table at zero.
  BaselineParams flat = f.P;
  flat.shaping_scale = 0.0;
  RunResult zero = baselines::run_gsrs(f.g, f.env, f.phi, flat, 5000, 1);
  for (const auto& [key, row] : zero.table.by_edge.at(-1).entries())
    for (double v : row) CHECK(v == 0.0);
  CHECK(zero.final_success_rate < 1.0);
}

TEST_CASE("per-node q-functions share experience counterfactually") {
  Fixture f;
  RunResult rr = baselines::run_qrm(f.g, f.env, f.phi, f.P, 120000, 1);
  CHECK(rr.table.by_edge.size() == static_cast<size_t>(f.g.node_count));
  CHECK(rr.final_success_rate == 1.0);

  // Even a short run updates every non-final node's table from shared steps.
  RunResult brief = baselines::run_qrm(f.g, f.env, f.phi, f.P, 600, 2);
  for (int u = 0; u < f.g.node_count; ++u) {
    if (f.g.finals.count(u)) {
      CHECK(brief.table.by_edge.at(u).state_count() == 0);
    } else {
      CHECK(brief.table.by_edge.at(u).state_count() > 0);
    }
  }
}

TEST_CASE("fixed-budget decomposition spends exactly its per-edge allowance") {
  Fixture f;
  f.P.per_edge_budget = 20000;
  RunResult rr = baselines::run_dirl(f.g, f.env, f.phi, f.P, 1000000, 1);
  CHECK(rr.converged);
  CHECK(rr.total_interactions == 20000 * f.g.edges.size());
  for (int e = 0; e < static_cast<int>(f.g.edges.size()); ++e) {
    REQUIRE(rr.interactions_per_edge.count(e) == 1);
    CHECK(rr.interactions_per_edge.at(e) == 20000);
  }
  CHECK(rr.final_success_rate == 1.0);  // generous budget masters each edge
  REQUIRE(rr.table.ordered.has_value());
  CHECK(rr.learned_path_nodes.front() == f.g.q0);
  CHECK(f.g.finals.count(rr.learned_path_nodes.back()) == 1);
  REQUIRE(!rr.curves.empty());
  CHECK(rr.curves.back().edge == -1);
  CHECK(rr.curves.back().rate == rr.final_success_rate);

  SUBCASE("an overall budget below the per-edge total aborts without a path") {
    f.P.per_edge_budget = 3000;
    RunResult cut = baselines::run_dirl(f.g, f.env, f.phi, f.P, 4000, 1);
    CHECK_FALSE(cut.converged);
    CHECK(cut.total_interactions == 4000);
    CHECK(cut.final_success_rate == 0.0);
    CHECK_FALSE(cut.table.ordered.has_value());
  }

  SUBCASE("runs are reproducible") {
    RunResult again = baselines::run_dirl(f.g, f.env, f.phi, f.P, 1000000, 1);
    CHECK(again.total_interactions == rr.total_interactions);
    CHECK(again.final_success_rate == rr.final_success_rate);
    CHECK(curves_equal(again, rr));
    CHECK(student::save_policy_table(again.table) == student::save_policy_table(rr.table));
  }
}

TEST_CASE("convergence-gated decomposition trains every edge to the stop rule") {
  Fixture f;
  RunResult rr = baselines::run_dirl_c(f.g, f.env, f.phi, f.P, 1000000, 1);
  CHECK(rr.converged);
  CHECK(rr.final_success_rate == 1.0);
  CHECK(rr.table.converged.size() == f.g.edges.size());  // no discard list exists here
  CHECK(per_edge_sum(rr) == rr.total_interactions);
  for (const auto& [e, n] : rr.interactions_per_edge)
    CHECK(n >= 2 * static_cast<uint64_t>(f.P.teacher.x));  // the stop rule needs history

  SUBCASE("stops mid-way when the budget runs dry") {
    RunResult cut = baselines::run_dirl_c(f.g, f.env, f.phi, f.P, 1500, 1);
    CHECK_FALSE(cut.converged);
    CHECK(cut.final_success_rate == 0.0);
  }
}

TEST_CASE("on one-edge graphs the convergence-gated runner mirrors the teacher loop") {
  Fixture f;
  spec::SpecPtr solo = spec::parse_spec("achieve k2");
  graph::AbstractGraph sg = graph::compile(solo);
  REQUIRE(sg.edges.size() == 1);
  for (uint64_t seed : {1ull, 4ull}) {
    RunResult a = teacher::lsts_run(sg, f.env, solo, f.P.teacher, 100000, seed);
    RunResult b = baselines::run_dirl_c(sg, f.env, solo, f.P, 100000, seed);
    CHECK(a.converged == b.converged);
    CHECK(a.total_interactions == b.total_interactions);
    CHECK(a.eval_interactions == b.eval_interactions);
    CHECK(a.final_success_rate == b.final_success_rate);
    CHECK(a.learned_path_nodes == b.learned_path_nodes);
    CHECK(curves_equal(a, b));
    CHECK(student::save_policy_table(a.table) == student::save_policy_table(b.table));
  }
}

TEST_CASE("progress-driven sampling trains whole sub-tasks without prefixes") {
  Fixture f;
  RunResult rr = baselines::run_tscl(f.g, f.env, f.phi, f.P, 400000, 1);
  // Every burst trains a raw edge task from reset; the log only names edges.
  REQUIRE(!rr.burst_log.empty());
  for (const auto& [e, stamp] : rr.burst_log) {
    CHECK(e >= 0);
    CHECK(e < static_cast<int>(f.g.edges.size()));
    CHECK(stamp <= rr.total_interactions);
  }
  CHECK(per_edge_sum(rr) == rr.total_interactions);
  CHECK(rr.discarded.empty());  // nothing is ever discarded

  if (rr.converged) {
    REQUIRE(rr.table.ordered.has_value());
    // The finish rule demands a complete learned path.
    const auto& path = *rr.table.ordered;
    CHECK(f.g.edges[path.front()].src == f.g.q0);
    CHECK(f.g.finals.count(f.g.edges[path.back()].dst) == 1);
    CHECK(rr.curves.back().edge == -1);
  } else {
    CHECK(rr.total_interactions == 400000);
    CHECK(rr.final_success_rate == 0.0);
  }

  RunResult again = baselines::run_tscl(f.g, f.env, f.phi, f.P, 400000, 1);
  CHECK(again.total_interactions == rr.total_interactions);
  CHECK(again.final_success_rate == rr.final_success_rate);
  CHECK(curves_equal(again, rr));
}

TEST_CASE("an unsatisfiable task exhausts budgets without crashing") {
  Fixture f;
  spec::SpecPtr impossible = spec::parse_spec("achieve k1 & !k1");
  graph::AbstractGraph ig = graph::compile(impossible);
  RunResult lfs = baselines::run_lfs(ig, f.env, impossible, f.P, 3000, 1);
  CHECK(lfs.total_interactions == 3000);
  CHECK(lfs.final_success_rate == 0.0);

  f.P.per_edge_budget = 2000;
  RunResult dirl = baselines::run_dirl(ig, f.env, impossible, f.P, 10000, 1);
  CHECK(dirl.converged);  // budget spent, composition attempted
  CHECK(dirl.total_interactions == 2000);
  CHECK(dirl.final_success_rate == 0.0);
}
