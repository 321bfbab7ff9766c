#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lsts/graph.hpp"
#include "lsts/spec.hpp"
#include "oracles.hpp"

using namespace lsts;
using graph::AbstractGraph;

namespace {

const char* kDoorKeySpec = "((achieve k1 or achieve k2) ; achieve d ; achieve g) ensuring !l";

AbstractGraph compile_text(const std::string& text) {
  return graph::compile(spec::parse_spec(text));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("two-key door spec compiles to the exact golden graph") {
  AbstractGraph g = compile_text(kDoorKeySpec);
  CHECK(g.node_count == 5);
  CHECK(g.q0 == 0);
  CHECK(g.finals == std::set<int>{4});
  CHECK(graph::to_plain(g) ==
        "EDGE 0 1 !l & k1\n"
        "EDGE 0 2 !l & k2\n"
        "EDGE 1 3 !l & d\n"
        "EDGE 2 3 !l & d\n"
        "EDGE 3 4 !l & g\n"
        "FINAL 4\n");
  for (const auto& e : g.edges) {
    REQUIRE(e.safety != nullptr);
    CHECK(spec::print_pred(e.safety) == "!l");
  }
}

TEST_CASE("compiled graphs are pruned, deduplicated and topologically numbered") {
  std::mt19937_64 rng(42);
  const std::vector<std::string> atoms = {"a", "b", "c"};
  for (int it = 0; it < 200; ++it) {
    spec::SpecPtr s = oracles::random_spec(rng, atoms, 3);
    AbstractGraph g = graph::compile(s);
    CHECK(g.q0 == 0);
    CHECK(!g.finals.empty());
    std::set<std::string> seen;
    for (const auto& e : g.edges) {
      CHECK(e.src < e.dst);  // node ids ascend along every edge
      CHECK(e.dst < g.node_count);
      std::string key = std::to_string(e.src) + ">" + std::to_string(e.dst) + ">" +
                        spec::print_pred(e.guard);
      CHECK(seen.insert(std::move(key)).second);  // no duplicate edges
    }
    // Every node and edge lies on some initial-to-final path.
    auto paths = oracles::all_paths(g);
    REQUIRE(!paths.empty());
    std::set<int> on_path_nodes;
    std::set<std::pair<int, int>> on_path_edges;
    for (const auto& p : paths) {
      for (size_t i = 0; i < p.size(); ++i) {
        on_path_nodes.insert(p[i]);
        if (i + 1 < p.size()) on_path_edges.emplace(p[i], p[i + 1]);
      }
    }
    CHECK(static_cast<int>(on_path_nodes.size()) == g.node_count);
    for (const auto& e : g.edges) {
      CHECK(on_path_edges.count({e.src, e.dst}) == 1);
    }
  }
}

TEST_CASE("acceptance of a compiled graph matches trace satisfaction of its spec") {
  std::mt19937_64 rng(99);
  const std::vector<std::string> atoms = {"a", "b", "c"};
  int accepted = 0, total = 0;
  for (int it = 0; it < 250; ++it) {
    spec::SpecPtr s = oracles::random_spec(rng, atoms, 3);
    AbstractGraph g = graph::compile(s);
    graph::Acceptor acc(g);
    for (int k = 0; k < 4; ++k) {
      spec::LabelTrace t = oracles::random_trace(rng, atoms, oracles::rand_int(rng, 1, 6));
      const bool want = spec::sat_spec(s, t);
      CHECK(graph::dag_accepts(g, t) == want);

      acc.reset();
      bool streamed = false;
      for (const auto& step : t) streamed = acc.feed(step);
      CHECK(streamed == want);
      CHECK(acc.accepted() == want);
      accepted += want ? 1 : 0;
      ++total;
    }
  }
  CHECK(accepted > total / 10);
  CHECK(accepted < total * 9 / 10);
}

TEST_CASE("acceptor enforces edge safety while idling and latches on success") {
  AbstractGraph g = compile_text("achieve g ensuring !l");
  CHECK_FALSE(graph::dag_accepts(g, {{"l"}, {"g"}}));  // idle step breaks the invariant
  CHECK(graph::dag_accepts(g, {{}, {"g"}}));

  graph::Acceptor acc(g);
  CHECK_FALSE(acc.feed({}));
  CHECK(acc.feed({"g"}));
  CHECK(acc.feed({"l"}));  // stays accepted after the fact
  acc.reset();
  CHECK_FALSE(acc.accepted());
  CHECK_FALSE(acc.feed({"l"}));
  CHECK_FALSE(acc.feed({"g"}));
}

TEST_CASE("redundant-edge detection on the golden graph") {
  AbstractGraph g = compile_text(kDoorKeySpec);
  // Edge indices in sorted order: 0:(0,1) 1:(0,2) 2:(1,3) 3:(2,3) 4:(3,4).
  CHECK(graph::discarded_edges(g, 3, {1, 3}) == std::set<int>{0, 2});
  CHECK(graph::discarded_edges(g, 4, {1, 3, 4}) == std::set<int>{0, 2});
  CHECK(graph::discarded_edges(g, 1, {0}) == std::set<int>{});
  CHECK(graph::discarded_edges(g, 0, {}) == std::set<int>{});
}

TEST_CASE("redundant-edge detection matches the path-subsumption oracle") {
  std::mt19937_64 rng(20260825);
  for (int it = 0; it < 200; ++it) {
    AbstractGraph g = oracles::random_pruned_dag(rng, 8);
    const int p = oracles::rand_int(rng, 0, g.node_count - 1);
    std::set<int> learned;
    for (size_t e = 0; e < g.edges.size(); ++e) {
      if (oracles::rand_int(rng, 0, 2) == 0) learned.insert(static_cast<int>(e));
    }
    CHECK(graph::discarded_edges(g, p, learned) == oracles::discarded_oracle(g, p, learned));
  }
}

TEST_CASE("path enumeration is exhaustive, ordered and capped") {
  AbstractGraph g = compile_text(kDoorKeySpec);
  auto paths = graph::enumerate_paths(g);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0] == std::vector<int>{0, 1, 3, 4});
  CHECK(paths[1] == std::vector<int>{0, 2, 3, 4});
  CHECK_THROWS_AS(graph::enumerate_paths(g, 1), graph::PathExplosionError);

  std::mt19937_64 rng(5);
  for (int it = 0; it < 50; ++it) {
    AbstractGraph r = oracles::random_pruned_dag(rng, 8);
    auto got = graph::enumerate_paths(r);
    auto want = oracles::all_paths(r);
    std::sort(want.begin(), want.end());
    auto sorted = got;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == want);
  }
}

TEST_CASE("pruning keeps exactly the initial-to-final core") {
  AbstractGraph g;
  g.node_count = 5;
  g.q0 = 0;
  g.finals = {3};
  auto edge = [](int s, int d) {
    graph::GuardedEdge e;
    e.src = s;
    e.dst = d;
    e.guard = spec::make_lit("a");
    return e;
  };
  g.edges = {edge(0, 1), edge(0, 2), edge(1, 3), edge(2, 4)};  // 2->4 dead-ends
  AbstractGraph p = graph::prune_unreachable(g);
  CHECK(p.node_count == 3);
  CHECK(p.finals == std::set<int>{2});
  REQUIRE(p.edges.size() == 2);
  CHECK(p.edges[0].src == 0);
  CHECK(p.edges[0].dst == 1);
  CHECK(p.edges[1].src == 1);
  CHECK(p.edges[1].dst == 2);

  AbstractGraph dead = g;
  dead.finals = {4};
  dead.edges = {edge(0, 1), edge(2, 4)};  // final only reachable from node 2
  CHECK_THROWS_AS(graph::prune_unreachable(dead), graph::EmptyGraphError);
}

TEST_CASE("node distances and reachability") {
  AbstractGraph g = compile_text(kDoorKeySpec);
  CHECK(graph::distance_to_finals(g) == std::vector<int>{3, 2, 2, 1, 0});
  CHECK(graph::reachable_from(g, 1) == std::vector<char>{0, 1, 0, 1, 1});
  CHECK(graph::reachable_from(g, 0) == std::vector<char>{1, 1, 1, 1, 1});

  AbstractGraph lop;
  lop.node_count = 3;
  lop.q0 = 0;
  lop.finals = {1};
  graph::GuardedEdge e;
  e.src = 0;
  e.dst = 1;
  e.guard = spec::make_lit("a");
  lop.edges = {e};
  lop.node_count = 2;
  CHECK(graph::distance_to_finals(lop) == std::vector<int>{1, 0});
}

TEST_CASE("sub-tasks pair an edge guard with its sibling guards to avoid") {
  AbstractGraph g = compile_text(kDoorKeySpec);
  graph::SubTask t0 = graph::subtask_of(g, 0);
  CHECK(t0.edge_index == 0);
  CHECK(spec::print_pred(t0.achieve) == "!l & k1");
  REQUIRE(t0.avoid.size() == 1);
  CHECK(spec::print_pred(t0.avoid[0]) == "!l & k2");

  graph::SubTask t4 = graph::subtask_of(g, 4);
  CHECK(t4.avoid.empty());
  CHECK_THROWS_AS(graph::subtask_of(g, 99), graph::UnknownEdgeError);
  CHECK_THROWS_AS(graph::subtask_of(g, -1), graph::UnknownEdgeError);

  auto init = graph::initial_tasks(g);
  REQUIRE(init.size() == 2);
  CHECK(init[0].edge_index == 0);
  CHECK(init[1].edge_index == 1);

  auto after3 = graph::next_tasks(g, 3, {});
  REQUIRE(after3.size() == 1);
  CHECK(after3[0].edge_index == 4);

  auto skip0 = graph::next_tasks(g, 0, {0});
  REQUIRE(skip0.size() == 1);
  CHECK(skip0[0].edge_index == 1);
}

TEST_CASE("dot rendering marks finals and labels edges with guards") {
  AbstractGraph g = compile_text(kDoorKeySpec);
  std::string dot = graph::to_dot(g);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("doublecircle") != std::string::npos);
  CHECK(dot.find("!l & k1") != std::string::npos);
  CHECK(dot.find("4") != std::string::npos);
}

TEST_CASE("search-and-rescue mission spec compiles to 24 distinct routes") {
  AbstractGraph g = compile_text(read_file(std::string(LSTS_ASSETS_DIR) +
                                           "/specs/search_rescue.spec"));
  CHECK(g.node_count == 67);
  CHECK(g.edges.size() == 66);
  CHECK(graph::enumerate_paths(g).size() == 24);
  CHECK(g.finals.size() == 24);  // one leaf per completion order
}
