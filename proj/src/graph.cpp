#include "lsts/graph.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <queue>

namespace lsts::graph {

using spec::Pred;
using spec::Spec;

std::vector<int> AbstractGraph::out_edges(int node) const {
  std::vector<int> out;
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].src == node) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> AbstractGraph::in_edges(int node) const {
  std::vector<int> out;
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].dst == node) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

// Conjoin `inv` onto `p` (null p means "true").
PredPtr conjoin(const PredPtr& inv, const PredPtr& p) {
  if (!p) return inv;
  return spec::make_and(inv, p);
}

bool pred_opt_equal(const PredPtr& a, const PredPtr& b) {
  if (!a && !b) return true;
  if (!a || !b) return false;
  return spec::pred_equal(a, b);
}

// Intermediate fragment during compilation. Node 0 is the fragment's initial
// node and never has incoming edges; finals never include node 0.
struct Frag {
  int n = 0;
  std::vector<GuardedEdge> edges;
  std::set<int> finals;
};

Frag compile_rec(const SpecPtr& s) {
  switch (s->kind) {
    case Spec::Kind::Achieve: {
      Frag f;
      f.n = 2;
      f.edges.push_back({0, 1, s->pred, nullptr});
      f.finals = {1};
      return f;
    }
    case Spec::Kind::Ensuring: {
      Frag f = compile_rec(s->lhs);
      for (GuardedEdge& e : f.edges) {
        e.guard = spec::make_and(s->pred, e.guard);
        e.safety = conjoin(s->pred, e.safety);
      }
      return f;
    }
    case Spec::Kind::Or: {
      Frag a = compile_rec(s->lhs);
      Frag b = compile_rec(s->rhs);
      // Identify the two initial nodes; b's other nodes shift up by a.n - 1.
      Frag f = a;
      auto remap = [&](int v) { return v == 0 ? 0 : a.n + v - 1; };
      for (const GuardedEdge& e : b.edges)
        f.edges.push_back({remap(e.src), remap(e.dst), e.guard, e.safety});
      for (int v : b.finals) f.finals.insert(remap(v));
      f.n = a.n + b.n - 1;
      return f;
    }
    case Spec::Kind::Seq: {
      Frag a = compile_rec(s->lhs);
      Frag b = compile_rec(s->rhs);
      // Identify every final of a with b's initial node: replicate b's
      // initial out-edges from each of a's finals. b's initial node
      // dissolves; its other nodes shift up by a.n - 1.
      Frag f;
      f.n = a.n + b.n - 1;
      f.edges = a.edges;
      auto remap = [&](int v) { return a.n + v - 1; };  // v > 0 only
      for (const GuardedEdge& e : b.edges) {
        if (e.src == 0) {
          for (int fin : a.finals)
            f.edges.push_back({fin, remap(e.dst), e.guard, e.safety});
        } else {
          f.edges.push_back({remap(e.src), remap(e.dst), e.guard, e.safety});
        }
      }
      for (int v : b.finals) f.finals.insert(remap(v));
      return f;
    }
  }
  return {};
}

void dedupe_edges(std::vector<GuardedEdge>& edges) {
  std::vector<GuardedEdge> kept;
  for (const GuardedEdge& e : edges) {
    bool dup = false;
    for (const GuardedEdge& k : kept) {
      if (k.src == e.src && k.dst == e.dst && spec::pred_equal(k.guard, e.guard) &&
          pred_opt_equal(k.safety, e.safety)) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(e);
  }
  edges = std::move(kept);
}

void sort_edges(std::vector<GuardedEdge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const GuardedEdge& a, const GuardedEdge& b) {
    if (a.src != b.src) return a.src < b.src;
    if (a.dst != b.dst) return a.dst < b.dst;
    return spec::print_pred(a.guard) < spec::print_pred(b.guard);
  });
}

}  // namespace

std::vector<char> reachable_from(const AbstractGraph& g, int from) {
  std::vector<char> seen(g.node_count, 0);
  if (from < 0 || from >= g.node_count) return seen;
  std::deque<int> queue{from};
  seen[from] = 1;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (const GuardedEdge& e : g.edges)
      if (e.src == u && !seen[e.dst]) {
        seen[e.dst] = 1;
        queue.push_back(e.dst);
      }
  }
  return seen;
}

AbstractGraph prune_unreachable(const AbstractGraph& g) {
  std::vector<char> fwd = reachable_from(g, g.q0);
  // Backward reachability from finals.
  std::vector<char> bwd(g.node_count, 0);
  std::deque<int> queue;
  for (int f : g.finals)
    if (f >= 0 && f < g.node_count) {
      bwd[f] = 1;
      queue.push_back(f);
    }
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (const GuardedEdge& e : g.edges)
      if (e.dst == v && !bwd[e.src]) {
        bwd[e.src] = 1;
        queue.push_back(e.src);
      }
  }
  if (!fwd.empty() && !(fwd[g.q0] && bwd[g.q0])) throw EmptyGraphError();
  if (g.node_count == 0) throw EmptyGraphError();

  std::vector<GuardedEdge> kept;
  for (const GuardedEdge& e : g.edges)
    if (fwd[e.src] && bwd[e.src] && fwd[e.dst] && bwd[e.dst]) kept.push_back(e);

  std::vector<char> alive(g.node_count, 0);
  alive[g.q0] = 1;
  for (const GuardedEdge& e : kept) alive[e.src] = alive[e.dst] = 1;
  for (int f : g.finals)
    if (fwd[f] && bwd[f]) alive[f] = 1;

  // Dense topological renumbering, q0 first, ties by old id (Kahn with a
  // min-heap keeps the numbering deterministic).
  std::vector<int> indeg(g.node_count, 0);
  for (const GuardedEdge& e : kept) ++indeg[e.dst];
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int v = 0; v < g.node_count; ++v)
    if (alive[v] && indeg[v] == 0) ready.push(v);
  std::vector<int> newid(g.node_count, -1);
  int next = 0;
  while (!ready.empty()) {
    int u = ready.top();
    ready.pop();
    newid[u] = next++;
    for (const GuardedEdge& e : kept)
      if (e.src == u && --indeg[e.dst] == 0) ready.push(e.dst);
  }

  AbstractGraph out;
  out.node_count = next;
  out.q0 = newid[g.q0];
  assert(out.q0 == 0);
  for (const GuardedEdge& e : kept)
    out.edges.push_back({newid[e.src], newid[e.dst], e.guard, e.safety});
  for (int f : g.finals)
    if (f >= 0 && f < g.node_count && newid[f] >= 0) out.finals.insert(newid[f]);
  sort_edges(out.edges);
  dedupe_edges(out.edges);
  if (out.finals.empty()) throw EmptyGraphError();
  return out;
}

AbstractGraph compile(const SpecPtr& spec) {
  Frag f = compile_rec(spec);
  AbstractGraph g;
  g.node_count = f.n;
  g.edges = std::move(f.edges);
  g.q0 = 0;
  g.finals = std::move(f.finals);
  dedupe_edges(g.edges);
  return prune_unreachable(g);
}

// ---------------------------------------------------------------------------
// Acceptance.

Acceptor::Acceptor(const AbstractGraph& g) : g_(g) {
  size_t words = (2 * g.edges.size() + 63) / 64;
  state_.assign(std::max<size_t>(words, 1), 0);
  next_.assign(state_.size(), 0);
  reset();
}

void Acceptor::reset() {
  std::fill(state_.begin(), state_.end(), 0);
  accepted_ = false;
  for (size_t i = 0; i < g_.edges.size(); ++i)
    if (g_.edges[i].src == g_.q0) state_[(2 * i) >> 6] |= 1ull << ((2 * i) & 63);
}

void Acceptor::spawn_successors(int edge_idx) {
  int node = g_.edges[edge_idx].dst;
  for (size_t j = 0; j < g_.edges.size(); ++j)
    if (g_.edges[j].src == node) next_[(2 * j) >> 6] |= 1ull << ((2 * j) & 63);
}

bool Acceptor::feed(const LabelSet& labels) {
  if (accepted_) return true;
  std::fill(next_.begin(), next_.end(), 0);
  std::vector<int> fired_or_kept_posts;
  for (size_t w = 0; w < state_.size(); ++w) {
    uint64_t word = state_[w];
    while (word) {
      int bit = std::countr_zero(word);
      word &= word - 1;
      size_t slot = (w << 6) + bit;
      size_t e = slot >> 1;
      bool is_post = slot & 1;
      const GuardedEdge& edge = g_.edges[e];
      bool safe = !edge.safety || spec::eval_pred(edge.safety, labels);
      if (is_post) {
        if (safe) {
          next_[slot >> 6] |= 1ull << (slot & 63);
          fired_or_kept_posts.push_back(static_cast<int>(e));
        }
      } else {
        if (safe) next_[slot >> 6] |= 1ull << (slot & 63);
        if (spec::eval_pred(edge.guard, labels)) {
          size_t post = slot | 1;
          next_[post >> 6] |= 1ull << (post & 63);
          fired_or_kept_posts.push_back(static_cast<int>(e));
          if (g_.finals.count(edge.dst)) accepted_ = true;
        }
      }
    }
  }
  // Segment handover: a post state may hand the next step to any out-edge of
  // its node, so spawn those pre states before the next label is consumed.
  for (int e : fired_or_kept_posts) spawn_successors(e);
  state_.swap(next_);
  return accepted_;
}

bool dag_accepts(const AbstractGraph& g, const LabelTrace& trace) {
  Acceptor acc(g);
  for (const LabelSet& step : trace)
    if (acc.feed(step)) return true;
  return acc.accepted();
}

// ---------------------------------------------------------------------------
// Sub-task extraction.

SubTask subtask_of(const AbstractGraph& g, int edge_index) {
  if (edge_index < 0 || edge_index >= static_cast<int>(g.edges.size()))
    throw UnknownEdgeError(edge_index);
  SubTask t;
  t.edge_index = edge_index;
  t.edge = g.edges[edge_index];
  t.achieve = t.edge.guard;
  for (size_t i = 0; i < g.edges.size(); ++i)
    if (static_cast<int>(i) != edge_index && g.edges[i].src == t.edge.src)
      t.avoid.push_back(g.edges[i].guard);
  return t;
}

std::vector<SubTask> initial_tasks(const AbstractGraph& g) {
  std::vector<SubTask> out;
  for (int e : g.out_edges(g.q0)) out.push_back(subtask_of(g, e));
  return out;
}

std::vector<SubTask> next_tasks(const AbstractGraph& g, int reached,
                                const std::set<int>& discarded) {
  std::vector<SubTask> out;
  for (int e : g.out_edges(reached))
    if (!discarded.count(e)) out.push_back(subtask_of(g, e));
  return out;
}

std::set<int> discarded_edges(const AbstractGraph& g, int p, const std::set<int>& learned) {
  std::set<int> out;
  std::vector<char> from_q0 = reachable_from(g, g.q0);
  std::vector<char> from_p = reachable_from(g, p);
  for (size_t i = 0; i < g.edges.size(); ++i) {
    int idx = static_cast<int>(i);
    const GuardedEdge& e = g.edges[i];
    if (learned.count(idx)) continue;
    if (!from_q0[e.src]) continue;
    if (e.src == p || from_p[e.src]) continue;  // at or after p: future work
    if (e.dst == p) {
      out.insert(idx);
      continue;
    }
    // Discard when every dst->finals path passes through p, i.e. no final is
    // reachable from dst once p is removed.
    std::vector<char> seen(g.node_count, 0);
    std::deque<int> queue;
    if (e.dst != p) {
      seen[e.dst] = 1;
      queue.push_back(e.dst);
    }
    bool escapes = false;
    while (!queue.empty() && !escapes) {
      int u = queue.front();
      queue.pop_front();
      if (g.finals.count(u)) {
        escapes = true;
        break;
      }
      for (const GuardedEdge& e2 : g.edges)
        if (e2.src == u && e2.dst != p && !seen[e2.dst]) {
          seen[e2.dst] = 1;
          queue.push_back(e2.dst);
        }
    }
    if (!escapes) out.insert(idx);
  }
  return out;
}

std::vector<std::vector<int>> enumerate_paths(const AbstractGraph& g, size_t cap) {
  std::vector<std::vector<int>> paths;
  std::vector<int> stack{g.q0};
  // DFS over out-edges in ascending index order.
  std::vector<std::vector<int>> out(g.node_count);
  for (int v = 0; v < g.node_count; ++v) out[v] = g.out_edges(v);

  struct Frame {
    int node;
    size_t next;
  };
  std::vector<Frame> frames{{g.q0, 0}};
  std::vector<int> nodes{g.q0};
  while (!frames.empty()) {
    Frame& f = frames.back();
    if (g.finals.count(f.node) && f.next == 0) {
      paths.push_back(nodes);
      if (paths.size() > cap) throw PathExplosionError(cap);
    }
    if (f.next < out[f.node].size()) {
      int e = out[f.node][f.next++];
      int v = g.edges[e].dst;
      frames.push_back({v, 0});
      nodes.push_back(v);
    } else {
      frames.pop_back();
      nodes.pop_back();
    }
  }
  return paths;
}

std::string to_dot(const AbstractGraph& g) {
  std::string out = "digraph abstract {\n  rankdir=LR;\n";
  for (int v = 0; v < g.node_count; ++v) {
    out += "  q" + std::to_string(v) + " [shape=" +
           (g.finals.count(v) ? std::string("doublecircle") : std::string("circle")) + "];\n";
  }
  for (const GuardedEdge& e : g.edges) {
    out += "  q" + std::to_string(e.src) + " -> q" + std::to_string(e.dst) + " [label=\"" +
           spec::print_pred(e.guard) + "\"];\n";
  }
  out += "}\n";
  return out;
}

std::string to_plain(const AbstractGraph& g) {
  std::string out;
  for (const GuardedEdge& e : g.edges)
    out += "EDGE " + std::to_string(e.src) + " " + std::to_string(e.dst) + " " +
           spec::print_pred(e.guard) + "\n";
  for (int f : g.finals) out += "FINAL " + std::to_string(f) + "\n";
  return out;
}

std::vector<int> distance_to_finals(const AbstractGraph& g) {
  std::vector<int> dist(g.node_count, -1);
  std::deque<int> queue;
  for (int f : g.finals) {
    dist[f] = 0;
    queue.push_back(f);
  }
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (const GuardedEdge& e : g.edges)
      if (e.dst == v && dist[e.src] < 0) {
        dist[e.src] = dist[v] + 1;
        queue.push_back(e.src);
      }
  }
  return dist;
}

}  // namespace lsts::graph
