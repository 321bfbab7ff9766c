#pragma once

#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Trajectory specification language over atomic propositions.
//
//   spec := seq_or
//   seq_or := seq ("or" seq)*
//   seq := ens (";" ens)*
//   ens := atom ("ensuring" pred)*
//   atom := "achieve" pred | "(" spec ")"
//   pred := conj ("|" conj)*
//   conj := lit ("&" lit)*
//   lit := "!"? IDENT | "(" pred ")"
//
// Whitespace is insignificant; "#" starts a line comment. Keywords
// (achieve, ensuring, or) are reserved and cannot name atoms.
//
// A finite trace of label sets satisfies a spec if some prefix of it
// satisfies the spec exactly:
//   achieve b        : b holds at some step of the interval
//   phi ensuring b   : phi holds on the interval and b holds at every step
//   phi1 ; phi2      : the interval splits so phi1 holds on the left part
//                      and phi2 on the (nonempty, later) right part
//   phi1 or phi2     : either holds on the interval

namespace lsts::spec {

using LabelSet = std::set<std::string>;
using LabelTrace = std::vector<LabelSet>;

struct SyntaxError : std::runtime_error {
  int line;
  int col;
  std::vector<std::string> expected;
  SyntaxError(std::string msg, int line_, int col_, std::vector<std::string> expected_)
      : std::runtime_error(std::move(msg)), line(line_), col(col_), expected(std::move(expected_)) {}
};

struct EmptyTraceError : std::runtime_error {
  EmptyTraceError() : std::runtime_error("satisfaction query over an empty trace") {}
};

// ---------------------------------------------------------------------------
// Predicates: conjunctions/disjunctions of possibly negated atoms.

struct Pred;
using PredPtr = std::shared_ptr<const Pred>;

struct Pred {
  enum class Kind { Literal, And, Or };
  Kind kind;
  // Literal fields.
  std::string atom;
  bool negated = false;
  // And/Or children.
  PredPtr lhs, rhs;
};

PredPtr make_lit(std::string atom, bool negated = false);
PredPtr make_and(PredPtr lhs, PredPtr rhs);
PredPtr make_or(PredPtr lhs, PredPtr rhs);

bool eval_pred(const PredPtr& pred, const LabelSet& labels);
bool pred_equal(const PredPtr& a, const PredPtr& b);
std::string print_pred(const PredPtr& pred);
// Atoms mentioned anywhere in the predicate.
void collect_atoms(const PredPtr& pred, std::set<std::string>& out);

// ---------------------------------------------------------------------------
// Specifications. Every leaf is an Achieve node.

struct Spec;
using SpecPtr = std::shared_ptr<const Spec>;

struct Spec {
  enum class Kind { Achieve, Ensuring, Seq, Or };
  Kind kind;
  PredPtr pred;       // Achieve: target; Ensuring: invariant
  SpecPtr lhs, rhs;   // Ensuring uses lhs only
};

SpecPtr make_achieve(PredPtr pred);
SpecPtr make_ensuring(SpecPtr body, PredPtr pred);
SpecPtr make_seq(SpecPtr lhs, SpecPtr rhs);
SpecPtr make_spec_or(SpecPtr lhs, SpecPtr rhs);

// Parse a spec from text. Throws SyntaxError with 1-based line/column and the
// token set that would have been accepted at the failure point.
SpecPtr parse_spec(std::string_view text);

// Minimal-parenthesis printer; parse_spec(print_spec(s)) reproduces the exact
// tree shape.
std::string print_spec(const SpecPtr& spec);

bool spec_equal(const SpecPtr& a, const SpecPtr& b);
void collect_atoms(const SpecPtr& spec, std::set<std::string>& out);

// True iff some prefix of `trace` satisfies `spec` exactly. Throws
// EmptyTraceError when the trace has no steps.
bool sat_spec(const SpecPtr& spec, const LabelTrace& trace);

// bits[j] == sat_spec(spec, trace truncated to j+1 steps). One pass over the
// trace; useful when callers need satisfaction for every prefix.
std::vector<bool> sat_spec_prefixes(const SpecPtr& spec, const LabelTrace& trace);

}  // namespace lsts::spec
