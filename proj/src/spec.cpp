#include "lsts/spec.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace lsts::spec {

PredPtr make_lit(std::string atom, bool negated) {
  auto p = std::make_shared<Pred>();
  p->kind = Pred::Kind::Literal;
  p->atom = std::move(atom);
  p->negated = negated;
  return p;
}

PredPtr make_and(PredPtr lhs, PredPtr rhs) {
  auto p = std::make_shared<Pred>();
  p->kind = Pred::Kind::And;
  p->lhs = std::move(lhs);
  p->rhs = std::move(rhs);
  return p;
}

PredPtr make_or(PredPtr lhs, PredPtr rhs) {
  auto p = std::make_shared<Pred>();
  p->kind = Pred::Kind::Or;
  p->lhs = std::move(lhs);
  p->rhs = std::move(rhs);
  return p;
}

bool eval_pred(const PredPtr& pred, const LabelSet& labels) {
  switch (pred->kind) {
    case Pred::Kind::Literal: {
      bool present = labels.count(pred->atom) > 0;
      return pred->negated ? !present : present;
    }
    case Pred::Kind::And:
      return eval_pred(pred->lhs, labels) && eval_pred(pred->rhs, labels);
    case Pred::Kind::Or:
      return eval_pred(pred->lhs, labels) || eval_pred(pred->rhs, labels);
  }
  return false;
}

bool pred_equal(const PredPtr& a, const PredPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  if (a->kind == Pred::Kind::Literal) return a->atom == b->atom && a->negated == b->negated;
  return pred_equal(a->lhs, b->lhs) && pred_equal(a->rhs, b->rhs);
}

void collect_atoms(const PredPtr& pred, std::set<std::string>& out) {
  if (!pred) return;
  if (pred->kind == Pred::Kind::Literal) {
    out.insert(pred->atom);
  } else {
    collect_atoms(pred->lhs, out);
    collect_atoms(pred->rhs, out);
  }
}

namespace {

// Predicate precedence: Or(0) < And(1) < Literal(2). A child is wrapped in
// parentheses when its precedence is below what its position requires, which
// keeps right-nested trees distinguishable from the left-associative default.
int pred_prec(const Pred& p) {
  switch (p.kind) {
    case Pred::Kind::Or: return 0;
    case Pred::Kind::And: return 1;
    case Pred::Kind::Literal: return 2;
  }
  return 2;
}

void print_pred_rec(const PredPtr& p, int required, std::string& out) {
  int prec = pred_prec(*p);
  bool paren = prec < required;
  if (paren) out += '(';
  switch (p->kind) {
    case Pred::Kind::Literal:
      if (p->negated) out += '!';
      out += p->atom;
      break;
    case Pred::Kind::And:
      print_pred_rec(p->lhs, 1, out);
      out += " & ";
      print_pred_rec(p->rhs, 2, out);
      break;
    case Pred::Kind::Or:
      print_pred_rec(p->lhs, 0, out);
      out += " | ";
      print_pred_rec(p->rhs, 1, out);
      break;
  }
  if (paren) out += ')';
}

}  // namespace

std::string print_pred(const PredPtr& pred) {
  std::string out;
  print_pred_rec(pred, 0, out);
  return out;
}

SpecPtr make_achieve(PredPtr pred) {
  auto s = std::make_shared<Spec>();
  s->kind = Spec::Kind::Achieve;
  s->pred = std::move(pred);
  return s;
}

SpecPtr make_ensuring(SpecPtr body, PredPtr pred) {
  auto s = std::make_shared<Spec>();
  s->kind = Spec::Kind::Ensuring;
  s->lhs = std::move(body);
  s->pred = std::move(pred);
  return s;
}

SpecPtr make_seq(SpecPtr lhs, SpecPtr rhs) {
  auto s = std::make_shared<Spec>();
  s->kind = Spec::Kind::Seq;
  s->lhs = std::move(lhs);
  s->rhs = std::move(rhs);
  return s;
}

SpecPtr make_spec_or(SpecPtr lhs, SpecPtr rhs) {
  auto s = std::make_shared<Spec>();
  s->kind = Spec::Kind::Or;
  s->lhs = std::move(lhs);
  s->rhs = std::move(rhs);
  return s;
}

bool spec_equal(const SpecPtr& a, const SpecPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Spec::Kind::Achieve: return pred_equal(a->pred, b->pred);
    case Spec::Kind::Ensuring: return spec_equal(a->lhs, b->lhs) && pred_equal(a->pred, b->pred);
    case Spec::Kind::Seq:
    case Spec::Kind::Or: return spec_equal(a->lhs, b->lhs) && spec_equal(a->rhs, b->rhs);
  }
  return false;
}

void collect_atoms(const SpecPtr& spec, std::set<std::string>& out) {
  if (!spec) return;
  if (spec->pred) collect_atoms(spec->pred, out);
  collect_atoms(spec->lhs, out);
  collect_atoms(spec->rhs, out);
}

// ---------------------------------------------------------------------------
// Lexer / parser.

namespace {

enum class Tok { KwAchieve, KwEnsuring, KwOr, Semi, Amp, Pipe, Bang, LParen, RParen, Ident, End };

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::KwAchieve: return "'achieve'";
    case Tok::KwEnsuring: return "'ensuring'";
    case Tok::KwOr: return "'or'";
    case Tok::Semi: return "';'";
    case Tok::Amp: return "'&'";
    case Tok::Pipe: return "'|'";
    case Tok::Bang: return "'!'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Ident: return "identifier";
    case Tok::End: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> toks;
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (text[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '#') {
      size_t j = i;
      while (j < text.size() && text[j] != '\n') ++j;
      advance(j - i);
      continue;
    }
    int tl = line, tc = col;
    auto single = [&](Tok k) {
      toks.push_back({k, std::string(1, c), tl, tc});
      advance(1);
    };
    if (c == ';') { single(Tok::Semi); continue; }
    if (c == '&') { single(Tok::Amp); continue; }
    if (c == '|') { single(Tok::Pipe); continue; }
    if (c == '!') { single(Tok::Bang); continue; }
    if (c == '(') { single(Tok::LParen); continue; }
    if (c == ')') { single(Tok::RParen); continue; }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      std::string word(text.substr(i, j - i));
      Tok k = Tok::Ident;
      if (word == "achieve") k = Tok::KwAchieve;
      else if (word == "ensuring") k = Tok::KwEnsuring;
      else if (word == "or") k = Tok::KwOr;
      toks.push_back({k, word, tl, tc});
      advance(j - i);
      continue;
    }
    throw SyntaxError("unexpected character '" + std::string(1, c) + "' at " +
                          std::to_string(line) + ":" + std::to_string(col),
                      line, col, {});
  }
  toks.push_back({Tok::End, "", line, col});
  return toks;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  SpecPtr parse() {
    SpecPtr s = parse_seq_or();
    expect(Tok::End);
    return s;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;

  const Token& peek() const { return toks_[pos_]; }
  bool at(Tok k) const { return peek().kind == k; }
  Token take() { return toks_[pos_++]; }

  [[noreturn]] void fail(std::vector<Tok> wanted) {
    const Token& t = peek();
    std::vector<std::string> names;
    std::string joined;
    for (Tok w : wanted) {
      names.emplace_back(tok_name(w));
      if (!joined.empty()) joined += " or ";
      joined += tok_name(w);
    }
    std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw SyntaxError("expected " + joined + " but found " + got + " at " +
                          std::to_string(t.line) + ":" + std::to_string(t.col),
                      t.line, t.col, names);
  }

  Token expect(Tok k) {
    if (!at(k)) fail({k});
    return take();
  }

  SpecPtr parse_seq_or() {
    SpecPtr lhs = parse_seq();
    while (at(Tok::KwOr)) {
      take();
      lhs = make_spec_or(lhs, parse_seq());
    }
    return lhs;
  }

  SpecPtr parse_seq() {
    SpecPtr lhs = parse_ens();
    while (at(Tok::Semi)) {
      take();
      lhs = make_seq(lhs, parse_ens());
    }
    return lhs;
  }

  SpecPtr parse_ens() {
    SpecPtr body = parse_atom();
    while (at(Tok::KwEnsuring)) {
      take();
      body = make_ensuring(body, parse_pred());
    }
    return body;
  }

  SpecPtr parse_atom() {
    if (at(Tok::KwAchieve)) {
      take();
      return make_achieve(parse_pred());
    }
    if (at(Tok::LParen)) {
      take();
      SpecPtr inner = parse_seq_or();
      expect(Tok::RParen);
      return inner;
    }
    fail({Tok::KwAchieve, Tok::LParen});
  }

  PredPtr parse_pred() {
    PredPtr lhs = parse_conj();
    while (at(Tok::Pipe)) {
      take();
      lhs = make_or(lhs, parse_conj());
    }
    return lhs;
  }

  PredPtr parse_conj() {
    PredPtr lhs = parse_lit();
    while (at(Tok::Amp)) {
      take();
      lhs = make_and(lhs, parse_lit());
    }
    return lhs;
  }

  PredPtr parse_lit() {
    if (at(Tok::Bang)) {
      take();
      Token id = expect(Tok::Ident);
      return make_lit(id.text, true);
    }
    if (at(Tok::Ident)) return make_lit(take().text, false);
    if (at(Tok::LParen)) {
      take();
      PredPtr inner = parse_pred();
      expect(Tok::RParen);
      return inner;
    }
    fail({Tok::Bang, Tok::Ident, Tok::LParen});
  }
};

// Spec precedence: Or(0) < Seq(1) < Ensuring(2) < Achieve(3).
int spec_prec(const Spec& s) {
  switch (s.kind) {
    case Spec::Kind::Or: return 0;
    case Spec::Kind::Seq: return 1;
    case Spec::Kind::Ensuring: return 2;
    case Spec::Kind::Achieve: return 3;
  }
  return 3;
}

void print_spec_rec(const SpecPtr& s, int required, std::string& out) {
  int prec = spec_prec(*s);
  bool paren = prec < required;
  if (paren) out += '(';
  switch (s->kind) {
    case Spec::Kind::Achieve:
      out += "achieve ";
      print_pred_rec(s->pred, 0, out);
      break;
    case Spec::Kind::Ensuring:
      // The grammar hangs "ensuring" chains off an atom, so the body may be an
      // Ensuring chain itself but anything looser needs parentheses.
      print_spec_rec(s->lhs, 2, out);
      out += " ensuring ";
      print_pred_rec(s->pred, 1, out);
      break;
    case Spec::Kind::Seq:
      print_spec_rec(s->lhs, 1, out);
      out += " ; ";
      print_spec_rec(s->rhs, 2, out);
      break;
    case Spec::Kind::Or:
      print_spec_rec(s->lhs, 0, out);
      out += " or ";
      print_spec_rec(s->rhs, 1, out);
      break;
  }
  if (paren) out += ')';
}

}  // namespace

SpecPtr parse_spec(std::string_view text) { return Parser(lex(text)).parse(); }

std::string print_spec(const SpecPtr& spec) {
  std::string out;
  print_spec_rec(spec, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Satisfaction. For each subformula we build one bit-row per start index i;
// bit j of row i says the closed interval [i..j] satisfies the subformula.
// Rows are flat multi-word bitsets so the whole computation is
// O(|spec| * n^2) bit work plus O(n) per Seq split point.

namespace {

struct Rows {
  int n = 0;
  int words = 0;
  std::vector<uint64_t> bits;  // row i occupies words [i*words, (i+1)*words)

  Rows() = default;
  Rows(int n_, int words_) : n(n_), words(words_), bits(static_cast<size_t>(n_) * words_, 0) {}

  uint64_t* row(int i) { return bits.data() + static_cast<size_t>(i) * words; }
  const uint64_t* row(int i) const { return bits.data() + static_cast<size_t>(i) * words; }

  void set(int i, int j) { row(i)[j >> 6] |= (1ull << (j & 63)); }
  bool get(int i, int j) const { return (row(i)[j >> 6] >> (j & 63)) & 1; }
};

// Sets bits [lo..hi] of `dst` (no-op when lo > hi).
void set_range(uint64_t* dst, int lo, int hi) {
  if (lo > hi) return;
  int wl = lo >> 6, wh = hi >> 6;
  uint64_t ml = ~0ull << (lo & 63);
  uint64_t mh = (hi & 63) == 63 ? ~0ull : ((1ull << ((hi & 63) + 1)) - 1);
  if (wl == wh) {
    dst[wl] |= ml & mh;
    return;
  }
  dst[wl] |= ml;
  for (int w = wl + 1; w < wh; ++w) dst[w] = ~0ull;
  dst[wh] |= mh;
}

std::vector<char> step_truth(const PredPtr& pred, const LabelTrace& trace) {
  std::vector<char> tv(trace.size());
  for (size_t j = 0; j < trace.size(); ++j) tv[j] = eval_pred(pred, trace[j]) ? 1 : 0;
  return tv;
}

Rows sat_rows(const SpecPtr& s, const LabelTrace& trace) {
  const int n = static_cast<int>(trace.size());
  const int words = (n + 63) / 64;
  switch (s->kind) {
    case Spec::Kind::Achieve: {
      Rows out(n, words);
      std::vector<char> tv = step_truth(s->pred, trace);
      int first = n;  // first index >= i where the predicate holds
      for (int i = n - 1; i >= 0; --i) {
        if (tv[i]) first = i;
        if (first < n) set_range(out.row(i), first, n - 1);
      }
      return out;
    }
    case Spec::Kind::Or: {
      Rows a = sat_rows(s->lhs, trace);
      Rows b = sat_rows(s->rhs, trace);
      for (size_t w = 0; w < a.bits.size(); ++w) a.bits[w] |= b.bits[w];
      return a;
    }
    case Spec::Kind::Ensuring: {
      Rows a = sat_rows(s->lhs, trace);
      std::vector<char> tv = step_truth(s->pred, trace);
      // last_safe[i]: largest j with the invariant true on all of [i..j],
      // or i-1 when it already fails at i.
      std::vector<int> last_safe(n);
      for (int i = n - 1; i >= 0; --i)
        last_safe[i] = !tv[i] ? i - 1 : (i == n - 1 ? n - 1 : last_safe[i + 1]);
      Rows out(n, words);
      std::vector<uint64_t> mask(words);
      for (int i = 0; i < n; ++i) {
        if (last_safe[i] < i) continue;
        std::fill(mask.begin(), mask.end(), 0);
        set_range(mask.data(), i, last_safe[i]);
        const uint64_t* src = a.row(i);
        uint64_t* dst = out.row(i);
        for (int w = 0; w < words; ++w) dst[w] = src[w] & mask[w];
      }
      return out;
    }
    case Spec::Kind::Seq: {
      Rows a = sat_rows(s->lhs, trace);
      Rows b = sat_rows(s->rhs, trace);
      Rows out(n, words);
      for (int i = 0; i < n; ++i) {
        const uint64_t* ra = a.row(i);
        uint64_t* dst = out.row(i);
        // The right part starts strictly after the split point.
        for (int w = 0; w < words; ++w) {
          uint64_t word = ra[w];
          while (word) {
            int bit = std::countr_zero(word);
            word &= word - 1;
            int k = (w << 6) + bit;
            if (k + 1 >= n) continue;
            const uint64_t* rb = b.row(k + 1);
            for (int w2 = 0; w2 < words; ++w2) dst[w2] |= rb[w2];
          }
        }
      }
      return out;
    }
  }
  return Rows(n, words);
}

}  // namespace

std::vector<bool> sat_spec_prefixes(const SpecPtr& spec, const LabelTrace& trace) {
  if (trace.empty()) throw EmptyTraceError();
  Rows rows = sat_rows(spec, trace);
  const int n = static_cast<int>(trace.size());
  std::vector<bool> out(n);
  bool any = false;
  for (int j = 0; j < n; ++j) {
    any = any || rows.get(0, j);
    out[j] = any;
  }
  return out;
}

bool sat_spec(const SpecPtr& spec, const LabelTrace& trace) {
  return sat_spec_prefixes(spec, trace).back();
}

}  // namespace lsts::spec
