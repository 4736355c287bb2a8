#pragma once

// Linear temporal logic over finite traces: recursive-descent parser,
// reference evaluator, and an incremental progression monitor.
//
// The fragment: true/false constants, atoms, ! & | ->, X (next), F (future),
// G (global), U (until), R (release) and Rm, a modified release whose
// obligation is not required at the step where the releasing condition
// holds. Finite-trace reading: X/F/U are strong (they need a witness inside
// the trace); G/R/Rm are weak at the trace end.

#include <cctype>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hprl::ltl {

enum class Op {
  True,
  False,
  Atom,
  Not,
  And,
  Or,
  Implies,
  Next,
  Future,
  Global,
  Until,
  Release,
  ModRelease,
};

struct Node;
using Formula = std::shared_ptr<const Node>;

struct Node {
  Op op;
  std::string atom;  // Op::Atom only
  Formula lhs;       // unary operand or left operand
  Formula rhs;       // right operand of binary operators
};

inline Formula make_true() {
  static const Formula t = std::make_shared<Node>(Node{Op::True, {}, {}, {}});
  return t;
}
inline Formula make_false() {
  static const Formula f = std::make_shared<Node>(Node{Op::False, {}, {}, {}});
  return f;
}
inline Formula atom(std::string name) {
  if (name.empty()) throw std::invalid_argument("ltl: empty atom name");
  return std::make_shared<Node>(Node{Op::Atom, std::move(name), {}, {}});
}
inline Formula make_unary(Op op, Formula f) {
  return std::make_shared<Node>(Node{op, {}, std::move(f), {}});
}
inline Formula make_binary(Op op, Formula l, Formula r) {
  return std::make_shared<Node>(Node{op, {}, std::move(l), std::move(r)});
}
inline Formula negate(Formula f) { return make_unary(Op::Not, std::move(f)); }
inline Formula conj(Formula l, Formula r) {
  return make_binary(Op::And, std::move(l), std::move(r));
}
inline Formula disj(Formula l, Formula r) {
  return make_binary(Op::Or, std::move(l), std::move(r));
}
inline Formula implies(Formula l, Formula r) {
  return make_binary(Op::Implies, std::move(l), std::move(r));
}
inline Formula next(Formula f) { return make_unary(Op::Next, std::move(f)); }
inline Formula future(Formula f) { return make_unary(Op::Future, std::move(f)); }
inline Formula globally(Formula f) { return make_unary(Op::Global, std::move(f)); }
inline Formula until(Formula l, Formula r) {
  return make_binary(Op::Until, std::move(l), std::move(r));
}
inline Formula release(Formula l, Formula r) {
  return make_binary(Op::Release, std::move(l), std::move(r));
}
inline Formula mod_release(Formula l, Formula r) {
  return make_binary(Op::ModRelease, std::move(l), std::move(r));
}

inline bool structurally_equal(const Formula& a, const Formula& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->op != b->op) return false;
  switch (a->op) {
    case Op::True:
    case Op::False:
      return true;
    case Op::Atom:
      return a->atom == b->atom;
    case Op::Not:
    case Op::Next:
    case Op::Future:
    case Op::Global:
      return structurally_equal(a->lhs, b->lhs);
    default:
      return structurally_equal(a->lhs, b->lhs) &&
             structurally_equal(a->rhs, b->rhs);
  }
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Binding strength, tighter binds higher: unary 4, U/R/Rm 3, & 2, | 1, -> 0.
inline int precedence(Op op) {
  switch (op) {
    case Op::True:
    case Op::False:
    case Op::Atom:
      return 5;
    case Op::Not:
    case Op::Next:
    case Op::Future:
    case Op::Global:
      return 4;
    case Op::Until:
    case Op::Release:
    case Op::ModRelease:
      return 3;
    case Op::And:
      return 2;
    case Op::Or:
      return 1;
    case Op::Implies:
      return 0;
  }
  return 5;
}

inline bool is_binary(Op op) {
  switch (op) {
    case Op::And:
    case Op::Or:
    case Op::Implies:
    case Op::Until:
    case Op::Release:
    case Op::ModRelease:
      return true;
    default:
      return false;
  }
}

inline const char* binary_token(Op op) {
  switch (op) {
    case Op::And:
      return "&";
    case Op::Or:
      return "|";
    case Op::Implies:
      return "->";
    case Op::Until:
      return "U";
    case Op::Release:
      return "R";
    case Op::ModRelease:
      return "Rm";
    default:
      return "?";
  }
}

// side: -1 left operand, +1 right operand of a binary parent.
inline bool needs_parens(const Formula& child, Op parent, int side) {
  const int pc = precedence(child->op);
  const int pp = precedence(parent);
  if (pc > pp) {
    // A binary operand of a binary connective is parenthesized even when
    // precedence alone would disambiguate; formulas read better that way.
    return is_binary(parent) && is_binary(child->op);
  }
  if (pc < pp) return true;
  // Equal precedence: rely on associativity. &, | associate left;
  // ->, U, R, Rm associate right.
  const bool right_assoc = parent == Op::Implies || parent == Op::Until ||
                           parent == Op::Release || parent == Op::ModRelease;
  if (is_binary(parent) && is_binary(child->op)) return true;
  return right_assoc ? side < 0 : side > 0;
}

inline void print_into(const Formula& f, std::string& out);

inline void print_operand(const Formula& child, Op parent, int side,
                          std::string& out) {
  if (needs_parens(child, parent, side)) {
    out += '(';
    print_into(child, out);
    out += ')';
  } else {
    print_into(child, out);
  }
}

inline void print_into(const Formula& f, std::string& out) {
  switch (f->op) {
    case Op::True:
      out += "true";
      return;
    case Op::False:
      out += "false";
      return;
    case Op::Atom:
      out += f->atom;
      return;
    case Op::Not:
      out += '!';
      print_operand(f->lhs, Op::Not, -1, out);
      return;
    case Op::Next:
    case Op::Future:
    case Op::Global: {
      out += f->op == Op::Next ? 'X' : (f->op == Op::Future ? 'F' : 'G');
      if (precedence(f->lhs->op) < 4) {
        out += '(';
        print_into(f->lhs, out);
        out += ')';
      } else {
        out += ' ';
        print_into(f->lhs, out);
      }
      return;
    }
    default:
      print_operand(f->lhs, f->op, -1, out);
      out += ' ';
      out += binary_token(f->op);
      out += ' ';
      print_operand(f->rhs, f->op, +1, out);
      return;
  }
}

}  // namespace detail

inline std::string print(const Formula& f) {
  std::string out;
  detail::print_into(f, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

struct ParseError : std::runtime_error {
  ParseError(int line, int column, const std::string& what_arg)
      : std::runtime_error("ltl parse error at " + std::to_string(line) + ":" +
                           std::to_string(column) + ": " + what_arg),
        line(line),
        column(column) {}
  int line;
  int column;
};

namespace detail {

struct Token {
  enum Kind {
    End,
    Ident,
    TrueLit,
    FalseLit,
    Bang,
    Amp,
    Pipe,
    Arrow,
    LParen,
    RParen,
    KNext,
    KFuture,
    KGlobal,
    KUntil,
    KRelease,
    KModRelease,
  };
  Kind kind;
  std::string text;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
    current_.line = line_;
    current_.column = col_;
    if (pos_ >= text_.size()) {
      current_.kind = Token::End;
      current_.text.clear();
      return;
    }
    const char c = text_[pos_];
    switch (c) {
      case '!':
        emit(Token::Bang, 1);
        return;
      case '&':
        emit(Token::Amp, 1);
        return;
      case '|':
        emit(Token::Pipe, 1);
        return;
      case '(':
        emit(Token::LParen, 1);
        return;
      case ')':
        emit(Token::RParen, 1);
        return;
      case '-':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
          emit(Token::Arrow, 2);
          return;
        }
        throw ParseError(line_, col_, "expected '->'");
      default:
        break;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[end])) ||
              text_[end] == '_')) {
        ++end;
      }
      const std::string word(text_.substr(pos_, end - pos_));
      Token::Kind kind = Token::Ident;
      if (word == "true") kind = Token::TrueLit;
      else if (word == "false") kind = Token::FalseLit;
      else if (word == "X") kind = Token::KNext;
      else if (word == "F") kind = Token::KFuture;
      else if (word == "G") kind = Token::KGlobal;
      else if (word == "U") kind = Token::KUntil;
      else if (word == "R") kind = Token::KRelease;
      else if (word == "Rm") kind = Token::KModRelease;
      current_.kind = kind;
      current_.text = word;
      col_ += static_cast<int>(end - pos_);
      pos_ = end;
      return;
    }
    throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
  }

  void emit(Token::Kind kind, int width) {
    current_.kind = kind;
    current_.text = std::string(text_.substr(pos_, width));
    pos_ += width;
    col_ += width;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token current_{};
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lex_(text) {}

  Formula parse() {
    Formula f = parse_implies();
    const Token& t = lex_.peek();
    if (t.kind != Token::End) {
      throw ParseError(t.line, t.column,
                       "expected operator or end of input, got '" + t.text + "'");
    }
    return f;
  }

 private:
  // ->  (right associative, loosest)
  Formula parse_implies() {
    Formula lhs = parse_or();
    if (lex_.peek().kind == Token::Arrow) {
      lex_.take();
      return implies(std::move(lhs), parse_implies());
    }
    return lhs;
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (lex_.peek().kind == Token::Pipe) {
      lex_.take();
      f = disj(std::move(f), parse_and());
    }
    return f;
  }

  Formula parse_and() {
    Formula f = parse_temporal();
    while (lex_.peek().kind == Token::Amp) {
      lex_.take();
      f = conj(std::move(f), parse_temporal());
    }
    return f;
  }

  // U / R / Rm (right associative, tighter than &)
  Formula parse_temporal() {
    Formula lhs = parse_unary();
    const Token::Kind k = lex_.peek().kind;
    if (k == Token::KUntil || k == Token::KRelease || k == Token::KModRelease) {
      lex_.take();
      Formula rhs = parse_temporal();
      const Op op = k == Token::KUntil
                        ? Op::Until
                        : (k == Token::KRelease ? Op::Release : Op::ModRelease);
      return make_binary(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula parse_unary() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Token::Bang:
        lex_.take();
        return negate(parse_unary());
      case Token::KNext:
        lex_.take();
        return next(parse_unary());
      case Token::KFuture:
        lex_.take();
        return future(parse_unary());
      case Token::KGlobal:
        lex_.take();
        return globally(parse_unary());
      default:
        return parse_primary();
    }
  }

  Formula parse_primary() {
    Token t = lex_.take();
    switch (t.kind) {
      case Token::TrueLit:
        return make_true();
      case Token::FalseLit:
        return make_false();
      case Token::Ident:
        return atom(std::move(t.text));
      case Token::LParen: {
        Formula f = parse_implies();
        const Token& close = lex_.peek();
        if (close.kind != Token::RParen) {
          throw ParseError(close.line, close.column,
                           "expected ')', got '" + close.text + "'");
        }
        lex_.take();
        return f;
      }
      case Token::End:
        throw ParseError(t.line, t.column, "unexpected end of input");
      default:
        throw ParseError(t.line, t.column,
                         "expected formula, got '" + t.text + "'");
    }
  }

  Lexer lex_;
};

}  // namespace detail

inline Formula parse(std::string_view text) {
  return detail::Parser(text).parse();
}

// ---------------------------------------------------------------------------
// Trace evaluation

/// One tick's proposition values.
using Assignment = std::map<std::string, bool>;

inline bool atom_value(const Assignment& a, const std::string& name) {
  const auto it = a.find(name);
  if (it == a.end()) {
    throw std::out_of_range("ltl: atom '" + name + "' missing from assignment");
  }
  return it->second;
}

/// Reference finite-trace semantics at position i. i == trace.size() is the
/// empty suffix: weak operators hold, strong ones fail, atoms fail.
inline bool eval_trace(const Formula& f, const std::vector<Assignment>& trace,
                       std::size_t i) {
  if (trace.empty()) throw std::out_of_range("ltl: empty trace");
  if (i > trace.size()) throw std::out_of_range("ltl: position out of range");
  const std::size_t n = trace.size();
  const bool at_end = i == n;
  switch (f->op) {
    case Op::True:
      return true;
    case Op::False:
      return false;
    case Op::Atom:
      return at_end ? false : atom_value(trace[i], f->atom);
    case Op::Not:
      return !eval_trace(f->lhs, trace, i);
    case Op::And:
      return eval_trace(f->lhs, trace, i) && eval_trace(f->rhs, trace, i);
    case Op::Or:
      return eval_trace(f->lhs, trace, i) || eval_trace(f->rhs, trace, i);
    case Op::Implies:
      return !eval_trace(f->lhs, trace, i) || eval_trace(f->rhs, trace, i);
    case Op::Next:
      // Strong next: false at the last position.
      return i + 1 < n && eval_trace(f->lhs, trace, i + 1);
    case Op::Future:
      for (std::size_t j = i; j < n; ++j)
        if (eval_trace(f->lhs, trace, j)) return true;
      return false;
    case Op::Global:
      for (std::size_t j = i; j < n; ++j)
        if (!eval_trace(f->lhs, trace, j)) return false;
      return true;
    case Op::Until:
      for (std::size_t k = i; k < n; ++k) {
        if (eval_trace(f->rhs, trace, k)) return true;
        if (!eval_trace(f->lhs, trace, k)) return false;
      }
      return false;
    case Op::Release:
      // g holds until (and including) a step where f also holds; weak at
      // the trace end.
      for (std::size_t k = i; k < n; ++k) {
        if (!eval_trace(f->rhs, trace, k)) return false;
        if (eval_trace(f->lhs, trace, k)) return true;
      }
      return true;
    case Op::ModRelease:
      // Immediate release: once f holds, g is not required at that step.
      for (std::size_t k = i; k < n; ++k) {
        if (eval_trace(f->lhs, trace, k)) return true;
        if (!eval_trace(f->rhs, trace, k)) return false;
      }
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Progression monitor

enum class Verdict3 { True, False, Inconclusive };

inline const char* to_string(Verdict3 v) {
  switch (v) {
    case Verdict3::True:
      return "true";
    case Verdict3::False:
      return "false";
    case Verdict3::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

namespace detail {

inline bool is_true(const Formula& f) { return f->op == Op::True; }
inline bool is_false(const Formula& f) { return f->op == Op::False; }

}  // namespace detail

/// Bottom-up constant folding with the usual boolean identities. The
/// simplified formula is trace-equivalent to the input.
inline Formula simplify(const Formula& f) {
  using detail::is_false;
  using detail::is_true;
  switch (f->op) {
    case Op::True:
    case Op::False:
    case Op::Atom:
      return f;
    case Op::Not: {
      Formula a = simplify(f->lhs);
      if (is_true(a)) return make_false();
      if (is_false(a)) return make_true();
      if (a->op == Op::Not) return a->lhs;
      return a == f->lhs ? f : negate(std::move(a));
    }
    case Op::And: {
      Formula a = simplify(f->lhs);
      Formula b = simplify(f->rhs);
      if (is_false(a) || is_false(b)) return make_false();
      if (is_true(a)) return b;
      if (is_true(b)) return a;
      if (structurally_equal(a, b)) return a;
      return a == f->lhs && b == f->rhs ? f : conj(std::move(a), std::move(b));
    }
    case Op::Or: {
      Formula a = simplify(f->lhs);
      Formula b = simplify(f->rhs);
      if (is_true(a) || is_true(b)) return make_true();
      if (is_false(a)) return b;
      if (is_false(b)) return a;
      if (structurally_equal(a, b)) return a;
      return a == f->lhs && b == f->rhs ? f : disj(std::move(a), std::move(b));
    }
    case Op::Implies: {
      Formula a = simplify(f->lhs);
      Formula b = simplify(f->rhs);
      if (is_false(a) || is_true(b)) return make_true();
      if (is_true(a)) return b;
      if (is_false(b)) return simplify(negate(a));
      return a == f->lhs && b == f->rhs ? f : implies(std::move(a), std::move(b));
    }
    case Op::Next: {
      Formula a = simplify(f->lhs);
      return a == f->lhs ? f : next(std::move(a));
    }
    case Op::Future: {
      Formula a = simplify(f->lhs);
      // No "F true => true" fold: F true is false on the empty suffix and
      // progression uses it as the strong-next guard (see progress_raw).
      if (is_false(a)) return make_false();
      if (a->op == Op::Future) return a;
      return a == f->lhs ? f : future(std::move(a));
    }
    case Op::Global: {
      Formula a = simplify(f->lhs);
      if (is_true(a)) return make_true();
      if (is_false(a)) return make_false();
      if (a->op == Op::Global) return a;
      return a == f->lhs ? f : globally(std::move(a));
    }
    case Op::Until: {
      Formula a = simplify(f->lhs);
      Formula b = simplify(f->rhs);
      if (is_true(b)) return make_true();
      if (is_false(b)) return make_false();
      if (is_false(a)) return b;
      if (is_true(a)) return future(std::move(b));
      return a == f->lhs && b == f->rhs ? f : until(std::move(a), std::move(b));
    }
    case Op::Release: {
      Formula a = simplify(f->lhs);
      Formula b = simplify(f->rhs);
      if (is_false(b)) return make_false();
      if (is_true(b)) return make_true();
      if (is_true(a)) return b;
      if (is_false(a)) return simplify(globally(b));
      return a == f->lhs && b == f->rhs ? f : release(std::move(a), std::move(b));
    }
    case Op::ModRelease: {
      Formula a = simplify(f->lhs);
      Formula b = simplify(f->rhs);
      if (is_true(a)) return make_true();
      if (is_false(b)) return a;  // release must hold at this very step
      if (is_true(b)) return make_true();
      if (is_false(a)) return simplify(globally(b));
      return a == f->lhs && b == f->rhs ? f
                                        : mod_release(std::move(a), std::move(b));
    }
  }
  return f;
}

/// One progression step without simplification: substitutes this tick's atom
/// values and unrolls temporal operators by one step. The result is the
/// obligation on the rest of the trace.
inline Formula progress_raw(const Formula& f, const Assignment& step) {
  switch (f->op) {
    case Op::True:
    case Op::False:
      return f;
    case Op::Atom:
      return atom_value(step, f->atom) ? make_true() : make_false();
    case Op::Not:
      return negate(progress_raw(f->lhs, step));
    case Op::And:
      return conj(progress_raw(f->lhs, step), progress_raw(f->rhs, step));
    case Op::Or:
      return disj(progress_raw(f->lhs, step), progress_raw(f->rhs, step));
    case Op::Implies:
      return implies(progress_raw(f->lhs, step), progress_raw(f->rhs, step));
    case Op::Next:
      // Strong next: the obligation carries a guard that fails if the trace
      // ends here. F true progresses to true on any further tick and is
      // rejected at finalize, which is exactly "a next step existed".
      return conj(f->lhs, future(make_true()));
    case Op::Future:
      // F f = f | X F f
      return disj(progress_raw(f->lhs, step), f);
    case Op::Global:
      // G f = f & X G f
      return conj(progress_raw(f->lhs, step), f);
    case Op::Until:
      // f U g = g | (f & X(f U g))
      return disj(progress_raw(f->rhs, step),
                  conj(progress_raw(f->lhs, step), f));
    case Op::Release:
      // f R g = g & (f | X(f R g))
      return conj(progress_raw(f->rhs, step),
                  disj(progress_raw(f->lhs, step), f));
    case Op::ModRelease:
      // f Rm g = f | (g & X(f Rm g))
      return disj(progress_raw(f->lhs, step),
                  conj(progress_raw(f->rhs, step), f));
  }
  return f;
}

/// Truth of a pending obligation when the trace ends: weak operators are
/// granted, strong ones rejected. Matches eval_trace on the empty suffix.
inline bool accepts_empty(const Formula& f) {
  switch (f->op) {
    case Op::True:
      return true;
    case Op::False:
    case Op::Atom:
    case Op::Next:
    case Op::Future:
    case Op::Until:
      return false;
    case Op::Not:
      return !accepts_empty(f->lhs);
    case Op::And:
      return accepts_empty(f->lhs) && accepts_empty(f->rhs);
    case Op::Or:
      return accepts_empty(f->lhs) || accepts_empty(f->rhs);
    case Op::Implies:
      return !accepts_empty(f->lhs) || accepts_empty(f->rhs);
    case Op::Global:
    case Op::Release:
    case Op::ModRelease:
      return true;
  }
  return false;
}

/// Incremental monitor. Feed one Assignment per tick; the verdict latches
/// once it leaves Inconclusive.
class Monitor {
 public:
  Monitor() : residual_(make_true()), verdict_(Verdict3::True) {}
  explicit Monitor(Formula f) : residual_(simplify(std::move(f))) {
    refresh_verdict();
  }

  const Formula& residual() const { return residual_; }
  Verdict3 verdict() const { return verdict_; }
  int ticks_consumed() const { return ticks_; }
  bool decided() const { return verdict_ != Verdict3::Inconclusive; }

  /// Progress by one tick. Calling this on a decided monitor is a caller
  /// bug and throws.
  Verdict3 progress(const Assignment& step) {
    if (decided()) {
      throw std::logic_error("ltl: progress() on a decided monitor");
    }
    residual_ = simplify(progress_raw(residual_, step));
    ++ticks_;
    refresh_verdict();
    return verdict_;
  }

  /// End-of-trace rule: resolves a pending residual using the weak/strong
  /// split. Idempotent on decided monitors.
  Verdict3 finalize() {
    if (!decided()) {
      verdict_ = accepts_empty(residual_) ? Verdict3::True : Verdict3::False;
      residual_ = verdict_ == Verdict3::True ? make_true() : make_false();
    }
    return verdict_;
  }

 private:
  void refresh_verdict() {
    if (residual_->op == Op::True) verdict_ = Verdict3::True;
    else if (residual_->op == Op::False) verdict_ = Verdict3::False;
    else verdict_ = Verdict3::Inconclusive;
  }

  Formula residual_;
  Verdict3 verdict_ = Verdict3::Inconclusive;
  int ticks_ = 0;
};

// ---------------------------------------------------------------------------
// Built-in safety specifications

/// Atom vocabulary shared by the shield and the trace checker.
namespace prop {
inline constexpr const char* T_red = "T_red";
inline constexpr const char* D_lon = "D_lon";
inline constexpr const char* D_lat = "D_lat";
inline constexpr const char* J_ev = "J_ev";
inline constexpr const char* prio_v_gt_e = "prio_v_gt_e";
inline constexpr const char* L_e = "L_e";
inline constexpr const char* L_ev = "L_ev";
inline constexpr const char* C_eps = "C_eps";
inline constexpr const char* e_stop = "e_stop";
inline constexpr const char* e_stop_lon = "e_stop_lon";
inline constexpr const char* e_stop_lat = "e_stop_lat";
}  // namespace prop

inline constexpr int kNumBuiltinSpecs = 5;

/// The five driving safety specifications, by their 1-based ids:
///   1 stop at a light that turns red, and stay stopped while it is red;
///   2 no longitudinal movement once the lead gap became unsafe, until the
///     gap is safe again or a lane change is triggered;
///   3 no lateral movement once a lateral gap became unsafe, until the gap
///     recovers or the lane change moves away from that vehicle;
///   4 yield at a junction to vehicles with higher priority;
///   5 a triggered lane change without target-lane clearance holds the
///     vehicle stationary until the lane is clear.
inline Formula builtin_spec(int id) {
  using namespace prop;
  const auto a = [](const char* name) { return atom(name); };
  switch (id) {
    case 1:
      // G((!T_red & X T_red) -> X(!T_red Rm e_stop))
      return globally(implies(conj(negate(a(T_red)), next(a(T_red))),
                              next(mod_release(negate(a(T_red)), a(e_stop)))));
    case 2:
      // G((D_lon & X !D_lon) -> X((D_lon | L_e) Rm e_stop_lon))
      // The falling edge is written X !D rather than !X D: the two agree at
      // every position with a successor, and the X !D form does not fire
      // vacuously on the final tick of a finite trace.
      return globally(
          implies(conj(a(D_lon), next(negate(a(D_lon)))),
                  next(mod_release(disj(a(D_lon), a(L_e)), a(e_stop_lon)))));
    case 3:
      // G((D_lat & X !D_lat) -> X((D_lat | L_ev) Rm e_stop_lat))
      return globally(
          implies(conj(a(D_lat), next(negate(a(D_lat)))),
                  next(mod_release(disj(a(D_lat), a(L_ev)), a(e_stop_lat)))));
    case 4:
      // G((J_ev & prio_v_gt_e) -> (!J_ev Rm e_stop))
      return globally(implies(conj(a(J_ev), a(prio_v_gt_e)),
                              mod_release(negate(a(J_ev)), a(e_stop))));
    case 5:
      // G((L_e & !C_eps) -> (C_eps Rm e_stop))
      return globally(implies(conj(a(L_e), negate(a(C_eps))),
                              mod_release(a(C_eps), a(e_stop))));
    default:
      throw std::out_of_range("ltl: builtin spec id must be in 1..5, got " +
                              std::to_string(id));
  }
}

/// For a G-rooted formula that failed on a trace, the first position where
/// the body is violated; 0 for formulas with other shapes.
inline std::size_t first_violation(const Formula& f,
                                   const std::vector<Assignment>& trace) {
  if (f->op == Op::Global) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (!eval_trace(f->lhs, trace, i)) return i;
    }
  }
  return 0;
}

}  // namespace hprl::ltl
