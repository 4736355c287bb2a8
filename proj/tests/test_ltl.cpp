#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hprl/ltl.hpp"
#include "hprl/rng.hpp"

#include <string>
#include <vector>

using namespace hprl::ltl;

namespace {

Assignment ab(bool a, bool b) { return {{"a", a}, {"b", b}}; }

std::vector<Assignment> trace_ab(std::initializer_list<std::pair<int, int>> ticks) {
  std::vector<Assignment> t;
  for (auto [a, b] : ticks) t.push_back(ab(a != 0, b != 0));
  return t;
}

Verdict3 monitor_verdict(const Formula& f, const std::vector<Assignment>& trace) {
  Monitor m(f);
  for (const auto& step : trace) {
    if (m.decided()) break;
    m.progress(step);
  }
  return m.finalize();
}

// Random formula over atoms a, b; leaf probability rises with depth.
Formula random_formula(hprl::Rng& rng, int depth) {
  const int pick = depth <= 0 ? rng.uniform_int(0, 2) : rng.uniform_int(0, 10);
  switch (pick) {
    case 0:
      return make_true();
    case 1:
      return atom("a");
    case 2:
      return atom("b");
    case 3:
      return negate(random_formula(rng, depth - 1));
    case 4:
      return next(random_formula(rng, depth - 1));
    case 5:
      return future(random_formula(rng, depth - 1));
    case 6:
      return globally(random_formula(rng, depth - 1));
    case 7:
      return disj(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    case 8:
      return until(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    case 9:
      return release(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    default:
      return mod_release(random_formula(rng, depth - 1),
                         random_formula(rng, depth - 1));
  }
}

std::vector<Assignment> random_trace(hprl::Rng& rng, int len) {
  std::vector<Assignment> t;
  for (int i = 0; i < len; ++i)
    t.push_back(ab(rng.next_double() < 0.5, rng.next_double() < 0.5));
  return t;
}

}  // namespace

TEST_CASE("parse builds the documented AST") {
  const Formula f = parse("G(a -> X b)");
  REQUIRE(f->op == Op::Global);
  const Formula imp = f->lhs;
  REQUIRE(imp->op == Op::Implies);
  CHECK(imp->lhs->op == Op::Atom);
  CHECK(imp->lhs->atom == "a");
  REQUIRE(imp->rhs->op == Op::Next);
  CHECK(imp->rhs->lhs->atom == "b");

  CHECK(parse("true")->op == Op::True);
}

TEST_CASE("parse reports position and expectation on bad input") {
  CHECK_THROWS_AS(parse("G(a -> "), ParseError);
  CHECK_THROWS_AS(parse("a &"), ParseError);
  CHECK_THROWS_AS(parse("(a | b"), ParseError);
  CHECK_THROWS_AS(parse("a # b"), ParseError);
  try {
    parse("G(a &\n& b)");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
  }
}

TEST_CASE("precedence: unary > U/R/Rm > & > | > ->") {
  // a U b & c parses as (a U b) & c
  const Formula f = parse("a U b & c");
  CHECK(f->op == Op::And);
  CHECK(f->lhs->op == Op::Until);
  // !a U b parses as (!a) U b
  const Formula g = parse("!a U b");
  CHECK(g->op == Op::Until);
  CHECK(g->lhs->op == Op::Not);
  // a & b | c -> d groups as ((a & b) | c) -> d
  const Formula h = parse("a & b | c -> d");
  CHECK(h->op == Op::Implies);
  CHECK(h->lhs->op == Op::Or);
  CHECK(h->lhs->lhs->op == Op::And);
  // Right associativity of temporal binaries and implication.
  const Formula u = parse("a U b U c");
  CHECK(u->rhs->op == Op::Until);
  const Formula i = parse("a -> b -> c");
  CHECK(i->rhs->op == Op::Implies);
}

TEST_CASE("parse/print round-trip on random formulas") {
  hprl::Rng rng(20240811);
  for (int i = 0; i < 200; ++i) {
    const Formula f = random_formula(rng, 5);
    const Formula g = parse(print(f));
    CHECK(structurally_equal(f, g));
  }
}

TEST_CASE("eval_trace basics") {
  const auto t4 = trace_ab({{0, 0}, {0, 1}, {0, 0}, {0, 0}});
  CHECK(eval_trace(globally(make_true()), t4, 0));
  CHECK_FALSE(eval_trace(future(atom("a")), t4, 0));
  CHECK(eval_trace(future(atom("b")), t4, 0));
  CHECK_FALSE(eval_trace(future(atom("b")), t4, 2));
  CHECK_THROWS_AS(eval_trace(atom("a"), t4, 5), std::out_of_range);
}

TEST_CASE("the modified release is immediate") {
  // a Rm b releases at the step where a holds, with no obligation on b there.
  const Formula f = mod_release(atom("a"), atom("b"));
  CHECK(eval_trace(f, trace_ab({{1, 0}}), 0));          // released immediately
  CHECK_FALSE(eval_trace(f, trace_ab({{0, 0}}), 0));    // no obligation met
  CHECK(eval_trace(f, trace_ab({{0, 1}, {1, 0}}), 0));  // b then release
  // Plain release requires b at the releasing step.
  const Formula r = release(atom("a"), atom("b"));
  CHECK_FALSE(eval_trace(r, trace_ab({{1, 0}}), 0));
  CHECK(eval_trace(r, trace_ab({{1, 1}}), 0));
  // Weak at the trace end: b throughout suffices for both.
  CHECK(eval_trace(f, trace_ab({{0, 1}, {0, 1}}), 0));
  CHECK(eval_trace(r, trace_ab({{0, 1}, {0, 1}}), 0));
}

TEST_CASE("spec'd Rm expansion example evaluates true") {
  // G((!a & X a) -> X(!a Rm b)) on (a,b) = (0,0),(1,1),(1,1),(0,0)
  const Formula f =
      globally(implies(conj(negate(atom("a")), next(atom("a"))),
                       next(mod_release(negate(atom("a")), atom("b")))));
  const auto trace = trace_ab({{0, 0}, {1, 1}, {1, 1}, {0, 0}});
  CHECK(eval_trace(f, trace, 0));
  CHECK(monitor_verdict(f, trace) == Verdict3::True);
}

TEST_CASE("progression: witness handling for F") {
  Monitor m(future(atom("a")));
  CHECK(m.progress(ab(false, false)) == Verdict3::Inconclusive);
  CHECK(m.residual()->op == Op::Future);
  CHECK(m.progress(ab(true, false)) == Verdict3::True);
  CHECK(m.ticks_consumed() == 2);
}

TEST_CASE("verdict latches and progress on a decided monitor throws") {
  Monitor m(future(atom("a")));
  m.progress(ab(true, false));
  CHECK(m.decided());
  CHECK_THROWS_AS(m.progress(ab(false, false)), std::logic_error);
  CHECK(m.finalize() == Verdict3::True);  // finalize keeps the verdict
}

TEST_CASE("strong next fails when the trace ends") {
  // X G a on a one-tick trace: no next position, so false even though G a
  // would be weakly acceptable.
  CHECK(monitor_verdict(next(globally(atom("a"))), trace_ab({{1, 0}})) ==
        Verdict3::False);
  CHECK_FALSE(eval_trace(next(globally(atom("a"))), trace_ab({{1, 0}}), 0));
  CHECK(monitor_verdict(next(make_true()), trace_ab({{1, 0}})) == Verdict3::False);
}

TEST_CASE("progression agrees with eval_trace, exhaustive small slice") {
  // All formulas of depth <= 2 over {a, b} x all traces of length <= 4.
  // The acceptance suite runs the full depth-3, length-6 enumeration.
  std::vector<Formula> depth1 = {make_true(), atom("a"), atom("b")};
  std::vector<Formula> depth2 = depth1;
  for (const auto& f : depth1) {
    depth2.push_back(negate(f));
    depth2.push_back(next(f));
    depth2.push_back(future(f));
    depth2.push_back(globally(f));
    for (const auto& g : depth1) {
      depth2.push_back(disj(f, g));
      depth2.push_back(until(f, g));
      depth2.push_back(release(f, g));
      depth2.push_back(mod_release(f, g));
    }
  }
  long checked = 0;
  for (int len = 1; len <= 4; ++len) {
    for (int bits = 0; bits < (1 << (2 * len)); ++bits) {
      std::vector<Assignment> trace;
      for (int i = 0; i < len; ++i)
        trace.push_back(ab((bits >> (2 * i)) & 1, (bits >> (2 * i + 1)) & 1));
      for (const auto& f : depth2) {
        const bool expect = eval_trace(f, trace, 0);
        const Verdict3 got = monitor_verdict(f, trace);
        REQUIRE(got == (expect ? Verdict3::True : Verdict3::False));
        ++checked;
      }
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("until/release duality on random traces") {
  hprl::Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const Formula f = random_formula(rng, 3);
    const Formula g = random_formula(rng, 3);
    const auto trace = random_trace(rng, 1 + static_cast<int>(rng.next_below(6)));
    const bool lhs = eval_trace(negate(until(f, g)), trace, 0);
    const bool rhs = eval_trace(release(negate(f), negate(g)), trace, 0);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("Rm differs from R exactly at an unmet release step") {
  // Scanning from the evaluation position while (!a & b) continues, the two
  // agree; they differ iff the first stop position has a & !b.
  hprl::Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto trace = random_trace(rng, 1 + static_cast<int>(rng.next_below(6)));
    const Formula rm = mod_release(atom("a"), atom("b"));
    const Formula r = release(atom("a"), atom("b"));
    for (std::size_t pos = 0; pos < trace.size(); ++pos) {
      const bool differ = eval_trace(rm, trace, pos) != eval_trace(r, trace, pos);
      bool expect_differ = false;
      for (std::size_t k = pos; k < trace.size(); ++k) {
        const bool a = trace[k].at("a");
        const bool b = trace[k].at("b");
        if (!a && b) continue;  // both keep scanning
        expect_differ = a && !b;
        break;
      }
      CHECK(differ == expect_differ);
    }
  }
}

TEST_CASE("simplified residual is trace-equivalent to the raw residual") {
  hprl::Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    Formula raw = random_formula(rng, 4);
    const auto prefix = random_trace(rng, 3);
    const auto cont = random_trace(rng, 1 + static_cast<int>(rng.next_below(4)));
    for (const auto& step : prefix) raw = progress_raw(raw, step);
    const Formula simp = simplify(raw);
    CHECK(eval_trace(simp, cont, 0) == eval_trace(raw, cont, 0));
  }
}

TEST_CASE("builtin specs print exactly as documented") {
  CHECK(print(builtin_spec(1)) == "G((!T_red & X T_red) -> X(!T_red Rm e_stop))");
  CHECK(print(builtin_spec(2)) ==
        "G((D_lon & X !D_lon) -> X((D_lon | L_e) Rm e_stop_lon))");
  CHECK(print(builtin_spec(3)) ==
        "G((D_lat & X !D_lat) -> X((D_lat | L_ev) Rm e_stop_lat))");
  CHECK(print(builtin_spec(4)) == "G((J_ev & prio_v_gt_e) -> (!J_ev Rm e_stop))");
  CHECK(print(builtin_spec(5)) == "G((L_e & !C_eps) -> (C_eps Rm e_stop))");
  CHECK_THROWS_AS(builtin_spec(0), std::out_of_range);
  CHECK_THROWS_AS(builtin_spec(6), std::out_of_range);
}

TEST_CASE("every builtin round-trips through parse(print(.))") {
  for (int id = 1; id <= kNumBuiltinSpecs; ++id) {
    const Formula f = builtin_spec(id);
    CHECK(structurally_equal(f, parse(print(f))));
  }
}

TEST_CASE("missing atom in an assignment is reported") {
  Monitor m(future(atom("zZ")));
  CHECK_THROWS_AS(m.progress(ab(true, true)), std::out_of_range);
}

TEST_CASE("first_violation points at the earliest failing position") {
  const Formula spec = globally(implies(atom("a"), atom("b")));
  const auto trace = trace_ab({{0, 0}, {1, 1}, {1, 0}, {1, 0}});
  CHECK_FALSE(eval_trace(spec, trace, 0));
  CHECK(first_violation(spec, trace) == 2);
}
