#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/reader.hpp"
#include "core/term.hpp"
#include "core/writer.hpp"

using namespace contina;

namespace {

Term q(TermPool &pool, const std::string &text) {
  return parse_term_text(pool, text);
}

bool all_unbound(const std::vector<Term> &vars) {
  for (Term v : vars)
    if (deref(v)->tag != Tag::Var) return false;
  return true;
}

// Random acyclic term generator used by the property tests. Shares variables
// and substructures on purpose; covers quoting and list-sugar edge cases.
struct Gen {
  std::mt19937 rng;
  TermPool &pool;
  std::vector<Term> vars;

  Gen(uint32_t seed, TermPool &p) : rng(seed), pool(p) {}

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

  Term leaf() {
    switch (pick(6)) {
    case 0: {
      if (!vars.empty() && pick(2) == 0) return vars[pick((int)vars.size())];
      Term v = pool.make_var();
      vars.push_back(v);
      return v;
    }
    case 1: return pool.make_atom("a");
    case 2: return pool.make_atom("foo_Bar9");
    case 3: return pool.make_int(pick(200) - 50);
    case 4: return pool.make_atom("Needs Quotes");
    default: {
      static const char *odd[] = {"[]", "don't", "x\ny", "=", "q w", ""};
      return pool.make_atom(odd[pick(6)]);
    }
    }
  }

  Term term(int depth) {
    if (depth <= 0 || pick(3) == 0) return leaf();
    switch (pick(4)) {
    case 0: { // proper or improper list
      int n = 1 + pick(3);
      std::vector<Term> items;
      for (int i = 0; i < n; ++i) items.push_back(term(depth - 1));
      Term tail = pick(3) == 0 ? term(depth - 1) : pool.make_atom(sym::nil());
      return pool.make_list(items, tail);
    }
    case 1:
      return pool.make_struct("f", {term(depth - 1)});
    case 2:
      return pool.make_struct("g", {term(depth - 1), term(depth - 1)});
    default:
      return pool.make_struct("Str ange",
                              {term(depth - 1), term(depth - 1), leaf()});
    }
  }

  Term fresh(int depth) {
    vars.clear();
    return term(depth);
  }
};

} // namespace

TEST_CASE("unify computes mgus and reports clashes") {
  TermPool pool;
  UndoLog log;

  Term t1 = q(pool, "f(X,b)");
  Term t2 = q(pool, "f(a,Y)");
  REQUIRE(unify(t1, t2, log));
  CHECK(canonical_text(t1) == "f(a,b)");
  CHECK(canonical_text(t2) == "f(a,b)");

  CHECK_FALSE(unify(q(pool, "f(a)"), q(pool, "g(a)"), log));

  // Hand-run Robinson unification: X=a, then a vs b clashes.
  CHECK_FALSE(unify(q(pool, "p(X,X)"), q(pool, "p(a,b)"), log));
}

TEST_CASE("failed unify restores every touched variable") {
  TermPool pool;
  UndoLog log;
  Term t1 = q(pool, "p(X,Y,Z,X)");
  Term t2 = q(pool, "p(a,g(W),h(W,b),c)");
  std::vector<Term> before = free_variables(t1);
  std::string snap1 = canonical_text(t1);
  std::string snap2 = canonical_text(t2);
  REQUIRE_FALSE(unify(t1, t2, log));
  CHECK(all_unbound(before));
  CHECK(canonical_text(t1) == snap1);
  CHECK(canonical_text(t2) == snap2);
  CHECK(log.size() == 0);
}

TEST_CASE("unify success is symmetric and instantiations are variants") {
  TermPool pool;
  Gen gen(7, pool);
  for (int i = 0; i < 2000; ++i) {
    Term a = gen.term(3);
    Term b = gen.term(3);
    Term pair_ab = pool.make_struct("p", {a, b});
    Term pair_ba = pool.make_struct("p", {b, a});
    OwnedTerm fwd(pair_ab), rev(pair_ba);

    TermPool scratch1, scratch2;
    UndoLog l1, l2;
    Term u1 = fwd.instantiate(scratch1);
    Term u2 = rev.instantiate(scratch2);
    UnifyOptions oc{.occurs_check = true};
    bool ok1 = unify(deref(u1)->args[0], deref(u1)->args[1], l1, oc);
    bool ok2 = unify(deref(u2)->args[0], deref(u2)->args[1], l2, oc);
    REQUIRE(ok1 == ok2);
    if (ok1) {
      // mgu is unique up to renaming, so both instantiated pairs agree.
      Term flip = scratch2.make_struct(
          "p", {deref(u2)->args[1], deref(u2)->args[0]});
      CHECK(canonical_text(u1) == canonical_text(flip));
    }
    pool.clear();
    gen.vars.clear();
  }
}

TEST_CASE("occurs check is off by default and available on demand") {
  TermPool pool;
  UndoLog log;
  Term x = pool.make_var();
  Term fx = pool.make_struct("f", {x});
  CHECK_FALSE(unify(x, fx, log, UnifyOptions{.occurs_check = true}));
  CHECK(deref(x)->tag == Tag::Var);

  REQUIRE(unify(x, fx, log));
  CHECK_FALSE(is_acyclic(x));
  CHECK_THROWS_AS((void)canonical_text(x), PrologError);
  CHECK_THROWS_AS((void)copy_term(pool, x), CyclicTermError);
}

TEST_CASE("rename_apart copies preserve sharing and refresh variables") {
  TermPool pool;

  Term t = q(pool, "f(X,X,Y)");
  Term c = copy_term(pool, t);
  CHECK(canonical_text(c) == "f(_V0,_V0,_V1)");
  Term cd = deref(c);
  CHECK(deref(cd->args[0]) == deref(cd->args[1]));
  CHECK(deref(cd->args[0]) != deref(deref(t)->args[0]));

  Term ground = q(pool, "a");
  CHECK(canonical_text(copy_term(pool, ground)) == "a");

  Term shared = q(pool, "[X|X]");
  Term sc = deref(copy_term(pool, shared));
  CHECK(deref(sc->args[0]) == deref(sc->args[1]));
}

TEST_CASE("canonical text follows the stated format") {
  TermPool pool;
  Term t = q(pool, "f(X,'Hello',[1,2|Y])");
  CHECK(canonical_text(t) == "f(_V0,'Hello',[1,2|_V1])");

  Term shared = parse_term_text(pool, "app([],_V0,_V0)");
  Term sd = deref(shared);
  CHECK(deref(sd->args[1]) == deref(sd->args[2]));
  CHECK(canonical_text(shared) == "app([],_V0,_V0)");

  CHECK(canonical_text(q(pool, "[]")) == "[]");
  CHECK(canonical_text(q(pool, "[a]")) == "[a]");
  CHECK(canonical_text(q(pool, "'[]'(a)")) == "'[]'(a)");
  CHECK(canonical_text(q(pool, "-3")) == "-3");
  CHECK(canonical_text(q(pool, "f(-3,'don''t','x\\ny')")) ==
        "f(-3,'don\\'t','x\\ny')");
  CHECK(canonical_text(q(pool, "'.'")) == "'.'");
  CHECK(canonical_text(q(pool, "[1|2]")) == "[1|2]");
  CHECK(canonical_text(q(pool, "f(A,B,A,B)")) == "f(_V0,_V1,_V0,_V1)");
}

TEST_CASE("operator table drives parsing") {
  TermPool pool;
  CHECK(canonical_text(q(pool, "a+b*c")) == "'+'(a,'*'(b,c))");
  CHECK(canonical_text(q(pool, "a+b+c")) == "'+'('+'(a,b),c)");
  CHECK(canonical_text(q(pool, "a-b-c")) == "'-'('-'(a,b),c)");
  CHECK(canonical_text(q(pool, "X is 1+2*3")) == "is(_V0,'+'(1,'*'(2,3)))");
  CHECK(canonical_text(q(pool, "p:-q,r")) == "':-'(p,','(q,r))");
  CHECK(canonical_text(q(pool, "h(X)::-b(X)")) == "'::-'(h(_V0),b(_V0))");
  CHECK(canonical_text(q(pool, "a->b;c")) == "';'('->'(a,b),c)");
  CHECK(canonical_text(q(pool, "a,b;c")) == "';'(','(a,b),c)");
  CHECK(canonical_text(q(pool, "a=>>b=>>c")) == "'=>>'(a,'=>>'(b,c))");
  CHECK(canonical_text(q(pool, "(a,b),c")) == "','(','(a,b),c)");
  CHECK(canonical_text(q(pool, "X=f(Y)")) == "'='(_V0,f(_V1))");
  CHECK(canonical_text(q(pool, "1<2")) == "'<'(1,2)");
  CHECK(canonical_text(q(pool, "7 mod 2")) == "mod(7,2)");
  CHECK(canonical_text(q(pool, "7//2+1")) == "'+'('//'(7,2),1)");
  CHECK_THROWS_AS((void)q(pool, "a=b=c"), PrologError);
  CHECK_THROWS_AS((void)q(pool, "f(a"), PrologError);
  CHECK_THROWS_AS((void)q(pool, ")"), PrologError);
  try {
    (void)q(pool, "f(a,)");
  } catch (const PrologError &e) {
    CHECK(e.term.rfind("syntax_error(", 0) == 0);
  }
}

TEST_CASE("programs and queries parse with per-clause variable scope") {
  TermPool pool;
  auto clauses = parse_program_text(pool, "p(X).\n% comment\nq(X):-p(X).\n");
  REQUIRE(clauses.size() == 2);
  CHECK(canonical_text(clauses[0]) == "p(_V0)");
  CHECK(canonical_text(clauses[1]) == "':-'(q(_V0),p(_V0))");

  ParsedQuery pq = parse_query_text(pool, "app(As,Bs,[1,2])");
  REQUIRE(pq.vars.size() == 2);
  CHECK(pq.vars[0].first == "As");
  CHECK(pq.vars[1].first == "Bs");
  CHECK(deref(pq.vars[0].second)->tag == Tag::Var);

  ParsedQuery anon = parse_query_text(pool, "f(_,_,X).");
  CHECK(anon.vars.size() == 1);
  Term ad = deref(anon.goal);
  CHECK(deref(ad->args[0]) != deref(ad->args[1]));
}

TEST_CASE("round-trip law holds on random terms") {
  TermPool pool;
  Gen gen(12345, pool);
  for (int i = 0; i < 10000; ++i) {
    Term t = gen.fresh(4);
    std::string text = canonical_text(t);
    TermPool back;
    Term parsed = parse_term_text(back, text);
    REQUIRE(canonical_text(parsed) == text);
    REQUIRE(is_variant(t, parsed));
    pool.clear();
  }
}

TEST_CASE("subsumption is one-sided matching") {
  TermPool pool;
  Term general = q(pool, "server_id(C,H,P)");
  Term specific = q(pool, "server_id(news,a,9001)");
  CHECK(subsumes(general, specific));
  CHECK(all_unbound(free_variables(general)));

  CHECK_FALSE(subsumes(q(pool, "f(a)"), q(pool, "f(X)")));
  // One-sided unification oracle: X cannot be both a and b.
  CHECK_FALSE(subsumes(q(pool, "f(X,X)"), q(pool, "f(a,b)")));
  CHECK(subsumes(q(pool, "f(X,X)"), q(pool, "f(a,a)")));
  CHECK(subsumes(q(pool, "f(X,Y)"), q(pool, "f(Z,Z)")));
}

TEST_CASE("subsumes implies unify on random pairs") {
  TermPool pool;
  Gen gen(99, pool);
  for (int i = 0; i < 3000; ++i) {
    Term a = gen.term(3);
    Term b = gen.term(3);
    bool sub = subsumes(a, b);
    UndoLog log;
    auto mark = log.mark();
    bool uni = unify(a, b, log);
    if (sub) CHECK(uni);
    log.undo_to(mark);
    pool.clear();
    gen.vars.clear();
  }
}

TEST_CASE("undo log reverses generic entries in reverse order") {
  UndoLog log;
  std::vector<int> order;
  log.push_undo([&] { order.push_back(1); });
  log.push_undo([&] { order.push_back(2); });
  auto mid = log.mark();
  log.push_undo([&] { order.push_back(3); });
  log.undo_to(mid);
  REQUIRE(order == std::vector<int>{3});
  log.undo_to(0);
  REQUIRE(order == (std::vector<int>{3, 2, 1}));
}

TEST_CASE("identity, variants, groundness, free variable order") {
  TermPool pool;
  Term t = q(pool, "f(X,g(Y,X),Z)");
  auto vars = free_variables(t);
  REQUIRE(vars.size() == 3);
  Term td = deref(t);
  CHECK(vars[0] == deref(td->args[0]));
  CHECK(vars[2] == deref(td->args[2]));

  CHECK(is_ground(q(pool, "f(a,[1,2],g(b))")));
  CHECK_FALSE(is_ground(t));

  CHECK(term_identical(q(pool, "f(a,1)"), q(pool, "f(a,1)")));
  Term x = pool.make_var();
  CHECK(term_identical(x, x));
  CHECK_FALSE(term_identical(pool.make_var(), pool.make_var()));

  CHECK(is_variant(q(pool, "f(X,Y)"), q(pool, "f(A,B)")));
  CHECK_FALSE(is_variant(q(pool, "f(X,X)"), q(pool, "f(A,B)")));
  CHECK_FALSE(is_variant(q(pool, "f(X,Y)"), q(pool, "f(A,A)")));
}

TEST_CASE("owned terms move graphs between pools intact") {
  TermPool pool;
  Term t = q(pool, "task(Id,[goal(Id,W)|Rest],W)");
  OwnedTerm owned(t);
  pool.clear();
  TermPool other;
  Term back = owned.instantiate(other);
  CHECK(canonical_text(back) == "task(_V0,[goal(_V0,_V1)|_V2],_V1)");
}
