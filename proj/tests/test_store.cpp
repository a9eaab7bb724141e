#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "core/binarizer.hpp"
#include "core/reader.hpp"
#include "core/store.hpp"
#include "core/writer.hpp"

using namespace contina;

namespace {

std::vector<BinClause> binarize_text(TermPool &pool, std::string_view text) {
  std::vector<Clause> cs;
  for (Term t : parse_program_text(pool, text))
    cs.push_back(clause_from_term(t));
  return binarize_program(pool, cs);
}

PredKey binkey(const char *name, uint32_t source_arity) {
  return PredKey{intern(name), source_arity + 1};
}

std::vector<std::string> rep_texts(Store &st, const PredKey &k) {
  TermPool scratch;
  std::vector<std::string> out;
  auto reps = st.clause_reps(scratch, k);
  if (!reps) return out;
  for (Term t : *reps) out.push_back(canonical_text(t));
  return out;
}

} // namespace

TEST_CASE("assert order and front insertion") {
  Store st;
  TermPool pool;
  auto bcs = binarize_text(pool, "f(1).\nf(2).\n");
  st.assert_clause(false, bcs[0]);
  st.assert_clause(false, bcs[1]);
  auto texts = rep_texts(st, binkey("f", 1));
  REQUIRE(texts.size() == 2);
  CHECK(texts[0].find("f(1") != std::string::npos);
  CHECK(texts[1].find("f(2") != std::string::npos);

  auto front = binarize_text(pool, "f(0).\n");
  st.assert_clause(true, front[0]);
  texts = rep_texts(st, binkey("f", 1));
  REQUIRE(texts.size() == 3);
  CHECK(texts[0].find("f(0") != std::string::npos);
}

TEST_CASE("clauses for the stop sentinel are rejected") {
  Store st;
  TermPool pool;
  BinClause bc;
  bc.head = pool.make_struct("$stop", {pool.make_var()});
  bc.body = pool.make_struct("true", {pool.make_var()});
  CHECK_THROWS_WITH(st.assert_clause(false, bc),
                    doctest::Contains("reserved"));
}

TEST_CASE("thermostat follows the scripted event streams") {
  Store st;
  TermPool pool;
  auto bcs = binarize_text(pool, "f(a).\nf(b).\n");
  PredKey k = binkey("f", 1);
  st.assert_clause(false, bcs[0]);
  st.assert_clause(false, bcs[1]);

  // Two loads: temperature 16, interpreted.
  auto info = st.info(k);
  REQUIRE(info.has_value());
  CHECK(info->tier == Tier::Interpreted);
  CHECK(info->stats.temperature == doctest::Approx(16));
  CHECK(info->stats.updates == 2);

  // Sixteen update-free calls cool it to zero and promote.
  for (int i = 0; i < 16; ++i) {
    st.record_call(k);
    st.maybe_promote(k);
  }
  info = st.info(k);
  CHECK(info->tier == Tier::Indexed);
  CHECK(info->stats.temperature == doctest::Approx(0));
  CHECK(info->stats.calls == 16);

  // Extra calls never drive the temperature negative.
  st.record_call(k);
  info = st.info(k);
  CHECK(info->stats.temperature == doctest::Approx(0));

  // An update reheats and demotes.
  auto more = binarize_text(pool, "f(c).\n");
  st.assert_clause(false, more[0]);
  info = st.info(k);
  CHECK(info->tier == Tier::Interpreted);
  CHECK(info->stats.temperature == doctest::Approx(8));
}

TEST_CASE("volatile predicates never promote") {
  // One update per seven calls keeps the temperature above zero forever.
  Store st;
  TermPool pool;
  auto bcs = binarize_text(pool, "g(a).\ng(b).\n");
  PredKey k = binkey("g", 1);
  st.assert_clause(false, bcs[0]);
  st.assert_clause(false, bcs[1]);
  for (int round = 0; round < 40; ++round) {
    st.record_update(k);
    for (int c = 0; c < 7; ++c) {
      st.record_call(k);
      st.maybe_promote(k);
    }
    CHECK(st.info(k)->tier == Tier::Interpreted);
  }
}

TEST_CASE("single-clause predicates stay interpreted") {
  Store st;
  TermPool pool;
  auto bcs = binarize_text(pool, "h(a).\n");
  PredKey k = binkey("h", 1);
  st.assert_clause(false, bcs[0]);
  for (int i = 0; i < 64; ++i) {
    st.record_call(k);
    st.maybe_promote(k);
  }
  CHECK(st.info(k)->tier == Tier::Interpreted);
}

TEST_CASE("promotion and demotion fire events") {
  Store st;
  std::vector<std::string> events;
  st.set_event_sink([&](std::string kind, std::string detail) {
    events.push_back(kind + " " + detail);
  });
  TermPool pool;
  auto bcs = binarize_text(pool, "e(a).\ne(b).\n");
  PredKey k = binkey("e", 1);
  st.assert_clause(false, bcs[0]);
  st.assert_clause(false, bcs[1]);
  for (int i = 0; i < 16; ++i) {
    st.record_call(k);
    st.maybe_promote(k);
  }
  st.record_update(k);
  REQUIRE(events.size() == 2);
  CHECK(events[0] == "promote e/2");
  CHECK(events[1] == "demote e/2");
}

TEST_CASE("indexed lookup discriminates on the first argument") {
  Store st(ThermoConfig{}, TierPolicy::ForceIndexed);
  TermPool pool;
  auto bcs = binarize_text(pool,
                           "app([], Ys, Ys).\n"
                           "app([X|Xs], Ys, [X|Zs]) :- app(Xs, Ys, Zs).\n");
  for (auto &bc : bcs) st.assert_clause(false, bc);

  Term nil_goal = parse_term_text(pool, "app([], A, B, C)");
  auto hits = st.lookup(nil_goal);
  REQUIRE(hits.has_value());
  CHECK(hits->size() == 1);

  Term cons_goal = parse_term_text(pool, "app([1|T], A, B, C)");
  hits = st.lookup(cons_goal);
  REQUIRE(hits.has_value());
  CHECK(hits->size() == 1);

  Term var_goal = parse_term_text(pool, "app(V, A, B, C)");
  hits = st.lookup(var_goal);
  REQUIRE(hits.has_value());
  CHECK(hits->size() == 2);

  Term unknown = parse_term_text(pool, "nosuch(V, C)");
  CHECK_FALSE(st.lookup(unknown).has_value());
}

TEST_CASE("indexed lookup equals the interpreted scan on random programs") {
  std::mt19937 rng(20260816);
  for (int round = 0; round < 30; ++round) {
    Store plain;
    Store indexed(ThermoConfig{}, TierPolicy::ForceIndexed);
    TermPool pool;
    std::string text;
    int clause_count = 3 + int(rng() % 6);
    for (int i = 0; i < clause_count; ++i) {
      switch (rng() % 4) {
      case 0: text += "r(k" + std::to_string(rng() % 3) + ", v).\n"; break;
      case 1: text += "r(" + std::to_string(rng() % 3) + ", w).\n"; break;
      case 2: text += "r(X, X).\n"; break;
      default: text += "r(f(k" + std::to_string(rng() % 2) + "), u).\n"; break;
      }
    }
    auto bcs = binarize_text(pool, text);
    for (auto &bc : bcs) {
      plain.assert_clause(false, bc);
      indexed.assert_clause(false, bc);
    }
    const char *goals[] = {"r(k0, A, C)",      "r(k1, A, C)", "r(2, A, C)",
                           "r(f(k0), A, C)",   "r(V, A, C)",  "r(f(V), A, C)"};
    for (const char *gtext : goals) {
      Term goal = parse_term_text(pool, gtext);
      auto a = plain.lookup(goal);
      auto b = indexed.lookup(goal);
      REQUIRE(a.has_value());
      REQUIRE(b.has_value());
      // The indexed result keeps source order and must contain every clause
      // whose head can unify; the interpreted scan is the full list.
      std::vector<std::string> unifiable;
      for (const ClausePtr &c : *a) {
        TermPool scratch;
        BinClause inst = c->instantiate(scratch);
        UndoLog log;
        if (unify(inst.head, goal, log)) unifiable.push_back(
            canonical_text(inst.head));
        log.undo_to(0);
      }
      std::vector<std::string> indexed_unifiable;
      for (const ClausePtr &c : *b) {
        TermPool scratch;
        BinClause inst = c->instantiate(scratch);
        UndoLog log;
        if (unify(inst.head, goal, log)) indexed_unifiable.push_back(
            canonical_text(inst.head));
        log.undo_to(0);
      }
      CHECK(unifiable == indexed_unifiable);
    }
  }
}

TEST_CASE("take_matching removes and returns the first match") {
  Store st;
  TermPool pool;
  auto bcs = binarize_text(pool, "f(1).\nf(2).\n");
  st.assert_clause(false, bcs[0]);
  st.assert_clause(false, bcs[1]);

  Term pat = parse_term_text(pool, "'::-'(f(X, C), true(C))");
  ClausePtr taken = st.take_matching(pat);
  REQUIRE(taken != nullptr);
  TermPool scratch;
  CHECK(canonical_text(taken->rep(scratch)).find("f(1") != std::string::npos);
  CHECK(rep_texts(st, binkey("f", 1)).size() == 1);

  Term pat9 = parse_term_text(pool, "'::-'(f(9, C), true(C))");
  CHECK(st.take_matching(pat9) == nullptr);

  CHECK(st.take_matching(pat) != nullptr);
  CHECK(st.take_matching(pat) == nullptr);
}

TEST_CASE("retract from an indexed predicate demotes it") {
  Store st;
  TermPool pool;
  auto bcs = binarize_text(pool, "f(a).\nf(b).\n");
  PredKey k = binkey("f", 1);
  for (auto &bc : bcs) st.assert_clause(false, bc);
  for (int i = 0; i < 16; ++i) {
    st.record_call(k);
    st.maybe_promote(k);
  }
  REQUIRE(st.info(k)->tier == Tier::Indexed);
  Term pat = parse_term_text(pool, "'::-'(f(a, C), true(C))");
  CHECK(st.retract_clause(pat));
  CHECK(st.info(k)->tier == Tier::Interpreted);
}

TEST_CASE("origin is recorded per predicate") {
  Store st;
  TermPool pool;
  auto bcs = binarize_text(pool, "f(1).\n");
  st.assert_clause(false, bcs[0], "fetched:cb:base:9000");
  auto info = st.info(binkey("f", 1));
  REQUIRE(info.has_value());
  CHECK(info->origin == "fetched:cb:base:9000");
  CHECK(info->tier == Tier::Interpreted);
}
