#pragma once

#include <optional>
#include <vector>

#include "term.hpp"

namespace contina {

// Source clause: head plus flattened body goals. Facts have an empty body
// until normalize turns them into [true].
struct Clause {
  Term head = nullptr;
  std::vector<Term> body;
};

// Binarized clause: head carries one extra trailing continuation argument,
// guards are the hoisted leading inline builtins, body is exactly one goal.
struct BinClause {
  Term head = nullptr;
  std::vector<Term> guards;
  Term body = nullptr;
};

// Inline builtins: executable as clause guards and transparent to
// binarization. Everything else gets a continuation argument.
bool is_inline_builtin(const PredKey &k);

// Splits a raw parsed clause term into head and body conjuncts.
// ':-'(H,B) flattens B on ','/2; anything else is a fact. '::-' terms must
// not be passed here (see bin_clause_from_term).
Clause clause_from_term(Term t);

// Facts become [true] bodies; variable body goals are wrapped in call/1.
// Variable heads raise instantiation_error.
Clause normalize(TermPool &pool, const Clause &c);

// Appends cont to goal: g -> g(C), g(X) -> g(X,C), Var -> call(Var,C).
// Conjunctions nest: (A,B) -> psi(A, psi(B, C)). Other control constructs
// keep their source-level arguments and gain only the continuation slot.
Term binarize_goal(TermPool &pool, Term goal, Term cont);

// The clause transformation: fresh continuation variable, maximal prefix of
// inline builtins hoisted to guards in source order ('true' dropped), the
// remaining goals nested via binarize_goal. An all-builtin body leaves
// true(Cont) as the body goal. The head's arguments are untouched except for
// the appended continuation, so first-argument indexing survives.
BinClause binarize_clause(TermPool &pool, const Clause &c);

// Clause-wise binarization, order preserved. Inputs need not be normalized.
std::vector<BinClause> binarize_program(TermPool &pool,
                                        const std::vector<Clause> &cs);

// LD-resolution composition: (A0:-A1..An) op (B0:-B1..Bm) unfolds A1 with
// mgu(A1,B0), giving (A0:-B1..Bm,A2..An) instantiated, 'true' goals dropped.
// nullopt is bottom. Operands are renamed apart internally and not mutated.
std::optional<Clause> compose(TermPool &pool, const Clause &c1,
                              const Clause &c2);

// '::-'(Head, Guards-then-body conjunction): the storage and wire shape.
Term bin_clause_term(TermPool &pool, const BinClause &bc);

// Inverse of bin_clause_term; also accepts hand-written '::-' clauses,
// re-splitting leading inline builtins into guards.
BinClause bin_clause_from_term(Term t);

// Drops the trailing continuation argument: g(X,C) -> g(X), g(C) -> g.
Term strip_last_arg(TermPool &pool, Term bin_atom);

} // namespace contina
