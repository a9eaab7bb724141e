#include "binarizer.hpp"

#include <unordered_set>

#include "errors.hpp"

namespace contina {

namespace {

Symbol comma_sym() { return sym::comma(); }

const std::unordered_set<PredKey, PredKeyHash> &inline_set() {
  static const std::unordered_set<PredKey, PredKeyHash> s = {
      {intern("true"), 0}, {intern("fail"), 0},    {intern("is"), 2},
      {intern("="), 2},    {intern("=="), 2},      {intern("<"), 2},
      {intern(">"), 2},    {intern("=<"), 2},      {intern(">="), 2},
      {intern("=:="), 2},  {intern("=\\="), 2},    {intern("write"), 1},
      {intern("nl"), 0},   {intern("println"), 1},
  };
  return s;
}

void flatten_conj(Term t, std::vector<Term> &out) {
  t = deref(t);
  if (t->tag == Tag::Struct && t->sym == comma_sym() && t->args.size() == 2) {
    flatten_conj(t->args[0], out);
    flatten_conj(t->args[1], out);
  } else {
    out.push_back(t);
  }
}

bool is_true_atom(Term t) {
  t = deref(t);
  return t->tag == Tag::Atom && t->sym == sym::truth();
}

} // namespace

bool is_inline_builtin(const PredKey &k) { return inline_set().count(k) > 0; }

Clause clause_from_term(Term t) {
  t = deref(t);
  Clause c;
  if (t->tag == Tag::Struct && t->sym == sym::clause() && t->args.size() == 2) {
    c.head = deref(t->args[0]);
    flatten_conj(t->args[1], c.body);
  } else {
    c.head = t;
  }
  return c;
}

Clause normalize(TermPool &pool, const Clause &c) {
  Term head = deref(c.head);
  if (head->tag == Tag::Var) throw err_term("instantiation_error");
  if (head->tag == Tag::Int) throw err_term("type_error");
  Clause out;
  out.head = head;
  if (c.body.empty()) {
    out.body.push_back(pool.make_atom(sym::truth()));
    return out;
  }
  for (Term g : c.body) {
    g = deref(g);
    if (g->tag == Tag::Var)
      out.body.push_back(pool.make_struct("call", {g}));
    else if (g->tag == Tag::Int)
      throw err_term("type_error");
    else
      out.body.push_back(g);
  }
  return out;
}

Term binarize_goal(TermPool &pool, Term goal, Term cont) {
  goal = deref(goal);
  if (goal->tag == Tag::Var)
    return pool.make_struct("call", {goal, cont});
  if (goal->tag == Tag::Int) throw err_term("type_error");
  if (goal->tag == Tag::Struct && goal->sym == comma_sym() &&
      goal->args.size() == 2)
    return binarize_goal(pool, goal->args[0],
                         binarize_goal(pool, goal->args[1], cont));
  if (goal->tag == Tag::Atom)
    return pool.make_struct(goal->sym, {cont});
  std::vector<Term> args = goal->args;
  args.push_back(cont);
  return pool.make_struct(goal->sym, std::move(args));
}

BinClause binarize_clause(TermPool &pool, const Clause &raw) {
  Clause c = normalize(pool, raw);
  Term cont = pool.make_var();

  size_t split = 0;
  while (split < c.body.size() && is_inline_builtin(pred_key(c.body[split])))
    ++split;

  BinClause out;
  for (size_t i = 0; i < split; ++i)
    if (!is_true_atom(c.body[i])) out.guards.push_back(c.body[i]);

  Term body = pool.make_struct(sym::truth(), {cont});
  for (size_t i = c.body.size(); i > split; --i)
    body = i == c.body.size() ? binarize_goal(pool, c.body[i - 1], cont)
                              : binarize_goal(pool, c.body[i - 1], body);
  out.body = body;

  Term head = deref(c.head);
  if (head->tag == Tag::Atom) {
    out.head = pool.make_struct(head->sym, {cont});
  } else {
    std::vector<Term> args = head->args;
    args.push_back(cont);
    out.head = pool.make_struct(head->sym, std::move(args));
  }
  return out;
}

std::vector<BinClause> binarize_program(TermPool &pool,
                                        const std::vector<Clause> &cs) {
  std::vector<BinClause> out;
  out.reserve(cs.size());
  for (const Clause &c : cs) out.push_back(binarize_clause(pool, c));
  return out;
}

std::optional<Clause> compose(TermPool &pool, const Clause &c1,
                              const Clause &c2) {
  if (c1.body.empty()) throw err_term("instantiation_error");

  std::vector<Term> roots1;
  roots1.push_back(c1.head);
  roots1.insert(roots1.end(), c1.body.begin(), c1.body.end());
  std::vector<Term> r1 = copy_terms(pool, roots1);

  std::vector<Term> roots2;
  roots2.push_back(c2.head);
  roots2.insert(roots2.end(), c2.body.begin(), c2.body.end());
  std::vector<Term> r2 = copy_terms(pool, roots2);

  UndoLog log;
  if (!unify(r1[1], r2[0], log)) return std::nullopt;

  std::vector<Term> body;
  for (size_t i = 1; i < r2.size(); ++i) body.push_back(r2[i]);
  for (size_t i = 2; i < r1.size(); ++i) body.push_back(r1[i]);

  std::vector<Term> roots;
  roots.push_back(r1[0]);
  roots.insert(roots.end(), body.begin(), body.end());
  std::vector<Term> frozen = copy_terms(pool, roots);
  log.undo_to(0);

  Clause out;
  out.head = frozen[0];
  for (size_t i = 1; i < frozen.size(); ++i)
    if (!is_true_atom(frozen[i])) out.body.push_back(frozen[i]);
  return out;
}

Term bin_clause_term(TermPool &pool, const BinClause &bc) {
  Term body = bc.body;
  for (size_t i = bc.guards.size(); i > 0; --i)
    body = pool.make_struct(comma_sym(), {bc.guards[i - 1], body});
  return pool.make_struct(sym::bclause(), {bc.head, body});
}

BinClause bin_clause_from_term(Term t) {
  t = deref(t);
  if (!(t->tag == Tag::Struct && t->sym == sym::bclause() &&
        t->args.size() == 2))
    throw err_term("type_error");
  BinClause out;
  out.head = deref(t->args[0]);
  if (out.head->tag != Tag::Struct) throw err_term("type_error");
  Term body = deref(t->args[1]);
  while (body->tag == Tag::Struct && body->sym == comma_sym() &&
         body->args.size() == 2 &&
         is_inline_builtin(pred_key(deref(body->args[0])))) {
    out.guards.push_back(deref(body->args[0]));
    body = deref(body->args[1]);
  }
  out.body = body;
  return out;
}

Term strip_last_arg(TermPool &pool, Term bin_atom) {
  Term t = deref(bin_atom);
  if (t->tag != Tag::Struct || t->args.empty()) throw err_term("type_error");
  if (t->args.size() == 1) return pool.make_atom(t->sym);
  std::vector<Term> args(t->args.begin(), t->args.end() - 1);
  return pool.make_struct(t->sym, std::move(args));
}

} // namespace contina
