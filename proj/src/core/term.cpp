#include "term.hpp"

#include <atomic>
#include <unordered_map>
#include <unordered_set>

namespace contina {

namespace {
std::atomic<uint64_t> g_var_counter{0};
}

Cell *TermPool::fresh() {
  cells_.emplace_back();
  return &cells_.back();
}

Term TermPool::make_var() {
  Cell *c = fresh();
  c->tag = Tag::Var;
  c->var_id = g_var_counter.fetch_add(1, std::memory_order_relaxed);
  return c;
}

Term TermPool::make_atom(Symbol s) {
  Cell *c = fresh();
  c->tag = Tag::Atom;
  c->sym = s;
  return c;
}

Term TermPool::make_int(int64_t v) {
  Cell *c = fresh();
  c->tag = Tag::Int;
  c->ival = v;
  return c;
}

Term TermPool::make_struct(Symbol f, std::vector<Term> args) {
  if (args.empty())
    return make_atom(f);
  Cell *c = fresh();
  c->tag = Tag::Struct;
  c->sym = f;
  c->args = std::move(args);
  return c;
}

Term TermPool::make_list(std::span<const Term> items, Term tail) {
  Term t = tail ? tail : make_atom(sym::nil());
  for (size_t i = items.size(); i-- > 0;)
    t = make_cons(items[i], t);
  return t;
}

Term deref(Term t) {
  while (t->tag == Tag::Var && t->ref)
    t = t->ref;
  return t;
}

bool is_atom(Term t, Symbol s) {
  t = deref(t);
  return t->tag == Tag::Atom && t->sym == s;
}

bool is_callable(Term t) {
  t = deref(t);
  return t->tag == Tag::Atom || t->tag == Tag::Struct;
}

bool is_nil(Term t) { return is_atom(t, sym::nil()); }

bool is_cons(Term t) {
  t = deref(t);
  return t->tag == Tag::Struct && t->sym == sym::dot() && t->args.size() == 2;
}

PredKey pred_key(Term callable) {
  Term t = deref(callable);
  if (t->tag == Tag::Atom)
    return {t->sym, 0};
  return {t->sym, static_cast<uint32_t>(t->args.size())};
}

std::string pred_key_name(const PredKey &k) {
  return symbol_name(k.functor) + "/" + std::to_string(k.arity);
}

void UndoLog::undo_to(Mark m) {
  while (entries_.size() > m) {
    Entry &e = entries_.back();
    if (e.var)
      e.var->ref = nullptr;
    else
      e.undo();
    entries_.pop_back();
  }
}

void bind(Term var, Term value, UndoLog &log) {
  var->ref = value;
  log.push_binding(var);
}

namespace {

bool occurs_in(Term var, Term t) {
  t = deref(t);
  if (t == var)
    return true;
  if (t->tag != Tag::Struct)
    return false;
  for (Term a : t->args)
    if (occurs_in(var, a))
      return true;
  return false;
}

} // namespace

bool unify(Term t1, Term t2, UndoLog &log, const UnifyOptions &opt) {
  UndoLog::Mark entry = log.mark();
  std::vector<std::pair<Term, Term>> stack;
  stack.emplace_back(t1, t2);
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    a = deref(a);
    b = deref(b);
    if (a == b)
      continue;
    if (a->tag == Tag::Var) {
      if (opt.occurs_check && occurs_in(a, b))
        goto fail;
      bind(a, b, log);
      continue;
    }
    if (b->tag == Tag::Var) {
      if (opt.occurs_check && occurs_in(b, a))
        goto fail;
      bind(b, a, log);
      continue;
    }
    if (a->tag != b->tag)
      goto fail;
    switch (a->tag) {
    case Tag::Atom:
      if (a->sym != b->sym)
        goto fail;
      break;
    case Tag::Int:
      if (a->ival != b->ival)
        goto fail;
      break;
    case Tag::Struct:
      if (a->sym != b->sym || a->args.size() != b->args.size())
        goto fail;
      for (size_t i = a->args.size(); i-- > 0;)
        stack.emplace_back(a->args[i], b->args[i]);
      break;
    default:
      goto fail;
    }
  }
  return true;
fail:
  log.undo_to(entry);
  return false;
}

bool subsumes(Term general, Term specific) {
  // Skolemize specific's variables, then check plain unifiability. All
  // bindings (skolems included) are undone before returning.
  UndoLog log;
  TermPool scratch;
  size_t n = 0;
  for (Term v : free_variables(specific)) {
    bind(v, scratch.make_atom(intern("$sk" + std::to_string(n++))), log);
  }
  bool ok = unify(general, specific, log);
  log.undo_to(0);
  return ok;
}

bool term_identical(Term a, Term b) {
  a = deref(a);
  b = deref(b);
  if (a == b)
    return true;
  if (a->tag != b->tag)
    return false;
  switch (a->tag) {
  case Tag::Var:
    return false; // distinct cells
  case Tag::Atom:
    return a->sym == b->sym;
  case Tag::Int:
    return a->ival == b->ival;
  case Tag::Struct: {
    if (a->sym != b->sym || a->args.size() != b->args.size())
      return false;
    for (size_t i = 0; i < a->args.size(); ++i)
      if (!term_identical(a->args[i], b->args[i]))
        return false;
    return true;
  }
  }
  return false;
}

namespace {

struct Copier {
  explicit Copier(TermPool &d) : dst(d) {}
  TermPool &dst;
  std::unordered_map<Term, Term> var_map;
  std::unordered_map<Term, Term> done;       // struct memoization (sharing)
  std::unordered_set<Term> on_path;          // cycle detection

  Term copy(Term t) {
    t = deref(t);
    switch (t->tag) {
    case Tag::Var: {
      auto it = var_map.find(t);
      if (it != var_map.end())
        return it->second;
      Term v = dst.make_var();
      var_map.emplace(t, v);
      return v;
    }
    case Tag::Atom:
      return dst.make_atom(t->sym);
    case Tag::Int:
      return dst.make_int(t->ival);
    case Tag::Struct: {
      auto hit = done.find(t);
      if (hit != done.end())
        return hit->second;
      if (!on_path.insert(t).second)
        throw CyclicTermError();
      std::vector<Term> args;
      args.reserve(t->args.size());
      for (Term a : t->args)
        args.push_back(copy(a));
      on_path.erase(t);
      Term s = dst.make_struct(t->sym, std::move(args));
      done.emplace(t, s);
      return s;
    }
    }
    return nullptr;
  }
};

} // namespace

Term copy_term(TermPool &dst, Term t) {
  Copier c(dst);
  return c.copy(t);
}

std::vector<Term> copy_terms(TermPool &dst, std::span<const Term> ts) {
  Copier c(dst);
  std::vector<Term> out;
  out.reserve(ts.size());
  for (Term t : ts)
    out.push_back(c.copy(t));
  return out;
}

namespace {

bool acyclic_walk(Term t, std::unordered_set<Term> &path) {
  t = deref(t);
  if (t->tag != Tag::Struct)
    return true;
  if (!path.insert(t).second)
    return false;
  for (Term a : t->args)
    if (!acyclic_walk(a, path))
      return false;
  path.erase(t);
  return true;
}

} // namespace

bool is_acyclic(Term t) {
  std::unordered_set<Term> path;
  return acyclic_walk(t, path);
}

bool is_ground(Term t) {
  t = deref(t);
  if (t->tag == Tag::Var)
    return false;
  if (t->tag != Tag::Struct)
    return true;
  for (Term a : t->args)
    if (!is_ground(a))
      return false;
  return true;
}

namespace {

void collect_vars(Term t, std::vector<Term> &out,
                  std::unordered_set<Term> &seen,
                  std::unordered_set<Term> &path) {
  t = deref(t);
  if (t->tag == Tag::Var) {
    if (seen.insert(t).second)
      out.push_back(t);
    return;
  }
  if (t->tag != Tag::Struct)
    return;
  if (!path.insert(t).second)
    return; // tolerate cycles; caller guards where it matters
  for (Term a : t->args)
    collect_vars(a, out, seen, path);
  path.erase(t);
}

} // namespace

std::vector<Term> free_variables(Term t) {
  std::vector<Term> out;
  std::unordered_set<Term> seen, path;
  collect_vars(t, out, seen, path);
  return out;
}

namespace {

bool variant_walk(Term a, Term b, std::unordered_map<Term, Term> &ab,
                  std::unordered_map<Term, Term> &ba) {
  a = deref(a);
  b = deref(b);
  if (a->tag != b->tag)
    return false;
  switch (a->tag) {
  case Tag::Var: {
    auto ia = ab.find(a);
    auto ib = ba.find(b);
    if (ia == ab.end() && ib == ba.end()) {
      ab.emplace(a, b);
      ba.emplace(b, a);
      return true;
    }
    return ia != ab.end() && ib != ba.end() && ia->second == b &&
           ib->second == a;
  }
  case Tag::Atom:
    return a->sym == b->sym;
  case Tag::Int:
    return a->ival == b->ival;
  case Tag::Struct: {
    if (a->sym != b->sym || a->args.size() != b->args.size())
      return false;
    for (size_t i = 0; i < a->args.size(); ++i)
      if (!variant_walk(a->args[i], b->args[i], ab, ba))
        return false;
    return true;
  }
  }
  return false;
}

} // namespace

bool is_variant(Term a, Term b) {
  std::unordered_map<Term, Term> ab, ba;
  return variant_walk(a, b, ab, ba);
}

} // namespace contina
