#include <chrono>
#include <thread>

#include "runtime.hpp"
#include "writer.hpp"

namespace contina {

namespace {

Term arg_of(Term g, size_t i) { return deref(deref(g)->args[i]); }
Term raw_arg(Term g, size_t i) { return deref(g)->args[i]; }
Term cont_of(Term g) { return deref(g)->args.back(); }

struct Ops {
  Symbol plus = intern("+");
  Symbol minus = intern("-");
  Symbol times = intern("*");
  Symbol idiv = intern("//");
  Symbol sdiv = intern("/");
  Symbol mod = intern("mod");
  Symbol lt = intern("<");
  Symbol gt = intern(">");
  Symbol le = intern("=<");
  Symbol ge = intern(">=");
  Symbol aeq = intern("=:=");
  Symbol ane = intern("=\\=");
  Symbol unif = intern("=");
  Symbol ident = intern("==");
  Symbol is = intern("is");
  Symbol fail = intern("fail");
  Symbol false_ = intern("false");
  Symbol write = intern("write");
  Symbol nl = intern("nl");
  Symbol println = intern("println");
  Symbol arrow = intern("->");
  Symbol end_cont = intern("end_cont");
  Symbol get_cont = intern("get_cont");
  Symbol call_cont = intern("call_cont");
  Symbol strip_cont = intern("strip_cont");
  Symbol consume_cont = intern("consume_cont");
};

const Ops &ops() {
  static const Ops o;
  return o;
}

int64_t eval_arith(Term t) {
  t = deref(t);
  switch (t->tag) {
  case Tag::Var:
    throw PrologError("instantiation_error");
  case Tag::Int:
    return t->ival;
  case Tag::Atom:
    throw PrologError("type_error(evaluable)");
  case Tag::Struct:
    break;
  }
  const Ops &o = ops();
  const auto &as = t->args;
  if (as.size() == 1) {
    int64_t x = eval_arith(as[0]);
    if (t->sym == o.minus) return -x;
    if (t->sym == o.plus) return x;
    throw PrologError("type_error(evaluable)");
  }
  if (as.size() == 2) {
    int64_t a = eval_arith(as[0]);
    int64_t b = eval_arith(as[1]);
    if (t->sym == o.plus) return a + b;
    if (t->sym == o.minus) return a - b;
    if (t->sym == o.times) return a * b;
    if (t->sym == o.idiv || t->sym == o.sdiv) {
      if (b == 0) throw PrologError("evaluation_error(zero_divisor)");
      return a / b;
    }
    if (t->sym == o.mod) {
      if (b == 0) throw PrologError("evaluation_error(zero_divisor)");
      int64_t r = a % b;
      if (r != 0 && ((r < 0) != (b < 0))) r += b;
      return r;
    }
  }
  throw PrologError("type_error(evaluable)");
}

bool arith_compare(Symbol op, Term l, Term r) {
  const Ops &o = ops();
  int64_t a = eval_arith(l);
  int64_t b = eval_arith(r);
  if (op == o.lt) return a < b;
  if (op == o.gt) return a > b;
  if (op == o.le) return a <= b;
  if (op == o.ge) return a >= b;
  if (op == o.aeq) return a == b;
  if (op == o.ane) return a != b;
  throw PrologError("type_error(evaluable)");
}

int64_t need_handle(Term t) {
  Term d = deref(t);
  if (d->tag == Tag::Var) throw PrologError("instantiation_error");
  if (d->tag != Tag::Int) throw PrologError("type_error(handle)");
  return d->ival;
}

int64_t need_int(Term t) {
  Term d = deref(t);
  if (d->tag == Tag::Var) throw PrologError("instantiation_error");
  if (d->tag != Tag::Int) throw PrologError("type_error(integer)");
  return d->ival;
}

Engine &need_engine(Runtime &rt, Term handle_term) {
  Engine *eng = rt.engine(need_handle(handle_term));
  if (!eng) throw PrologError("stale_handle");
  return *eng;
}

// Adds extra arguments to a callable (the call/N argument application).
Term apply_extra(TermPool &pool, Term target, std::vector<Term> extra) {
  Term t = deref(target);
  if (t->tag == Tag::Var) throw PrologError("instantiation_error");
  if (extra.empty()) {
    if (t->tag == Tag::Atom || t->tag == Tag::Struct) return t;
    throw PrologError("type_error(callable)");
  }
  if (t->tag == Tag::Atom) return pool.make_struct(t->sym, std::move(extra));
  if (t->tag == Tag::Struct) {
    std::vector<Term> args = t->args;
    for (Term x : extra) args.push_back(x);
    return pool.make_struct(t->sym, std::move(args));
  }
  throw PrologError("type_error(callable)");
}

// Right fold of goals into a ','/2 conjunction; empty folds to 'true'.
Term fold_conj(TermPool &pool, const std::vector<Term> &goals) {
  if (goals.empty()) return pool.make_atom(sym::truth());
  Term acc = goals.back();
  for (size_t i = goals.size() - 1; i-- > 0;)
    acc = pool.make_struct(sym::comma(), {goals[i], acc});
  return acc;
}

BinClause to_bin_clause(TermPool &pool, Term t) {
  Term d = deref(t);
  if (d->tag == Tag::Struct && d->sym == sym::bclause() && d->args.size() == 2)
    return bin_clause_from_term(d);
  return binarize_clause(pool, normalize(pool, clause_from_term(d)));
}

// If-then-else over a token'd barrier frame: the else branch sits below the
// barrier, '$ite_then' commits by cutting back to it.
bool start_ite(Engine &e, Term c, Term t, Term els, Term k) {
  TermPool &pool = e.pool();
  uint64_t tok = e.fresh_token();
  e.push_alt(binarize_goal(pool, els, k), tok);
  Term marker =
      pool.make_struct("$ite_then", {pool.make_int(int64_t(tok)), t, k});
  e.set_goal(binarize_goal(pool, c, marker));
  return true;
}

bool is_cont_machinery(Term t) {
  const Ops &o = ops();
  size_t n = t->args.size();
  return (t->sym == o.get_cont && n == 2) ||
         (t->sym == o.call_cont && n == 2) ||
         (t->sym == o.strip_cont && n == 4) ||
         (t->sym == o.consume_cont && n == 3);
}

} // namespace

bool eval_guard(Engine &e, Term guard) {
  Term g = deref(guard);
  const Ops &o = ops();
  if (g->tag == Tag::Atom) {
    if (g->sym == sym::truth()) return true;
    if (g->sym == o.fail || g->sym == o.false_) return false;
    if (g->sym == o.nl) {
      e.runtime().out() << '\n';
      return true;
    }
    throw PrologError("type_error(guard)");
  }
  if (g->tag != Tag::Struct) throw PrologError("type_error(guard)");
  const auto &as = g->args;
  if (as.size() == 1) {
    if (g->sym == o.write) {
      e.runtime().out() << canonical_text(as[0]);
      return true;
    }
    if (g->sym == o.println) {
      e.runtime().out() << canonical_text(as[0]) << '\n';
      e.runtime().out().flush();
      return true;
    }
  }
  if (as.size() == 2) {
    if (g->sym == o.unif) return e.unify_terms(as[0], as[1]);
    if (g->sym == o.ident) return term_identical(as[0], as[1]);
    if (g->sym == o.is)
      return e.unify_terms(as[0], e.pool().make_int(eval_arith(as[1])));
    if (g->sym == o.lt || g->sym == o.gt || g->sym == o.le || g->sym == o.ge ||
        g->sym == o.aeq || g->sym == o.ane)
      return arith_compare(g->sym, as[0], as[1]);
  }
  throw PrologError("type_error(guard)");
}

void register_core_builtins(Runtime &rt) {
  auto reg = [&rt](const char *n, uint32_t a, Builtin f) {
    rt.register_builtin(n, a, std::move(f));
  };

  // Control.
  reg("true", 1, [](Engine &e, Term g) {
    e.set_goal(cont_of(g));
    return true;
  });
  reg("fail", 1, [](Engine &, Term) { return false; });
  reg("false", 1, [](Engine &, Term) { return false; });

  reg(",", 3, [](Engine &e, Term g) {
    Term rest = binarize_goal(e.pool(), raw_arg(g, 1), cont_of(g));
    e.set_goal(binarize_goal(e.pool(), raw_arg(g, 0), rest));
    return true;
  });

  reg(";", 3, [](Engine &e, Term g) {
    Term l = arg_of(g, 0);
    Term r = raw_arg(g, 1);
    Term k = cont_of(g);
    if (l->tag == Tag::Struct && l->sym == ops().arrow && l->args.size() == 2)
      return start_ite(e, l->args[0], l->args[1], r, k);
    e.push_alt(binarize_goal(e.pool(), r, k));
    e.set_goal(binarize_goal(e.pool(), l, k));
    return true;
  });

  reg("->", 3, [](Engine &e, Term g) {
    return start_ite(e, raw_arg(g, 0), raw_arg(g, 1),
                     e.pool().make_atom("fail"), cont_of(g));
  });

  reg("$ite_then", 3, [](Engine &e, Term g) {
    e.commit_to(uint64_t(need_int(raw_arg(g, 0))));
    e.set_goal(binarize_goal(e.pool(), raw_arg(g, 1), raw_arg(g, 2)));
    return true;
  });

  for (uint32_t ar = 2; ar <= 9; ++ar) {
    reg("call", ar, [](Engine &e, Term g) {
      const auto &as = deref(g)->args;
      std::vector<Term> extra(as.begin() + 1, as.end() - 1);
      Term built = apply_extra(e.pool(), as[0], std::move(extra));
      e.set_goal(binarize_goal(e.pool(), built, as.back()));
      return true;
    });
  }

  reg("findall", 4, [](Engine &e, Term g) {
    Term x = raw_arg(g, 0);
    Term goal = raw_arg(g, 1);
    Term l = raw_arg(g, 2);
    auto inner =
        e.runtime().make_engine(e.runtime().config().default_caps, &e);
    inner->load(goal, x);
    std::vector<OwnedTerm> rs;
    while (auto r = inner->ask()) rs.push_back(std::move(*r));
    std::vector<Term> items;
    items.reserve(rs.size());
    for (auto &o : rs) items.push_back(o.instantiate(e.pool()));
    if (!e.unify_terms(l, e.pool().make_list(items))) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  // Unification, identity, arithmetic.
  reg("=", 3, [](Engine &e, Term g) {
    if (!e.unify_terms(raw_arg(g, 0), raw_arg(g, 1))) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("==", 3, [](Engine &e, Term g) {
    if (!term_identical(raw_arg(g, 0), raw_arg(g, 1))) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("is", 3, [](Engine &e, Term g) {
    Term v = e.pool().make_int(eval_arith(raw_arg(g, 1)));
    if (!e.unify_terms(raw_arg(g, 0), v)) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  for (const char *cmp : {"<", ">", "=<", ">=", "=:=", "=\\="}) {
    reg(cmp, 3, [](Engine &e, Term g) {
      if (!arith_compare(deref(g)->sym, raw_arg(g, 0), raw_arg(g, 1)))
        return false;
      e.set_goal(cont_of(g));
      return true;
    });
  }

  // Output.
  reg("write", 2, [](Engine &e, Term g) {
    e.runtime().out() << canonical_text(raw_arg(g, 0));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("nl", 1, [](Engine &e, Term g) {
    e.runtime().out() << '\n';
    e.set_goal(cont_of(g));
    return true;
  });
  reg("println", 2, [](Engine &e, Term g) {
    e.runtime().out() << canonical_text(raw_arg(g, 0)) << '\n';
    e.runtime().out().flush();
    e.set_goal(cont_of(g));
    return true;
  });

  // Database.
  auto do_assert = [](Engine &e, Term g, bool front) {
    BinClause bc = to_bin_clause(e.pool(), raw_arg(g, 0));
    e.runtime().store().assert_clause(front, bc, "local");
    e.set_goal(cont_of(g));
    return true;
  };
  reg("assert", 2, [do_assert](Engine &e, Term g) { return do_assert(e, g, false); });
  reg("assertz", 2, [do_assert](Engine &e, Term g) { return do_assert(e, g, false); });
  reg("asserta", 2, [do_assert](Engine &e, Term g) { return do_assert(e, g, true); });
  reg("retract", 2, [](Engine &e, Term g) {
    BinClause bc = to_bin_clause(e.pool(), raw_arg(g, 0));
    Term rep = bin_clause_term(e.pool(), bc);
    auto taken = e.runtime().store().take_matching(rep);
    if (!taken) return false;
    if (!e.unify_terms(rep, taken->rep(e.pool()))) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  reg("stats", 6, [](Engine &e, Term g) {
    Term fn = arg_of(g, 0);
    if (fn->tag != Tag::Struct || fn->sym != intern("/") ||
        fn->args.size() != 2)
      throw PrologError("type_error(predicate_indicator)");
    Term name = deref(fn->args[0]);
    Term arity = deref(fn->args[1]);
    if (name->tag != Tag::Atom || arity->tag != Tag::Int)
      throw PrologError("type_error(predicate_indicator)");
    auto info = e.runtime().store().info(
        PredKey{name->sym, uint32_t(arity->ival)});
    if (!info) return false;
    TermPool &pool = e.pool();
    Term tier = pool.make_atom(info->tier == Tier::Indexed ? "indexed"
                                                           : "interpreted");
    int64_t temp = int64_t(info->stats.temperature + 0.5);
    bool ok = e.unify_terms(raw_arg(g, 1), tier) &&
              e.unify_terms(raw_arg(g, 2), pool.make_int(temp)) &&
              e.unify_terms(raw_arg(g, 3),
                            pool.make_int(int64_t(info->stats.calls))) &&
              e.unify_terms(raw_arg(g, 4),
                            pool.make_int(int64_t(info->stats.updates)));
    if (!ok) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  // Engines.
  reg("create_engine", 2, [](Engine &e, Term g) {
    int64_t h =
        e.runtime().new_engine_handle(e.runtime().config().default_caps);
    if (!e.unify_terms(raw_arg(g, 0), e.pool().make_int(h))) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("create_engine", 5, [](Engine &e, Term g) {
    EngineCaps caps;
    caps.heap_cells = size_t(need_int(raw_arg(g, 0)));
    caps.cp_depth = size_t(need_int(raw_arg(g, 1)));
    caps.trail_len = size_t(need_int(raw_arg(g, 2)));
    int64_t h = e.runtime().new_engine_handle(caps);
    if (!e.unify_terms(raw_arg(g, 3), e.pool().make_int(h))) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("load_engine", 4, [](Engine &e, Term g) {
    Engine &eng = need_engine(e.runtime(), raw_arg(g, 0));
    if (&eng == &e) throw PrologError("permission_error(load_engine)");
    eng.load(raw_arg(g, 1), raw_arg(g, 2));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("ask_engine", 3, [](Engine &e, Term g) {
    Engine &eng = need_engine(e.runtime(), raw_arg(g, 0));
    if (&eng == &e) throw PrologError("permission_error(ask_engine)");
    auto r = eng.ask();
    Term result = r ? e.pool().make_struct("the", {r->instantiate(e.pool())})
                    : e.pool().make_atom("no");
    if (!e.unify_terms(raw_arg(g, 1), result)) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("destroy_engine", 2, [](Engine &e, Term g) {
    e.runtime().destroy_engine(need_handle(raw_arg(g, 0)));
    e.set_goal(cont_of(g));
    return true;
  });

  // Threads.
  reg("ask_thread", 3, [](Engine &e, Term g) {
    int64_t th = e.runtime().ask_thread(need_handle(raw_arg(g, 0)));
    if (!e.unify_terms(raw_arg(g, 1), e.pool().make_int(th))) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("thread_join", 2, [](Engine &e, Term g) {
    e.runtime().thread_join(need_handle(raw_arg(g, 0)));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("thread_suspend", 2, [](Engine &e, Term g) {
    e.runtime().thread_suspend(need_handle(raw_arg(g, 0)));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("thread_resume", 2, [](Engine &e, Term g) {
    e.runtime().thread_resume(need_handle(raw_arg(g, 0)));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("thread_cancel", 2, [](Engine &e, Term g) {
    e.runtime().thread_cancel(need_handle(raw_arg(g, 0)));
    e.set_goal(cont_of(g));
    return true;
  });

  reg("synchronize_on", 4, [](Engine &e, Term g) {
    Term m = arg_of(g, 0);
    if (!is_ground(m)) throw PrologError("instantiation_error");
    int64_t h = e.runtime().acquire_monitor(canonical_text(m));
    Runtime *rtp = &e.runtime();
    e.trail().push_undo([rtp, h] { rtp->release_monitor(h); });
    TermPool &pool = e.pool();
    Term done = pool.make_struct(
        "$synced",
        {pool.make_int(h), raw_arg(g, 2), raw_arg(g, 1), cont_of(g)});
    e.set_goal(binarize_goal(pool, raw_arg(g, 1), done));
    return true;
  });
  reg("$synced", 4, [](Engine &e, Term g) {
    e.runtime().release_monitor(need_handle(raw_arg(g, 0)));
    if (!e.unify_terms(raw_arg(g, 1), raw_arg(g, 2))) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  // Tuple space.
  reg("out", 2, [](Engine &e, Term g) {
    e.runtime().space().out(raw_arg(g, 0));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("in", 2, [](Engine &e, Term g) {
    OwnedTerm got = e.runtime().space().in(raw_arg(g, 0));
    if (!e.unify_terms(raw_arg(g, 0), got.instantiate(e.pool())))
      return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("rd", 2, [](Engine &e, Term g) {
    OwnedTerm got = e.runtime().space().rd(raw_arg(g, 0));
    if (!e.unify_terms(raw_arg(g, 0), got.instantiate(e.pool())))
      return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("all", 3, [](Engine &e, Term g) {
    auto rs = e.runtime().space().all(raw_arg(g, 0));
    std::vector<Term> items;
    items.reserve(rs.size());
    for (auto &o : rs) items.push_back(o.instantiate(e.pool()));
    if (!e.unify_terms(raw_arg(g, 1), e.pool().make_list(items)))
      return false;
    e.set_goal(cont_of(g));
    return true;
  });

  // Assumptions.
  reg("=>>", 3, [](Engine &e, Term g) {
    size_t id = e.add_assumption(raw_arg(g, 0), false);
    TermPool &pool = e.pool();
    Term done = pool.make_struct(
        "$popassume", {pool.make_int(int64_t(id)), cont_of(g)});
    e.set_goal(binarize_goal(pool, raw_arg(g, 1), done));
    return true;
  });
  reg("assumeal", 2, [](Engine &e, Term g) {
    e.add_assumption(raw_arg(g, 0), true);
    e.set_goal(cont_of(g));
    return true;
  });
  reg("$popassume", 2, [](Engine &e, Term g) {
    e.scope_kill(size_t(need_int(raw_arg(g, 0))));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("assumed", 2, [](Engine &e, Term g) {
    Term p = arg_of(g, 0);
    if (p->tag == Tag::Var) throw PrologError("instantiation_error");
    if (!is_callable(p)) throw PrologError("type_error(callable)");
    PredKey k = pred_key(p);
    auto alts = e.matching_assumptions(PredKey{k.functor, k.arity + 1}, true);
    if (alts.empty()) return false;
    return e.push_assumed_choice(deref(g), std::move(alts));
  });

  // Continuations.
  reg("get_cont", 2, [](Engine &e, Term g) {
    Term k = cont_of(g);
    if (!e.unify_terms(raw_arg(g, 0), k)) return false;
    e.set_goal(k);
    return true;
  });
  reg("call_cont", 2, [](Engine &e, Term g) {
    Term n = arg_of(g, 0);
    if (n->tag == Tag::Var) throw PrologError("instantiation_error");
    e.set_goal(n);
    return true;
  });
  reg("strip_cont", 4, [](Engine &e, Term g) {
    Term c = arg_of(g, 0);
    while (c->tag == Tag::Struct && is_cont_machinery(c))
      c = deref(c->args.back());
    if (c->tag != Tag::Struct) return false;
    Term goal = strip_last_arg(e.pool(), c);
    Term next = c->args.back();
    if (!e.unify_terms(raw_arg(g, 1), goal)) return false;
    if (!e.unify_terms(raw_arg(g, 2), next)) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("end_cont", 2, [](Engine &e, Term g) {
    e.set_goal(cont_of(g));
    return true;
  });
  reg("consume_cont", 3, [](Engine &e, Term g) {
    Term marker = raw_arg(g, 1);
    TermPool &pool = e.pool();
    std::vector<Term> goals;
    Term cur = cont_of(g);
    Term rest = nullptr;
    while (true) {
      cur = deref(cur);
      if (cur->tag != Tag::Struct) {
        Term err = pool.make_struct(
            "in_consume_cont",
            {pool.make_struct("expected_marker", {pool.make_var()})});
        throw PrologError(canonical_text(err));
      }
      if (cur->sym == ops().end_cont && cur->args.size() == 2 &&
          term_identical(cur->args[0], marker)) {
        rest = cur->args[1];
        break;
      }
      goals.push_back(strip_last_arg(pool, cur));
      cur = cur->args.back();
    }
    Term cs = fold_conj(pool, goals);
    Term applied = apply_extra(pool, raw_arg(g, 0), {cs});
    e.set_goal(binarize_goal(pool, applied, rest));
    return true;
  });

  // Errors.
  reg("errmes", 2, [](Engine &, Term g) -> bool {
    throw PrologError(canonical_text(raw_arg(g, 0)));
  });
  reg("errmes", 3, [](Engine &e, Term g) -> bool {
    Term kind = arg_of(g, 0);
    if (kind->tag != Tag::Atom) throw PrologError("type_error(atom)");
    Term t = e.pool().make_struct(kind->sym, {raw_arg(g, 1)});
    throw PrologError(canonical_text(t));
  });

  // Misc.
  reg("sleep", 2, [](Engine &e, Term g) {
    int64_t secs = need_int(raw_arg(g, 0));
    if (secs > 0)
      std::this_thread::sleep_for(std::chrono::seconds(secs));
    e.set_goal(cont_of(g));
    return true;
  });
  reg("halt", 1, [](Engine &, Term) -> bool { throw HaltSignal{0}; });
  reg("halt", 2, [](Engine &, Term g) -> bool {
    throw HaltSignal{int(need_int(raw_arg(g, 0)))};
  });
}

} // namespace contina
