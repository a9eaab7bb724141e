#include "mobility.hpp"

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "binarizer.hpp"
#include "node.hpp"
#include "wire.hpp"
#include "writer.hpp"

namespace contina {

namespace {

Term raw_arg(Term g, size_t i) { return deref(g)->args[i]; }
Term cont_of(Term g) { return deref(g)->args.back(); }

struct MobSyms {
  Symbol mob_ok = intern("$mob_ok");
  Symbol end_cont = intern("end_cont");
};

const MobSyms &msym() {
  static const MobSyms s;
  return s;
}

// Right fold of goals into a ','/2 conjunction; empty folds to 'true'.
Term fold_conj(TermPool &pool, const std::vector<Term> &goals) {
  if (goals.empty()) return pool.make_atom(sym::truth());
  Term acc = goals.back();
  for (size_t i = goals.size() - 1; i-- > 0;)
    acc = pool.make_struct(sym::comma(), {goals[i], acc});
  return acc;
}

// The pending user goals of a continuation, in execution order, sharing
// variable cells with the frames they came from. The walk stops at the
// first frame that cannot travel: the '$stop' terminal, a '$mob_ok' slot,
// an end_cont marker, or any engine-private '$' frame (scope bookkeeping,
// monitor releases, if-then-else barriers). `rest` is that frame, left to
// run on this engine so local scopes still close. Bare true frames are
// noise and are passed over.
struct PendingGoals {
  std::vector<Term> goals;
  Term rest = nullptr;
  Term mob_ok = nullptr; // set when the walk stopped at a '$mob_ok' frame
};

PendingGoals walk_pending(TermPool &pool, Term cont) {
  const MobSyms &m = msym();
  PendingGoals out;
  Term cur = deref(cont);
  while (true) {
    if (cur->tag != Tag::Struct || cur->args.empty()) {
      out.rest = cur;
      return out;
    }
    if (cur->sym == sym::truth() && cur->args.size() == 1) {
      cur = deref(cur->args.back());
      continue;
    }
    if (cur->sym == m.mob_ok && cur->args.size() == 3) {
      out.rest = cur;
      out.mob_ok = cur;
      return out;
    }
    const std::string &name = symbol_name(cur->sym);
    if ((cur->sym == m.end_cont && cur->args.size() == 2) ||
        (!name.empty() && name[0] == '$')) {
      out.rest = cur;
      return out;
    }
    out.goals.push_back(strip_last_arg(pool, cur));
    cur = deref(cur->args.back());
  }
}

Term need_answer_the(Term reply) {
  Term r = deref(reply);
  if (is_atom(r, intern("denied"))) throw PrologError("denied");
  if (r->tag == Tag::Struct && symbol_name(r->sym) == "err" &&
      r->args.size() == 1)
    throw PrologError(canonical_text(deref(r->args[0])));
  if (r->tag == Tag::Struct && symbol_name(r->sym) == "the" &&
      r->args.size() == 1)
    return deref(r->args[0]);
  throw err_term("protocol_error");
}

// Answer payloads ride run/3's answer template, a one-element list.
Term single_item(Term list) {
  Term l = deref(list);
  if (!is_cons(l) || !is_nil(deref(l->args[1])))
    throw err_term("protocol_error");
  return deref(l->args[0]);
}

std::string peer_label(const Peer &p) {
  return p.host + ":" + std::to_string(p.port);
}

Term fresh_code_base(TermPool &pool, const std::string &host, uint16_t port) {
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now().time_since_epoch())
                .count();
  return pool.make_atom("cb:" + host + ":" + std::to_string(port) + ":" +
                        std::to_string(ms));
}

Term wrap_back_links(TermPool &pool, const Peer &back, Term code_base,
                     Term body) {
  Term wrapped = body;
  wrapped = pool.make_struct(
      "=>>", {pool.make_struct("code", {code_base}), wrapped});
  wrapped = pool.make_struct(
      "=>>", {pool.make_struct("passwd", {pool.make_atom(back.password)}),
              wrapped});
  wrapped = pool.make_struct(
      "=>>",
      {pool.make_struct("port", {pool.make_int(back.port)}), wrapped});
  wrapped = pool.make_struct(
      "=>>",
      {pool.make_struct("host", {pool.make_atom(back.host)}), wrapped});
  return wrapped;
}

Peer engine_or_net_target(Engine &e) {
  if (e.migration_target()) return *e.migration_target();
  if (e.runtime().net().target) return *e.runtime().net().target;
  throw PrologError("existence_error(no_target)");
}

// move/0: ship the pending goals to the there-target over a held
// connection, serve code fetches from a throwaway local node meanwhile,
// and resume from the reply: done ends the branch here, back(Vars, Rest)
// re-binarizes Rest locally, failed fails the move.
bool do_move(Engine &e, Term g) {
  if (!e.migration_target()) {
    // here (or no there yet): the segment just runs locally.
    e.set_goal(cont_of(g));
    return true;
  }
  Peer target = *e.migration_target();
  Runtime &rt = e.runtime();
  TermPool &pool = e.pool();

  Socket sock;
  try {
    sock = tcp_connect(target.host, target.port);
  } catch (const PrologError &) {
    // Soft failure: an unreachable target degrades to local execution.
    rt.evt("move_unreachable", peer_label(target));
    e.set_goal(cont_of(g));
    return true;
  }

  PendingGoals pg = walk_pending(pool, cont_of(g));
  Term goals = fold_conj(pool, pg.goals);
  Term vars = pool.make_list(free_variables(goals));

  NodeConfig bc;
  Node back(rt, bc);
  back.start();
  Peer back_peer{"127.0.0.1", back.port(), back.password()};

  Term pkg = pool.make_struct(
      "pkg", {goals, vars,
              pool.make_struct("back",
                               {pool.make_atom(back_peer.host),
                                pool.make_int(back_peer.port),
                                pool.make_atom(back_peer.password)}),
              fresh_code_base(pool, back_peer.host, back_peer.port)});
  Term out = pool.make_var();
  std::vector<Term> tmpl{out};
  Term msg = pool.make_struct(
      "run", {pool.make_atom(target.password),
              pool.make_struct("$mob_exec", {pkg, out}),
              pool.make_list(tmpl)});

  rt.evt("frame_out", "run");
  send_term(sock, msg);
  std::optional<Term> reply = recv_term(sock, pool);
  back.stop();
  if (!reply) throw net_error("peer closed during move");

  Term got = single_item(need_answer_the(*reply));
  if (is_atom(got, intern("failed"))) return false;
  if (got->tag == Tag::Struct && symbol_name(got->sym) == "done" &&
      got->args.size() == 1) {
    if (!e.unify_terms(vars, raw_arg(got, 0)))
      throw err_term("protocol_error");
    e.set_goal(pg.rest);
    return true;
  }
  if (got->tag == Tag::Struct && symbol_name(got->sym) == "back" &&
      got->args.size() == 2) {
    if (!e.unify_terms(vars, raw_arg(got, 0)))
      throw err_term("protocol_error");
    e.set_goal(binarize_goal(pool, raw_arg(got, 1), pg.rest));
    return true;
  }
  throw err_term("protocol_error");
}

// '$mob_exec'(pkg(Gs, Vars, back(H,P,W), CB), Out): rebuild the shipped
// segment under scoped back-link assumptions. Out reports how it ended;
// the disjunction makes remote failure an ordinary answer.
bool do_mob_exec(Engine &e, Term g) {
  TermPool &pool = e.pool();
  Term pkg = deref(raw_arg(g, 0));
  if (pkg->tag != Tag::Struct || symbol_name(pkg->sym) != "pkg" ||
      pkg->args.size() != 4)
    throw err_term("protocol_error");
  Term goals = deref(pkg->args[0]);
  Term vars = deref(pkg->args[1]);
  Term back = deref(pkg->args[2]);
  Term code_base = deref(pkg->args[3]);
  if (back->tag != Tag::Struct || symbol_name(back->sym) != "back" ||
      back->args.size() != 3)
    throw err_term("protocol_error");
  Term bh = deref(back->args[0]);
  Term bp = deref(back->args[1]);
  Term bw = deref(back->args[2]);
  if (bh->tag != Tag::Atom || bw->tag != Tag::Atom || bp->tag != Tag::Int ||
      bp->ival < 1 || bp->ival > 65535)
    throw err_term("protocol_error");
  Term out = raw_arg(g, 1);

  Term ok = pool.make_struct("$mob_ok", {vars, out});
  Term seq = pool.make_struct(sym::comma(), {goals, ok});
  Term dis = pool.make_struct(
      ";", {seq, pool.make_struct("$mob_fail", {out})});
  Peer back_peer{std::string(symbol_name(bh->sym)), uint16_t(bp->ival),
                 std::string(symbol_name(bw->sym))};
  Term wrapped = wrap_back_links(pool, back_peer, code_base, dis);
  e.set_goal(binarize_goal(pool, wrapped, cont_of(g)));
  return true;
}

// move_thread's sender half, reached through call_with_cont: Gs is the
// captured conjunction; the continuation resumes once the target has shut
// this base's code server down.
bool do_mob_send(Engine &e, Term g) {
  Peer target = engine_or_net_target(e);
  Runtime &rt = e.runtime();
  TermPool &pool = e.pool();

  // Fail before any server exists when the target is down.
  tcp_connect(target.host, target.port);

  Term goals = raw_arg(g, 0);
  NodeConfig bc;
  Node back(rt, bc);
  back.start();
  Peer back_peer{"127.0.0.1", back.port(), back.password()};
  Term code_base = fresh_code_base(pool, back_peer.host, back_peer.port);

  Term host_a = pool.make_atom(back_peer.host);
  Term port_i = pool.make_int(back_peer.port);
  Term pwd_a = pool.make_atom(back_peer.password);
  Term tolerant = pool.make_struct(
      ";", {pool.make_struct("->", {goals, pool.make_atom(sym::truth())}),
            pool.make_atom(sym::truth())});
  Term seq = pool.make_struct(
      sym::comma(),
      {pool.make_struct("$await_server", {host_a, port_i, pwd_a}),
       pool.make_struct(
           sym::comma(),
           {tolerant,
            pool.make_struct("stop_server", {host_a, port_i, pwd_a})})});
  Term task =
      wrap_back_links(pool, back_peer, code_base, seq);

  try {
    Term reply = node_request(
        rt, pool, target,
        pool.make_struct("linda_out",
                         {pool.make_struct("todo", {task})}));
    if (!is_atom(deref(reply), intern("ok"))) throw err_term("protocol_error");
  } catch (...) {
    back.stop();
    throw;
  }
  back.wait(); // released by the target's stop_server
  e.set_goal(cont_of(g));
  return true;
}

// Lazy fetch: when resolution hits an unknown predicate and the engine
// carries back-link assumptions, pull its clauses from the base. Installed
// clauses live in the store, so a predicate is fetched at most once.
void install_fetch_hook(Runtime &rt) {
  auto fetch_mu = std::make_shared<std::mutex>();
  rt.set_fetch_hook([fetch_mu](Engine &e, const PredKey &k) {
    TermPool &pool = e.pool();
    auto read1 = [&](const char *f) -> Term {
      Term pat = pool.make_struct(f, {pool.make_var()});
      auto got = e.read_assumption(pat);
      if (!got) return nullptr;
      return deref(deref(*got)->args[0]);
    };
    Term cb = read1("code");
    if (!cb) return false;
    Term h = read1("host");
    Term p = read1("port");
    Term w = read1("passwd");
    if (!h || !p || !w || h->tag != Tag::Atom || p->tag != Tag::Int ||
        w->tag != Tag::Atom || p->ival < 1 || p->ival > 65535)
      return false;
    Runtime &rt2 = e.runtime();
    std::lock_guard<std::mutex> lk(*fetch_mu);
    if (rt2.store().known(k)) return true; // raced with another fetch
    Peer base{std::string(symbol_name(h->sym)), uint16_t(p->ival),
              std::string(symbol_name(w->sym))};
    Term fn = pool.make_struct(
        "/", {pool.make_atom(k.functor), pool.make_int(k.arity)});
    Term msg =
        pool.make_struct("fetch", {pool.make_atom(base.password), fn});
    Term reply;
    try {
      reply = deref(node_request(rt2, pool, base, msg));
    } catch (const PrologError &) {
      return false; // base gone: surfaces as unknown_predicate
    }
    if (reply->tag != Tag::Struct || symbol_name(reply->sym) != "clauses" ||
        reply->args.size() != 1)
      return false;
    Term l = deref(reply->args[0]);
    while (is_cons(l)) {
      rt2.store().assert_clause(false, bin_clause_from_term(deref(l->args[0])),
                                "fetched");
      l = deref(l->args[1]);
    }
    return is_nil(l);
  });
}

} // namespace

void register_mobility_builtins(Runtime &rt) {
  auto reg = [&rt](const char *n, uint32_t a, Builtin f) {
    rt.register_builtin(n, a, std::move(f));
  };

  reg("there", 1, [](Engine &e, Term g) {
    if (!e.runtime().net().target)
      throw PrologError("existence_error(no_target)");
    e.migration_target() = e.runtime().net().target;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("there", 4, [](Engine &e, Term g) {
    Term h = deref(raw_arg(g, 0));
    Term p = deref(raw_arg(g, 1));
    Term w = deref(raw_arg(g, 2));
    if (h->tag != Tag::Atom || w->tag != Tag::Atom || p->tag != Tag::Int ||
        p->ival < 1 || p->ival > 65535)
      throw PrologError("type_error(peer)");
    e.migration_target() = Peer{std::string(symbol_name(h->sym)),
                                uint16_t(p->ival),
                                std::string(symbol_name(w->sym))};
    e.set_goal(cont_of(g));
    return true;
  });
  reg("here", 1, [](Engine &e, Term g) {
    e.migration_target().reset();
    e.set_goal(cont_of(g));
    return true;
  });

  reg("move", 1, do_move);
  reg("return", 1, [](Engine &e, Term g) {
    TermPool &pool = e.pool();
    PendingGoals pg = walk_pending(pool, cont_of(g));
    if (!pg.mob_ok) throw PrologError("not_migrated");
    Term vars = deref(pg.mob_ok)->args[0];
    Term out = deref(pg.mob_ok)->args[1];
    Term after = deref(pg.mob_ok)->args[2];
    Term sent = pool.make_struct("back", {vars, fold_conj(pool, pg.goals)});
    if (!e.unify_terms(out, sent)) return false;
    e.set_goal(after);
    return true;
  });

  reg("$mob_exec", 3, do_mob_exec);
  reg("$mob_ok", 3, [](Engine &e, Term g) {
    Term done = e.pool().make_struct("done", {raw_arg(g, 0)});
    if (!e.unify_terms(raw_arg(g, 1), done)) return false;
    e.set_goal(cont_of(g));
    return true;
  });
  reg("$mob_fail", 2, [](Engine &e, Term g) {
    if (!e.unify_terms(raw_arg(g, 0), e.pool().make_atom("failed")))
      return false;
    e.set_goal(cont_of(g));
    return true;
  });

  reg("$mob_send", 2, do_mob_send);
  rt.consult_text("move_thread :- call_with_cont('$mob_send').\n", "mobility");

  install_fetch_hook(rt);
}

} // namespace contina
