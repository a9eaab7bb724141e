#include "node.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/socket.h>

#include "binarizer.hpp"
#include "reader.hpp"
#include "writer.hpp"

namespace contina {

namespace {

Term arg_of(Term g, size_t i) { return deref(deref(g)->args[i]); }
Term raw_arg(Term g, size_t i) { return deref(g)->args[i]; }
Term cont_of(Term g) { return deref(g)->args.back(); }

std::string_view need_atom(Term t) {
  t = deref(t);
  if (t->tag == Tag::Var) throw PrologError("instantiation_error");
  if (t->tag != Tag::Atom) throw PrologError("type_error(atom)");
  return symbol_name(t->sym);
}

int64_t need_port(Term t) {
  t = deref(t);
  if (t->tag == Tag::Var) throw PrologError("instantiation_error");
  if (t->tag != Tag::Int || t->ival < 1 || t->ival > 65535)
    throw PrologError("type_error(port)");
  return t->ival;
}

std::string functor_label(Term t) {
  t = deref(t);
  if (t->tag == Tag::Atom || t->tag == Tag::Struct)
    return symbol_name(t->sym);
  return "term";
}

Term mk1(TermPool &pool, const char *f, Term a) {
  return pool.make_struct(f, {a});
}

Term error_payload(TermPool &pool, const std::string &term_text) {
  try {
    return parse_term_text(pool, term_text);
  } catch (...) {
    return pool.make_atom("unknown");
  }
}

// Items of a proper list, derefed. protocol_error on anything else.
std::vector<Term> list_items(Term t) {
  std::vector<Term> out;
  t = deref(t);
  while (is_cons(t)) {
    out.push_back(deref(t->args[0]));
    t = deref(t->args[1]);
  }
  if (!is_nil(t)) throw err_term("protocol_error");
  return out;
}

// Executes one servant task in a fresh engine. Returns false when the
// servant loop should wind down.
bool run_todo_task(Runtime &rt, Term task, bool strict) {
  TermPool tp;
  try {
    auto eng = rt.make_engine();
    eng->load(task, tp.make_atom("true"));
    if (!eng->ask()) {
      rt.evt("servant_task_failed", canonical_text(task));
      return !strict;
    }
  } catch (const HaltSignal &) {
    return false;
  } catch (const PrologError &e) {
    rt.evt("servant_error", e.term);
    return !strict;
  } catch (const std::exception &e) {
    rt.evt("servant_error", e.what());
    return !strict;
  }
  return true;
}

} // namespace

std::string random_password() {
  std::random_device rd;
  std::uniform_int_distribution<uint64_t> d;
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(d(rd)),
                static_cast<unsigned long long>(d(rd)));
  return buf;
}

Term node_request(Runtime &rt, TermPool &pool, const Peer &peer, Term msg) {
  rt.evt("frame_out", functor_label(msg));
  return request(pool, peer.host, peer.port, msg);
}

Node::Node(Runtime &rt, NodeConfig cfg) : rt_(rt), cfg_(std::move(cfg)) {}

Node::~Node() { stop(); }

void Node::start() {
  if (running_.exchange(true)) return;
  stopping_.store(false);
  if (cfg_.password.empty()) cfg_.password = random_password();
  listener_ = std::make_unique<Listener>(cfg_.host, cfg_.port);
  port_ = listener_->port();
  rt_.evt("serve", "port:" + std::to_string(port_));
  accept_thread_ = std::thread(&Node::accept_loop, this);
  if (cfg_.servant) servant_thread_ = std::thread(&Node::servant_loop, this);
  if (cfg_.master) {
    TermPool pool;
    Term id = pool.make_struct(
        "server_id", {pool.make_atom(cfg_.channel), pool.make_atom(cfg_.host),
                      pool.make_int(port_)});
    try {
      node_request(rt_, pool, *cfg_.master, mk1(pool, "register", id));
    } catch (const PrologError &e) {
      rt_.evt("register_failed", e.term);
    }
  }
}

void Node::begin_shutdown() {
  stopping_.store(true);
  if (listener_) listener_->shutdown();
  {
    // Unblock workers parked in recv so stop() can join them.
    std::lock_guard<std::mutex> lk(workers_mu_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RD);
  }
  wait_cv_.notify_all();
}

void Node::stop() {
  if (!running_.exchange(false)) return;
  begin_shutdown();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (servant_thread_.joinable()) servant_thread_.join();
  std::vector<std::thread> ws;
  {
    std::lock_guard<std::mutex> lk(workers_mu_);
    ws.swap(workers_);
  }
  for (auto &w : ws)
    if (w.joinable()) w.join();
  listener_.reset();
}

void Node::wait() {
  {
    std::unique_lock<std::mutex> lk(wait_mu_);
    wait_cv_.wait(lk, [&] { return stopping_.load(); });
  }
  stop();
}

void Node::accept_loop() {
  while (!stopping_.load()) {
    Socket s = listener_->accept();
    if (!s.valid()) break;
    std::lock_guard<std::mutex> lk(workers_mu_);
    if (stopping_.load()) break;
    workers_.emplace_back(&Node::serve, this, std::move(s));
  }
}

bool Node::password_ok(Term t) const {
  t = deref(t);
  return t->tag == Tag::Atom && symbol_name(t->sym) == cfg_.password;
}

void Node::serve(Socket s) {
  {
    std::lock_guard<std::mutex> lk(workers_mu_);
    conn_fds_.push_back(s.fd());
  }
  const int my_fd = s.fd();
  auto drop_fd = [&] {
    std::lock_guard<std::mutex> lk(workers_mu_);
    conn_fds_.erase(std::find(conn_fds_.begin(), conn_fds_.end(), my_fd));
  };

  while (true) {
    TermPool pool;
    std::optional<Term> msg;
    try {
      msg = recv_term(s, pool);
    } catch (const PrologError &e) {
      // The stream is out of step; report once and hang up.
      try {
        send_term(s, mk1(pool, "err", error_payload(pool, e.term)));
      } catch (...) {
      }
      break;
    }
    if (!msg) break;
    bool stop_node = false;
    Term reply = nullptr;
    try {
      rt_.evt("frame_in", functor_label(*msg));
      reply = dispatch(pool, *msg, stop_node);
    } catch (const HaltSignal &h) {
      reply = mk1(pool, "err",
                  mk1(pool, "halted", pool.make_int(h.code)));
    } catch (const PrologError &e) {
      reply = mk1(pool, "err", error_payload(pool, e.term));
    } catch (const std::exception &) {
      reply = mk1(pool, "err", pool.make_atom("system_error"));
    }
    try {
      send_term(s, reply);
    } catch (const PrologError &) {
      break;
    }
    if (stop_node) {
      drop_fd();
      begin_shutdown();
      return;
    }
  }
  drop_fd();
}

Term Node::dispatch(TermPool &pool, Term msg, bool &stop_node) {
  msg = deref(msg);
  if (msg->tag != Tag::Struct) return mk1(pool, "err", pool.make_atom("unknown_message"));
  PredKey k = pred_key(msg);
  const std::string &name = symbol_name(k.functor);

  if (name == "linda_out" && k.arity == 1) {
    rt_.space().out(raw_arg(msg, 0));
    return pool.make_atom("ok");
  }
  if (name == "linda_in" && k.arity == 1) {
    Term pat = raw_arg(msg, 0);
    while (!stopping_.load()) {
      auto got = rt_.space().in(pat, std::chrono::milliseconds(100));
      if (got) return mk1(pool, "the", got->instantiate(pool));
    }
    return mk1(pool, "err", pool.make_atom("stopping"));
  }
  if ((name == "linda_all" || name == "lookup") && k.arity == 1) {
    auto snap = rt_.space().all(raw_arg(msg, 0));
    std::vector<Term> items;
    items.reserve(snap.size());
    for (auto &t : snap) items.push_back(t.instantiate(pool));
    return mk1(pool, "tuples", pool.make_list(items));
  }
  if (name == "register" && k.arity == 1) {
    rt_.space().out(raw_arg(msg, 0));
    return pool.make_atom("ok");
  }
  if (name == "run" && k.arity == 3) {
    if (!password_ok(raw_arg(msg, 0))) return pool.make_atom("denied");
    auto eng = rt_.make_engine();
    eng->load(raw_arg(msg, 1), raw_arg(msg, 2));
    auto ans = eng->ask();
    if (!ans) return pool.make_atom("no");
    return mk1(pool, "the", ans->instantiate(pool));
  }
  if (name == "fetch" && k.arity == 2) {
    if (!password_ok(raw_arg(msg, 0))) return pool.make_atom("denied");
    Term spec = arg_of(msg, 1);
    if (spec->tag != Tag::Struct || symbol_name(spec->sym) != "/" ||
        spec->args.size() != 2)
      throw PrologError("type_error(predicate_indicator)");
    PredKey want{intern(need_atom(spec->args[0])),
                 uint32_t(need_port(spec->args[1]))};
    auto reps = rt_.store().clause_reps(pool, want);
    if (!reps) return pool.make_atom("no");
    return mk1(pool, "clauses", pool.make_list(*reps));
  }
  if (name == "rload" && k.arity == 2) {
    if (!password_ok(raw_arg(msg, 0))) return pool.make_atom("denied");
    std::string path(need_atom(raw_arg(msg, 1)));
    std::ifstream f(path);
    if (!f)
      return mk1(pool, "err",
                 mk1(pool, "existence_error", pool.make_atom(path)));
    std::stringstream buf;
    buf << f.rdbuf();
    std::vector<Term> reps;
    for (Term t : parse_program_text(pool, buf.str())) {
      BinClause bc =
          binarize_clause(pool, normalize(pool, clause_from_term(t)));
      reps.push_back(bin_clause_term(pool, bc));
    }
    return mk1(pool, "clauses", pool.make_list(reps));
  }
  if (name == "stop" && k.arity == 1) {
    if (!password_ok(raw_arg(msg, 0))) return pool.make_atom("denied");
    stop_node = true;
    return pool.make_atom("ok");
  }
  return mk1(pool, "err", pool.make_atom("unknown_message"));
}

void Node::servant_loop() {
  TermPool pool;
  Term pat = pool.make_struct("todo", {pool.make_var()});
  while (!stopping_.load()) {
    std::optional<OwnedTerm> got;
    try {
      got = rt_.space().in(pat, std::chrono::milliseconds(100));
    } catch (const PrologError &) {
      return; // space closed
    }
    if (!got) continue;
    TermPool tp;
    Term task = deref(deref(got->instantiate(tp))->args[0]);
    if (!run_todo_task(rt_, task, cfg_.strict_servant)) return;
  }
}

void remote_servant_loop(Runtime &rt, const Peer &peer, bool strict,
                         std::atomic<bool> *stop_flag) {
  while (!stop_flag || !stop_flag->load()) {
    TermPool pool;
    Term pat = pool.make_struct("todo", {pool.make_var()});
    Term reply = nullptr;
    try {
      reply = node_request(rt, pool, peer, mk1(pool, "linda_in", pat));
    } catch (const PrologError &) {
      return; // peer gone
    }
    reply = deref(reply);
    if (reply->tag != Tag::Struct || symbol_name(reply->sym) != "the")
      return;
    Term tuple = arg_of(reply, 0);
    if (tuple->tag != Tag::Struct || symbol_name(tuple->sym) != "todo")
      continue;
    if (!run_todo_task(rt, deref(tuple->args[0]), strict)) return;
  }
}

namespace {

Peer peer_args(Term g) {
  return Peer{std::string(need_atom(raw_arg(g, 0))),
              uint16_t(need_port(raw_arg(g, 1))),
              std::string(need_atom(raw_arg(g, 2)))};
}

Peer default_target(Engine &e) {
  if (e.migration_target()) return *e.migration_target();
  if (e.runtime().net().target) return *e.runtime().net().target;
  throw PrologError("existence_error(no_target)");
}

Peer need_master(Runtime &rt) {
  if (rt.net().master) return *rt.net().master;
  throw PrologError("existence_error(no_master)");
}

// Sends run(Pwd, Goal, FreeVars) and unifies the free variables with the
// instance the peer answered with. Fails on no, raises on denied/err.
bool do_remote_run(Engine &e, const Peer &peer, Term goal) {
  TermPool &pool = e.pool();
  Term vars = pool.make_list(free_variables(goal));
  Term msg = pool.make_struct(
      "run", {pool.make_atom(peer.password), goal, vars});
  Term reply = deref(node_request(e.runtime(), pool, peer, msg));
  if (is_atom(reply, intern("no"))) return false;
  if (is_atom(reply, intern("denied"))) throw PrologError("denied");
  if (reply->tag == Tag::Struct && symbol_name(reply->sym) == "the" &&
      reply->args.size() == 1)
    return e.unify_terms(vars, raw_arg(reply, 0));
  if (reply->tag == Tag::Struct && symbol_name(reply->sym) == "err" &&
      reply->args.size() == 1)
    throw PrologError(canonical_text(raw_arg(reply, 0)));
  throw err_term("protocol_error");
}

} // namespace

void register_net_builtins(Runtime &rt) {
  auto reg = [&rt](const char *n, uint32_t a, Builtin f) {
    rt.register_builtin(n, a, std::move(f));
  };

  reg("remote_run", 2, [](Engine &e, Term g) {
    if (!do_remote_run(e, default_target(e), raw_arg(g, 0))) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  reg("remote_run", 5, [](Engine &e, Term g) {
    if (!do_remote_run(e, peer_args(g), raw_arg(g, 3))) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  // rload(File): pull every clause of the target's file and install them
  // here, keeping their order.
  reg("rload", 2, [](Engine &e, Term g) {
    Peer peer = default_target(e);
    TermPool &pool = e.pool();
    Term msg = pool.make_struct(
        "rload", {pool.make_atom(peer.password), raw_arg(g, 0)});
    Term reply = deref(node_request(e.runtime(), pool, peer, msg));
    if (is_atom(reply, intern("denied"))) throw PrologError("denied");
    if (reply->tag == Tag::Struct && symbol_name(reply->sym) == "err")
      throw PrologError(canonical_text(raw_arg(reply, 0)));
    if (reply->tag != Tag::Struct || symbol_name(reply->sym) != "clauses")
      throw err_term("protocol_error");
    for (Term rep : list_items(raw_arg(reply, 0)))
      e.runtime().store().assert_clause(false, bin_clause_from_term(rep),
                                        "rload");
    e.set_goal(cont_of(g));
    return true;
  });

  reg("linda_out", 2, [](Engine &e, Term g) {
    Peer m = need_master(e.runtime());
    TermPool &pool = e.pool();
    Term reply = node_request(e.runtime(), pool, m,
                              mk1(pool, "linda_out", raw_arg(g, 0)));
    if (!is_atom(deref(reply), intern("ok"))) throw err_term("protocol_error");
    e.set_goal(cont_of(g));
    return true;
  });

  reg("linda_in", 2, [](Engine &e, Term g) {
    Peer m = need_master(e.runtime());
    TermPool &pool = e.pool();
    Term reply = deref(node_request(e.runtime(), pool, m,
                                    mk1(pool, "linda_in", raw_arg(g, 0))));
    if (reply->tag != Tag::Struct || symbol_name(reply->sym) != "the")
      throw err_term("protocol_error");
    if (!e.unify_terms(raw_arg(g, 0), raw_arg(reply, 0))) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  reg("linda_all", 3, [](Engine &e, Term g) {
    Peer m = need_master(e.runtime());
    TermPool &pool = e.pool();
    Term reply = deref(node_request(e.runtime(), pool, m,
                                    mk1(pool, "linda_all", raw_arg(g, 0))));
    if (reply->tag != Tag::Struct || symbol_name(reply->sym) != "tuples")
      throw err_term("protocol_error");
    if (!e.unify_terms(raw_arg(g, 1), raw_arg(reply, 0))) return false;
    e.set_goal(cont_of(g));
    return true;
  });

  // ask_all_servers(Pwd, Channel, Goal): one fire-and-forget run on every
  // server the master lists for the channel; unreachable ones are skipped.
  reg("ask_all_servers", 4, [](Engine &e, Term g) {
    Peer m = need_master(e.runtime());
    TermPool &pool = e.pool();
    std::string pwd(need_atom(raw_arg(g, 0)));
    Term pat = pool.make_struct(
        "server_id", {raw_arg(g, 1), pool.make_var(), pool.make_var()});
    Term reply = deref(
        node_request(e.runtime(), pool, m, mk1(pool, "lookup", pat)));
    if (reply->tag != Tag::Struct || symbol_name(reply->sym) != "tuples")
      throw err_term("protocol_error");
    for (Term id : list_items(raw_arg(reply, 0))) {
      if (id->tag != Tag::Struct || symbol_name(id->sym) != "server_id" ||
          id->args.size() != 3)
        continue;
      try {
        Peer p{std::string(need_atom(id->args[1])),
               uint16_t(need_port(id->args[2])), pwd};
        Term msg = pool.make_struct(
            "run", {pool.make_atom(pwd), raw_arg(g, 2), pool.make_atom("[]")});
        node_request(e.runtime(), pool, p, msg);
      } catch (const PrologError &) {
        continue;
      }
    }
    e.set_goal(cont_of(g));
    return true;
  });

  reg("stop_server", 4, [](Engine &e, Term g) {
    Peer p = peer_args(g);
    TermPool &pool = e.pool();
    Term reply = deref(node_request(
        e.runtime(), pool, p, mk1(pool, "stop", pool.make_atom(p.password))));
    if (is_atom(reply, intern("denied"))) throw PrologError("denied");
    e.set_goal(cont_of(g));
    return true;
  });

  // '$await_server'(Host, Port, Pwd): block until the node answers a
  // trivial query, backing off up to ~10s.
  reg("$await_server", 4, [](Engine &e, Term g) {
    Peer p = peer_args(g);
    if (e.runtime().config().fixed_settle_delay) {
      std::this_thread::sleep_for(std::chrono::seconds(5));
      e.set_goal(cont_of(g));
      return true;
    }
    auto deadline =
        std::chrono::steady_clock::now() + std::chrono::seconds(10);
    auto delay = std::chrono::milliseconds(50);
    while (true) {
      try {
        TermPool probe;
        Term msg = probe.make_struct(
            "run", {probe.make_atom(p.password), probe.make_atom("true"),
                    probe.make_atom("[]")});
        request(probe, p.host, p.port, msg);
        break; // any reply proves the node is up
      } catch (const PrologError &) {
        if (std::chrono::steady_clock::now() >= deadline)
          throw net_error("server not ready: " + p.host + ":" +
                          std::to_string(p.port));
        std::this_thread::sleep_for(delay);
        delay = std::min(delay * 2, std::chrono::milliseconds(1600));
      }
    }
    e.set_goal(cont_of(g));
    return true;
  });
}

} // namespace contina
