#include "engine.hpp"

#include "runtime.hpp"
#include "writer.hpp"

namespace contina {

namespace {

[[noreturn]] void throw_unknown(const PredKey &k) {
  TermPool scratch;
  Term fn = scratch.make_struct("/", {scratch.make_atom(k.functor),
                                      scratch.make_int(int64_t(k.arity))});
  Term err = scratch.make_struct("unknown_predicate", {fn});
  throw PrologError(canonical_text(err));
}

} // namespace

Engine::Engine(Runtime &rt, EngineCaps caps, Engine *parent)
    : rt_(rt), parent_(parent), caps_(caps),
      occurs_(rt.config().occurs_check) {}

Term Engine::stop_atom() { return pool_.make_atom(sym::stop()); }

void Engine::load(Term goal, Term answer) {
  // Stage first: the sources may live in this very pool.
  TermPool staging;
  Term roots[] = {goal, answer};
  auto staged = copy_terms(staging, roots);
  trail_.undo_to(0); // cells may live in a parent pool; unbind before dropping
  cps_.clear();
  assumptions_.clear();
  pool_.clear();
  Term roots2[] = {staged[0], staged[1]};
  auto copies = copy_terms(pool_, roots2);
  answer_ = copies[1];
  goal_ = binarize_goal(pool_, copies[0], stop_atom());
  loaded_ = true;
  started_ = false;
  finished_ = false;
}

bool Engine::unify_terms(Term a, Term b) {
  return unify(a, b, trail_, UnifyOptions{occurs_});
}

uint64_t Engine::fresh_token() { return rt_.next_token(); }

void Engine::push_alt(Term alt_goal, uint64_t token) {
  Choicepoint cp;
  cp.mode = Choicepoint::Mode::AltGoals;
  cp.saved_goal = goal_;
  cp.trail_mark = trail_.mark();
  cp.token = token;
  cp.alts = {alt_goal};
  cps_.push_back(std::move(cp));
  check_caps();
}

void Engine::commit_to(uint64_t token) {
  for (size_t i = cps_.size(); i-- > 0;) {
    if (cps_[i].token == token) {
      cps_.resize(i);
      return;
    }
  }
}

bool Engine::push_assumed_choice(Term goal,
                                 std::vector<std::pair<Engine *, size_t>> alts) {
  Choicepoint cp;
  cp.mode = Choicepoint::Mode::Assumed;
  cp.saved_goal = goal;
  cp.trail_mark = trail_.mark();
  cp.assumed = std::move(alts);
  cps_.push_back(std::move(cp));
  check_caps();
  return retry_top();
}

size_t Engine::add_assumption(Term source_clause, bool linear) {
  Clause c = normalize(pool_, clause_from_term(source_clause));
  PredKey hk = pred_key(c.head);
  auto a = std::make_shared<Assumption>();
  a->key = PredKey{hk.functor, hk.arity + 1};
  a->clause = std::move(c);
  a->linear = linear;
  a->alive = true;
  assumptions_.push_back(a);
  trail_.push_undo([a] { a->alive = false; });
  return assumptions_.size() - 1;
}

void Engine::scope_kill(size_t id) {
  auto a = assumptions_.at(id);
  a->alive = false;
  trail_.push_undo([a] { a->alive = true; });
}

std::vector<std::pair<Engine *, size_t>>
Engine::matching_assumptions(const PredKey &k, bool include_linear) {
  std::vector<std::pair<Engine *, size_t>> out;
  for (Engine *e = this; e; e = e->parent_) {
    for (size_t i = e->assumptions_.size(); i-- > 0;) {
      const Assumption &a = *e->assumptions_[i];
      if (!a.alive || !(a.key == k))
        continue;
      if (a.linear && (!include_linear || e != this))
        continue;
      out.emplace_back(e, i);
    }
  }
  return out;
}

std::optional<Term> Engine::read_assumption(Term pattern) {
  Term p = deref(pattern);
  if (!is_callable(p))
    return std::nullopt;
  PredKey k = pred_key(p);
  PredKey bk{k.functor, k.arity + 1};
  for (auto [src, aid] : matching_assumptions(bk, false)) {
    const Assumption &a = src->assumption(aid);
    size_t m = trail_.mark();
    if (unify_terms(p, a.clause.head))
      return deref(a.clause.head);
    trail_.undo_to(m);
  }
  return std::nullopt;
}

void Engine::resume() {
  suspended_.store(false);
  control_cv_.notify_all();
}

void Engine::control_gate() {
  if (cancel_.load())
    throw PrologError("cancelled");
  if (suspended_.load()) {
    std::unique_lock<std::mutex> lk(control_mu_);
    control_cv_.wait(lk, [this] { return !suspended_.load() || cancel_.load(); });
    if (cancel_.load())
      throw PrologError("cancelled");
  }
}

void Engine::check_caps() {
  if (pool_.size() > caps_.heap_cells)
    throw PrologError("resource_error(heap)");
  if (cps_.size() > caps_.cp_depth)
    throw PrologError("resource_error(choicepoints)");
  if (trail_.size() > caps_.trail_len)
    throw PrologError("resource_error(trail)");
}

void Engine::hard_reset() {
  trail_.undo_to(0);
  cps_.clear();
  assumptions_.clear();
  finished_ = true;
}

std::vector<Engine::Cand>
Engine::gather_candidates(Term g, const PredKey &k, bool &known) {
  std::vector<Cand> out;
  for (auto [src, aid] : matching_assumptions(k, false)) {
    known = true;
    out.push_back(Cand{nullptr, src, aid});
  }
  auto stored = rt_.store().lookup(g);
  if (stored) {
    known = true;
    for (auto &cp : *stored)
      out.push_back(Cand{std::move(cp), nullptr, 0});
  }
  return out;
}

bool Engine::try_candidate(const Cand &c, Term goal) {
  BinClause inst;
  if (c.clause) {
    inst = c.clause->instantiate(pool_);
  } else {
    const Assumption &a = c.src->assumption(c.aid);
    if (!a.alive)
      return false;
    inst = binarize_clause(pool_, a.clause);
  }
  if (!unify_terms(inst.head, goal))
    return false;
  for (Term guard : inst.guards)
    if (!eval_guard(*this, guard))
      return false;
  goal_ = inst.body;
  return true;
}

bool Engine::resolve(Term g) {
  PredKey k = pred_key(g);
  bool known = false;
  auto cands = gather_candidates(g, k, known);
  if (!known && rt_.run_fetch_hook(*this, k))
    cands = gather_candidates(g, k, known);
  if (!known)
    throw_unknown(k);
  if (rt_.store().known(k)) {
    rt_.store().record_call(k);
    rt_.store().maybe_promote(k);
  }
  // Determinate calls leave no frame behind.
  if (cands.size() == 1) {
    size_t m = trail_.mark();
    if (try_candidate(cands[0], g))
      return true;
    trail_.undo_to(m);
    return false;
  }
  if (cands.empty())
    return false;
  Choicepoint cp;
  cp.mode = Choicepoint::Mode::Resolve;
  cp.saved_goal = g;
  cp.trail_mark = trail_.mark();
  cp.cands = std::move(cands);
  cps_.push_back(std::move(cp));
  check_caps();
  return retry_top();
}

bool Engine::retry_top() {
  Choicepoint &cp = cps_.back();
  while (true) {
    trail_.undo_to(cp.trail_mark);
    switch (cp.mode) {
    case Choicepoint::Mode::Resolve: {
      if (cp.next >= cp.cands.size()) {
        cps_.pop_back();
        return false;
      }
      if (try_candidate(cp.cands[cp.next++], cp.saved_goal))
        return true;
      continue;
    }
    case Choicepoint::Mode::Assumed: {
      if (cp.next >= cp.assumed.size()) {
        cps_.pop_back();
        return false;
      }
      auto [src, aid] = cp.assumed[cp.next++];
      auto ap = src->assumptions_[aid];
      if (!ap->alive)
        continue;
      Term g = deref(cp.saved_goal);
      Term pattern = deref(g->args[0]);
      Term cont = g->args[1];
      if (ap->linear) {
        ap->alive = false;
        trail_.push_undo([ap] { ap->alive = true; });
      }
      if (!unify_terms(pattern, ap->clause.head))
        continue;
      goal_ = cont;
      return true;
    }
    case Choicepoint::Mode::AltGoals: {
      if (cp.next >= cp.alts.size()) {
        cps_.pop_back();
        return false;
      }
      goal_ = cp.alts[cp.next++];
      return true;
    }
    }
  }
}

bool Engine::backtrack() {
  while (!cps_.empty()) {
    if (retry_top())
      return true;
  }
  return false;
}

bool Engine::step() {
  Term g = deref(goal_);
  switch (g->tag) {
  case Tag::Var:
    throw PrologError("instantiation_error");
  case Tag::Int:
    throw PrologError("type_error(callable)");
  case Tag::Atom:
    throw_unknown(PredKey{g->sym, 0});
  case Tag::Struct:
    break;
  }
  PredKey k{g->sym, uint32_t(g->args.size())};
  if (const Builtin *b = rt_.find_builtin(k))
    return (*b)(*this, g);
  return resolve(g);
}

std::optional<OwnedTerm> Engine::ask() {
  if (!loaded_ || finished_)
    return std::nullopt;
  try {
    bool have;
    if (!started_) {
      started_ = true;
      have = true;
    } else {
      have = backtrack();
    }
    while (have) {
      control_gate();
      check_caps();
      Term g = deref(goal_);
      if (g->tag == Tag::Atom && g->sym == sym::stop())
        return OwnedTerm(answer_ ? answer_ : g);
      if (step())
        continue;
      have = backtrack();
    }
  } catch (...) {
    hard_reset();
    throw;
  }
  trail_.undo_to(0);
  finished_ = true;
  return std::nullopt;
}

} // namespace contina
