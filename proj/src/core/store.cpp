#include "store.hpp"

#include <algorithm>

#include "errors.hpp"
#include "writer.hpp"

namespace contina {

namespace {

std::vector<Term> clause_roots(const BinClause &bc) {
  std::vector<Term> roots{bc.head, bc.body};
  roots.insert(roots.end(), bc.guards.begin(), bc.guards.end());
  return roots;
}

BinClause clause_from_roots(const std::vector<Term> &roots) {
  BinClause out;
  out.head = roots[0];
  out.body = roots[1];
  out.guards.assign(roots.begin() + 2, roots.end());
  return out;
}

} // namespace

StoredClause::StoredClause(const BinClause &src, std::string origin)
    : origin_(std::move(origin)) {
  bc_ = clause_from_roots(copy_terms(pool_, clause_roots(src)));
  Term head = deref(bc_.head);
  // The head always ends in the continuation slot; the original first
  // argument exists only when the source predicate had arity >= 1.
  if (head->tag == Tag::Struct && head->args.size() >= 2)
    key_ = key_for(head->args[0]);
}

StoredClause::Key StoredClause::key_for(Term first_arg) {
  Term t = deref(first_arg);
  Key k;
  switch (t->tag) {
  case Tag::Var: k.kind = 0; break;
  case Tag::Atom: k.kind = 1; k.sym = t->sym; break;
  case Tag::Int: k.kind = 2; k.ival = t->ival; break;
  case Tag::Struct:
    k.kind = 3;
    k.sym = t->sym;
    k.arity = static_cast<uint32_t>(t->args.size());
    break;
  }
  return k;
}

BinClause StoredClause::instantiate(TermPool &dst) const {
  return clause_from_roots(copy_terms(dst, clause_roots(bc_)));
}

Term StoredClause::rep(TermPool &dst) const {
  BinClause fresh = instantiate(dst);
  return bin_clause_term(dst, fresh);
}

Store::Store(ThermoConfig cfg, TierPolicy policy)
    : cfg_(cfg), policy_(policy) {}

void Store::set_event_sink(std::function<void(std::string, std::string)> sink) {
  std::lock_guard<std::mutex> lk(mu_);
  sink_ = std::move(sink);
}

Store::Entry &Store::entry_for(const PredKey &k) {
  auto it = entries_.find(k);
  if (it == entries_.end()) {
    it = entries_.emplace(k, Entry{}).first;
    if (policy_ == TierPolicy::ForceIndexed) it->second.tier = Tier::Indexed;
  }
  return it->second;
}

void Store::build_index(Entry &e) const {
  e.buckets.clear();
  e.wildcard.clear();
  for (uint32_t i = 0; i < e.clauses.size(); ++i) {
    const StoredClause::Key &k = e.clauses[i]->key();
    if (k.kind == 0)
      e.wildcard.push_back(i);
    else
      e.buckets[k].push_back(i);
  }
}

void Store::touch_update(
    const PredKey &k, Entry &e,
    std::vector<std::pair<std::string, std::string>> &events) {
  e.stats.updates += 1;
  e.stats.temperature += cfg_.heat;
  if (e.tier == Tier::Indexed) {
    if (policy_ == TierPolicy::ForceIndexed) {
      build_index(e);
    } else {
      e.tier = Tier::Interpreted;
      e.buckets.clear();
      e.wildcard.clear();
      events.emplace_back("demote", pred_key_name(k));
    }
  }
}

void Store::assert_clause(bool front, const BinClause &bc,
                          std::string_view origin) {
  PredKey k = pred_key(bc.head);
  if (symbol_name(k.functor) == "$stop")
    throw err_term("reserved('$stop')");
  std::vector<std::pair<std::string, std::string>> events;
  std::function<void(std::string, std::string)> sink;
  {
    std::lock_guard<std::mutex> lk(mu_);
    Entry &e = entry_for(k);
    if (e.clauses.empty() && std::string_view(e.origin) != origin)
      e.origin.assign(origin);
    auto ptr = std::make_shared<StoredClause>(bc, std::string(origin));
    if (front)
      e.clauses.insert(e.clauses.begin(), std::move(ptr));
    else
      e.clauses.push_back(std::move(ptr));
    touch_update(k, e, events);
    sink = sink_;
  }
  if (sink)
    for (auto &ev : events) sink(ev.first, ev.second);
}

void Store::load_binarized(const std::vector<BinClause> &cs,
                           std::string_view origin) {
  for (const BinClause &bc : cs) assert_clause(false, bc, origin);
}

bool Store::retract_clause(Term pattern) {
  return take_matching(pattern) != nullptr;
}

ClausePtr Store::take_matching(Term pattern) {
  Term p = deref(pattern);
  if (!(p->tag == Tag::Struct && p->sym == sym::bclause() &&
        p->args.size() == 2))
    throw err_term("type_error");
  PredKey k = pred_key(deref(p->args[0]));
  std::vector<std::pair<std::string, std::string>> events;
  std::function<void(std::string, std::string)> sink;
  ClausePtr taken;
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = entries_.find(k);
    if (it == entries_.end()) return nullptr;
    Entry &e = it->second;
    for (size_t i = 0; i < e.clauses.size(); ++i) {
      TermPool scratch;
      Term rep = e.clauses[i]->rep(scratch);
      UndoLog log;
      bool hit = unify(rep, p, log);
      log.undo_to(0);
      if (hit) {
        taken = e.clauses[i];
        e.clauses.erase(e.clauses.begin() + i);
        touch_update(k, e, events);
        break;
      }
    }
    sink = sink_;
  }
  if (sink)
    for (auto &ev : events) sink(ev.first, ev.second);
  return taken;
}

std::optional<std::vector<ClausePtr>> Store::lookup(Term goal) const {
  Term g = deref(goal);
  PredKey k = pred_key(g);
  std::lock_guard<std::mutex> lk(mu_);
  auto it = entries_.find(k);
  if (it == entries_.end()) return std::nullopt;
  const Entry &e = it->second;

  bool discriminate = e.tier == Tier::Indexed && g->tag == Tag::Struct &&
                      g->args.size() >= 2;
  if (discriminate) {
    StoredClause::Key gk = StoredClause::key_for(g->args[0]);
    if (gk.kind != 0) {
      std::vector<uint32_t> merged;
      auto bucket = e.buckets.find(gk);
      const std::vector<uint32_t> empty;
      const std::vector<uint32_t> &hits =
          bucket == e.buckets.end() ? empty : bucket->second;
      merged.reserve(hits.size() + e.wildcard.size());
      std::merge(hits.begin(), hits.end(), e.wildcard.begin(),
                 e.wildcard.end(), std::back_inserter(merged));
      std::vector<ClausePtr> out;
      out.reserve(merged.size());
      for (uint32_t i : merged) out.push_back(e.clauses[i]);
      return out;
    }
  }
  return e.clauses;
}

bool Store::known(const PredKey &k) const {
  std::lock_guard<std::mutex> lk(mu_);
  return entries_.count(k) > 0;
}

void Store::record_call(const PredKey &k) {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = entries_.find(k);
  if (it == entries_.end()) return;
  PredStats &s = it->second.stats;
  s.calls += 1;
  s.temperature = std::max(0.0, s.temperature - cfg_.cool);
}

void Store::record_update(const PredKey &k) {
  std::vector<std::pair<std::string, std::string>> events;
  std::function<void(std::string, std::string)> sink;
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = entries_.find(k);
    if (it == entries_.end()) return;
    touch_update(k, it->second, events);
    sink = sink_;
  }
  if (sink)
    for (auto &ev : events) sink(ev.first, ev.second);
}

Tier Store::maybe_promote(const PredKey &k) {
  std::function<void(std::string, std::string)> sink;
  bool promoted = false;
  Tier tier = Tier::Interpreted;
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = entries_.find(k);
    if (it == entries_.end()) return Tier::Interpreted;
    Entry &e = it->second;
    if (policy_ == TierPolicy::Auto && e.tier == Tier::Interpreted &&
        e.stats.temperature == 0 && e.stats.calls >= cfg_.promote_calls &&
        e.clauses.size() >= 2) {
      e.tier = Tier::Indexed;
      build_index(e);
      promoted = true;
    }
    tier = e.tier;
    sink = sink_;
  }
  if (promoted && sink) sink("promote", pred_key_name(k));
  return tier;
}

std::optional<PredInfo> Store::info(const PredKey &k) const {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = entries_.find(k);
  if (it == entries_.end()) return std::nullopt;
  const Entry &e = it->second;
  return PredInfo{e.tier, e.stats, e.clauses.size(), e.origin};
}

std::vector<PredKey> Store::keys() const {
  std::lock_guard<std::mutex> lk(mu_);
  std::vector<PredKey> out;
  out.reserve(entries_.size());
  for (auto &kv : entries_) out.push_back(kv.first);
  return out;
}

std::optional<std::vector<Term>> Store::clause_reps(TermPool &dst,
                                                    const PredKey &k) const {
  std::vector<ClausePtr> snapshot;
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = entries_.find(k);
    if (it == entries_.end()) return std::nullopt;
    snapshot = it->second.clauses;
  }
  std::vector<Term> out;
  out.reserve(snapshot.size());
  for (const ClausePtr &c : snapshot) out.push_back(c->rep(dst));
  return out;
}

} // namespace contina
