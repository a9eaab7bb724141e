#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "binarizer.hpp"
#include "term.hpp"

namespace contina {

enum class Tier : uint8_t { Interpreted, Indexed };

// Test hook: pins every entry to one tier regardless of the thermostat.
enum class TierPolicy : uint8_t { Auto, ForceInterpreted, ForceIndexed };

struct ThermoConfig {
  double heat = 8;            // temperature added per update
  double cool = 1;            // temperature removed per call (floor 0)
  uint64_t promote_calls = 16; // calls required before promotion
};

struct PredStats {
  double temperature = 0;
  uint64_t calls = 0;
  uint64_t updates = 0;
};

struct PredInfo {
  Tier tier;
  PredStats stats;
  size_t clause_count;
  std::string origin;
};

// One stored clause: a self-contained term graph plus its index key.
class StoredClause {
public:
  StoredClause(const BinClause &src, std::string origin);

  BinClause instantiate(TermPool &dst) const; // fresh variables
  Term rep(TermPool &dst) const;              // '::-'(Head,Body) copy
  const std::string &origin() const { return origin_; }

  // First-argument discrimination: kind 0 matches anything.
  struct Key {
    uint8_t kind = 0; // 0 any, 1 atom, 2 int, 3 struct
    Symbol sym = 0;
    int64_t ival = 0;
    uint32_t arity = 0;
    bool operator==(const Key &o) const {
      return kind == o.kind && sym == o.sym && ival == o.ival &&
             arity == o.arity;
    }
  };
  struct KeyHash {
    size_t operator()(const Key &k) const {
      return std::hash<uint64_t>()((uint64_t(k.kind) << 56) ^
                                   (uint64_t(k.sym) << 24) ^ uint64_t(k.arity)) ^
             std::hash<int64_t>()(k.ival);
    }
  };
  static Key key_for(Term first_arg);
  const Key &key() const { return key_; }

private:
  TermPool pool_;
  BinClause bc_;
  Key key_;
  std::string origin_;
};

using ClausePtr = std::shared_ptr<const StoredClause>;

// The clause database: ordered clauses per predicate, two execution tiers,
// and the update-heated call-cooled statistics that move entries between
// them. All operations are atomic; lookup returns a snapshot the caller may
// hold while writers proceed.
class Store {
public:
  explicit Store(ThermoConfig cfg = {}, TierPolicy policy = TierPolicy::Auto);

  void set_event_sink(std::function<void(std::string, std::string)> sink);

  // Copies the clause in. Fires record_update and demotes the tier.
  // Defining '$stop' is rejected (reserved continuation terminator).
  void assert_clause(bool front, const BinClause &bc,
                     std::string_view origin = "local");
  void load_binarized(const std::vector<BinClause> &cs,
                      std::string_view origin = "local");

  // Removes the first clause whose '::-' representation unifies with
  // pattern; fires record_update on removal.
  bool retract_clause(Term pattern);

  // Same match rule, but hands back the removed clause so the caller can
  // unify the pattern against it; nullptr when nothing matched.
  ClausePtr take_matching(Term pattern);

  // Clauses that may unify with goal (a binarized atom), source order.
  // Indexed entries skip clauses whose first argument cannot match.
  // nullopt means the predicate was never defined here.
  std::optional<std::vector<ClausePtr>> lookup(Term goal) const;

  bool known(const PredKey &k) const;
  void record_call(const PredKey &k);
  void record_update(const PredKey &k);
  Tier maybe_promote(const PredKey &k);

  std::optional<PredInfo> info(const PredKey &k) const;
  std::vector<PredKey> keys() const;

  // Renamed-apart '::-' copies of a predicate's clauses, for the fetch
  // handler and clause listing. nullopt when unknown.
  std::optional<std::vector<Term>> clause_reps(TermPool &dst,
                                               const PredKey &k) const;

private:
  struct Entry {
    std::vector<ClausePtr> clauses;
    Tier tier = Tier::Interpreted;
    PredStats stats;
    std::string origin = "local";
    // Built when indexed: positions per key, plus match-anything positions.
    std::unordered_map<StoredClause::Key, std::vector<uint32_t>,
                       StoredClause::KeyHash>
        buckets;
    std::vector<uint32_t> wildcard;
  };

  void build_index(Entry &e) const;
  void touch_update(const PredKey &k, Entry &e,
                    std::vector<std::pair<std::string, std::string>> &events);
  Entry &entry_for(const PredKey &k);

  mutable std::mutex mu_;
  ThermoConfig cfg_;
  TierPolicy policy_;
  std::unordered_map<PredKey, Entry, PredKeyHash> entries_;
  std::function<void(std::string, std::string)> sink_;
};

} // namespace contina
