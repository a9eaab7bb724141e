#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "binarizer.hpp"
#include "store.hpp"
#include "term.hpp"

namespace contina {

class Runtime;
class Engine;

struct EngineCaps {
  size_t heap_cells = 2u << 20;
  size_t cp_depth = 1u << 16;
  size_t trail_len = 1u << 20;
};

// One assumed clause. alive toggles on scope exit, consumption, and
// backtracking; entries are never erased while the proof runs. The clause
// keeps its variables shared with the assuming context (no renaming), so a
// marker variable assumed here and read back later is the same cell; the
// continuation machinery's identity check depends on that. Each resolution
// use re-binarizes, so only the continuation variable is fresh per use.
struct Assumption {
  PredKey key{0, 0}; // binarized key (source arity + 1)
  Clause clause;     // normalized source clause, cells in the owner's pool
  bool linear = false;
  bool alive = true;
};

// A remote node address with the password its guarded requests expect.
struct Peer {
  std::string host;
  uint16_t port = 0;
  std::string password;
};

// Goal-form builtin: receives the binarized goal (continuation in the last
// argument), updates the register through the engine, returns false to fail.
using Builtin = std::function<bool(Engine &, Term)>;

// Guard-form evaluation of inline builtins (no continuation argument).
bool eval_guard(Engine &e, Term guard);

// One LD-resolution machine over binarized goals. The goal register holds a
// single binarized atom; '$stop' in the register means an answer is ready.
class Engine {
public:
  explicit Engine(Runtime &rt, EngineCaps caps = {}, Engine *parent = nullptr);

  // Copies goal+answer in (sharing preserved), resets all resolution state,
  // sets the register to the binarized goal. No solving happens here.
  void load(Term goal, Term answer);

  // Runs to the next success and returns a self-contained copy of the answer
  // term; nullopt when the stream is exhausted (and on every later call).
  // Errors reset the engine to exhausted and rethrow.
  std::optional<OwnedTerm> ask();

  bool exhausted() const { return finished_; }

  Runtime &runtime() { return rt_; }
  TermPool &pool() { return pool_; }
  UndoLog &trail() { return trail_; }
  Engine *parent() { return parent_; }

  bool unify_terms(Term a, Term b);
  void set_goal(Term g) { goal_ = g; }
  Term current_goal() { return goal_; }
  Term stop_atom();

  // Choicepoint surface for builtins.
  uint64_t fresh_token();
  void push_alt(Term alt_goal, uint64_t token = 0);
  void commit_to(uint64_t token); // drops frames up to and incl. the token'd one
  // Pushes an assumed/1 choicepoint and tries its first alternative; false
  // when none applies (the frame is popped again).
  bool push_assumed_choice(Term goal,
                           std::vector<std::pair<Engine *, size_t>> alts);

  // Assumptions. add binarizes and registers removal on backtracking;
  // scope_kill deactivates with revival on backtracking (the =>> exit).
  size_t add_assumption(Term source_clause, bool linear);
  void scope_kill(size_t id);
  Assumption &assumption(size_t id) { return *assumptions_[id]; }
  // Alive entries matching the key, newest first, own store then ancestors.
  // Linear entries only from this engine.
  std::vector<std::pair<Engine *, size_t>>
  matching_assumptions(const PredKey &k, bool include_linear);
  // First alive intuitionistic assumption whose head unifies with pattern;
  // returns the instantiated head. Read-only (fetch hook, introspection).
  std::optional<Term> read_assumption(Term pattern);

  void set_occurs_check(bool on) { occurs_ = on; }

  // Destination for move/0 and remote_run/1; set by there, cleared by here.
  std::optional<Peer> &migration_target() { return mob_target_; }

  // Cooperative thread control, honored at solve-step boundaries.
  void request_cancel() { cancel_.store(true); }
  void suspend() { suspended_.store(true); }
  void resume();

private:
  struct Cand {
    ClausePtr clause;
    Engine *src = nullptr;
    size_t aid = 0;
  };
  struct Choicepoint {
    enum class Mode : uint8_t { Resolve, Assumed, AltGoals };
    Mode mode;
    Term saved_goal;
    size_t trail_mark;
    uint64_t token = 0;
    std::vector<Cand> cands;
    std::vector<std::pair<Engine *, size_t>> assumed;
    std::vector<Term> alts;
    size_t next = 0;
  };

  bool step();
  bool resolve(Term g);
  bool try_candidate(const Cand &c, Term goal);
  bool retry_top();
  bool backtrack();
  void check_caps();
  void control_gate();
  void hard_reset();
  std::vector<Cand> gather_candidates(Term g, const PredKey &k, bool &known);

  Runtime &rt_;
  Engine *parent_;
  EngineCaps caps_;
  TermPool pool_;
  UndoLog trail_;
  std::vector<Choicepoint> cps_;
  std::vector<std::shared_ptr<Assumption>> assumptions_; // newest last
  Term goal_ = nullptr;
  Term answer_ = nullptr;
  std::optional<Peer> mob_target_;
  bool loaded_ = false;
  bool started_ = false;
  bool finished_ = true;
  bool occurs_ = false;
  std::atomic<bool> cancel_{false};
  std::atomic<bool> suspended_{false};
  std::mutex control_mu_;
  std::condition_variable control_cv_;
};

} // namespace contina
