#pragma once

#include "errors.hpp"
#include "symtab.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace contina {

// First-order terms: Var | Atom | Int | Struct(functor, args). Lists are
// '.'/2 chains ending in '[]'. A Term is a pointer into some TermPool;
// structure is immutable once built, except that an unbound Var cell may be
// bound (through the owning engine's trail) to exactly one other term.

enum class Tag : uint8_t { Var, Atom, Int, Struct };

struct Cell;
using Term = Cell *;

struct Cell {
  Tag tag;
  Symbol sym = 0;          // Atom name / Struct functor
  int64_t ival = 0;        // Int value
  Cell *ref = nullptr;     // Var binding (nullptr while unbound)
  uint64_t var_id = 0;     // Var: creation ordinal, for debugging only
  std::vector<Term> args;  // Struct arguments (arity >= 1)
};

// Bump allocator for cells. Cells die with the pool, never individually.
class TermPool {
public:
  TermPool() = default;
  TermPool(const TermPool &) = delete;
  TermPool &operator=(const TermPool &) = delete;
  TermPool(TermPool &&) = default;
  TermPool &operator=(TermPool &&) = default;

  Term make_var();
  Term make_atom(Symbol s);
  Term make_atom(std::string_view name) { return make_atom(intern(name)); }
  Term make_int(int64_t v);
  Term make_struct(Symbol f, std::vector<Term> args);
  Term make_struct(std::string_view f, std::vector<Term> args) {
    return make_struct(intern(f), std::move(args));
  }
  // [h|t]
  Term make_cons(Term head, Term tail) {
    return make_struct(sym::dot(), {head, tail});
  }
  Term make_list(std::span<const Term> items, Term tail = nullptr);

  size_t size() const { return cells_.size(); }
  void clear() { cells_.clear(); }

private:
  Cell *fresh();
  std::deque<Cell> cells_;
};

// Follows Var binding chains to the representative cell.
Term deref(Term t);

bool is_atom(Term t, Symbol s);
bool is_callable(Term t); // Atom or Struct after deref
bool is_nil(Term t);
bool is_cons(Term t);

// Functor/arity of a callable term; atoms have arity 0.
struct PredKey {
  Symbol functor;
  uint32_t arity;
  bool operator==(const PredKey &o) const {
    return functor == o.functor && arity == o.arity;
  }
};
struct PredKeyHash {
  size_t operator()(const PredKey &k) const {
    return std::hash<uint64_t>()((uint64_t(k.functor) << 32) | k.arity);
  }
};
PredKey pred_key(Term callable);
std::string pred_key_name(const PredKey &k); // "f/3"

// Trail of undoable state changes made while solving. Variable bindings are
// the common entry; assumption bookkeeping hooks in via generic undo thunks.
class UndoLog {
public:
  using Mark = size_t;

  void push_binding(Term var) { entries_.push_back({var, {}}); }
  void push_undo(std::function<void()> fn) {
    entries_.push_back({nullptr, std::move(fn)});
  }
  Mark mark() const { return entries_.size(); }
  void undo_to(Mark m);
  size_t size() const { return entries_.size(); }
  // Discards all entries without running them (heap is being dropped too).
  void clear() { entries_.clear(); }

private:
  struct Entry {
    Term var;
    std::function<void()> undo;
  };
  std::vector<Entry> entries_;
};

void bind(Term var, Term value, UndoLog &log);

struct UnifyOptions {
  bool occurs_check = false;
};

// Computes an mgu of t1 and t2, recording bindings in log. On failure the
// log is restored to its entry state.
bool unify(Term t1, Term t2, UndoLog &log, const UnifyOptions &opt = {});

// True iff binding only variables of `general` makes it identical to
// `specific`. Leaves no residual bindings.
bool subsumes(Term general, Term specific);

// Structural identity under dereferencing; variables compare by cell.
bool term_identical(Term a, Term b);

// Thrown for cyclic terms hitting a serialization/copy boundary.
struct CyclicTermError : PrologError {
  CyclicTermError() : PrologError("cyclic_term") {}
};

// Structure-preserving copy into `dst` with all variables fresh; sharing
// inside the source is preserved. Throws CyclicTermError on cycles.
Term copy_term(TermPool &dst, Term t);

// Copies several terms at once, preserving variable sharing between them.
std::vector<Term> copy_terms(TermPool &dst, std::span<const Term> ts);

bool is_acyclic(Term t);
bool is_ground(Term t);

// Free variables in first-occurrence order (depth-first, left-to-right).
std::vector<Term> free_variables(Term t);

// A self-contained term graph: its own pool plus the root. The unit of
// cross-thread and cross-engine transfer.
class OwnedTerm {
public:
  OwnedTerm() = default;
  explicit OwnedTerm(Term t) { root_ = copy_term(pool_, t); }
  OwnedTerm(OwnedTerm &&) = default;
  OwnedTerm &operator=(OwnedTerm &&) = default;

  Term root() const { return root_; }
  bool empty() const { return root_ == nullptr; }
  // Copy of the graph rooted in `dst`.
  Term instantiate(TermPool &dst) const { return copy_term(dst, root_); }

private:
  TermPool pool_;
  Term root_ = nullptr;
};

// Variant equality: identical up to a bijective renaming of variables.
bool is_variant(Term a, Term b);

} // namespace contina
