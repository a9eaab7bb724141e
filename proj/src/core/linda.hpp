#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "term.hpp"

namespace contina {

// Unification-based tuple space. Tuples are stored as self-contained copies,
// oldest first; blocked retrievers are served in FIFO order. out() prefers a
// waiting retriever over storage (rendezvous), so at no time does a stored
// tuple unify with any waiter's pattern.
class TupleSpace {
public:
  // Adds a copy of t, or hands it to waiters: every blocked rd whose pattern
  // matches gets a copy, then the oldest matching in-waiter consumes it.
  // Throws cyclic_term on cyclic input.
  void out(Term t);

  // Removes and returns the oldest stored tuple unifying with pattern;
  // blocks until one arrives. The optional deadline turns the block into a
  // timed wait; nullopt means it expired with no match.
  OwnedTerm in(Term pattern);
  std::optional<OwnedTerm> in(Term pattern,
                              std::chrono::milliseconds timeout);

  // Non-destructive blocking read: same selection as in(), tuple stays.
  OwnedTerm rd(Term pattern);

  // Oldest-first snapshot of all stored tuples unifying with pattern.
  std::vector<OwnedTerm> all(Term pattern);

  // Non-blocking single take; nullopt when nothing matches right now.
  std::optional<OwnedTerm> try_in(Term pattern);

  size_t size() const;

  // Wakes every blocked retriever; they raise 'cancelled'. New blocking
  // calls fail the same way. Used for teardown only.
  void close();

private:
  struct Waiter {
    OwnedTerm pattern;
    bool removes = true; // false for rd
    bool served = false;
    OwnedTerm delivery;
    std::condition_variable cv;
  };

  static bool matches(const OwnedTerm &pattern, Term tuple);
  std::optional<OwnedTerm> take_locked(const OwnedTerm &pattern);

  mutable std::mutex mu_;
  std::deque<std::shared_ptr<OwnedTerm>> tuples_;
  std::list<std::shared_ptr<Waiter>> waiters_;
  bool closing_ = false;
};

} // namespace contina
