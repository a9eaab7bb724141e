#include "linda.hpp"

namespace contina {

bool TupleSpace::matches(const OwnedTerm &pattern, Term tuple) {
  TermPool scratch;
  Term p = pattern.instantiate(scratch);
  UndoLog log;
  bool ok = unify(p, tuple, log);
  log.undo_to(0);
  return ok;
}

std::optional<OwnedTerm> TupleSpace::take_locked(const OwnedTerm &pattern) {
  for (auto it = tuples_.begin(); it != tuples_.end(); ++it) {
    if (matches(pattern, (*it)->root())) {
      OwnedTerm got = OwnedTerm((*it)->root());
      tuples_.erase(it);
      return got;
    }
  }
  return std::nullopt;
}

void TupleSpace::out(Term t) {
  auto stored = std::make_shared<OwnedTerm>(t); // copies; throws on cycles
  std::unique_lock<std::mutex> lk(mu_);
  // Peeking readers all see the tuple, oldest first.
  for (auto it = waiters_.begin(); it != waiters_.end();) {
    Waiter &w = **it;
    if (!w.removes && matches(w.pattern, stored->root())) {
      w.delivery = OwnedTerm(stored->root());
      w.served = true;
      w.cv.notify_one();
      it = waiters_.erase(it);
    } else {
      ++it;
    }
  }
  // The oldest matching taker consumes it; the tuple is never stored then.
  for (auto it = waiters_.begin(); it != waiters_.end(); ++it) {
    Waiter &w = **it;
    if (w.removes && matches(w.pattern, stored->root())) {
      w.delivery = OwnedTerm(stored->root());
      w.served = true;
      w.cv.notify_one();
      waiters_.erase(it);
      return;
    }
  }
  tuples_.push_back(std::move(stored));
}

OwnedTerm TupleSpace::in(Term pattern) {
  auto got = in(pattern, std::chrono::milliseconds::max());
  return std::move(*got);
}

std::optional<OwnedTerm> TupleSpace::in(Term pattern,
                                        std::chrono::milliseconds timeout) {
  auto waiter = std::make_shared<Waiter>();
  waiter->pattern = OwnedTerm(pattern);
  std::unique_lock<std::mutex> lk(mu_);
  if (closing_) throw PrologError("cancelled");
  if (auto got = take_locked(waiter->pattern)) return got;
  waiter->removes = true;
  waiters_.push_back(waiter);
  bool forever = timeout == std::chrono::milliseconds::max();
  auto deadline = std::chrono::steady_clock::now() +
                  (forever ? std::chrono::milliseconds(0) : timeout);
  while (!waiter->served) {
    if (closing_) {
      waiters_.remove(waiter);
      throw PrologError("cancelled");
    }
    if (forever) {
      waiter->cv.wait(lk);
    } else if (waiter->cv.wait_until(lk, deadline) ==
               std::cv_status::timeout &&
               !waiter->served) {
      waiters_.remove(waiter);
      return std::nullopt;
    }
  }
  return std::move(waiter->delivery);
}

OwnedTerm TupleSpace::rd(Term pattern) {
  auto waiter = std::make_shared<Waiter>();
  waiter->pattern = OwnedTerm(pattern);
  std::unique_lock<std::mutex> lk(mu_);
  if (closing_) throw PrologError("cancelled");
  for (auto &stored : tuples_)
    if (matches(waiter->pattern, stored->root()))
      return OwnedTerm(stored->root());
  waiter->removes = false;
  waiters_.push_back(waiter);
  while (!waiter->served) {
    if (closing_) {
      waiters_.remove(waiter);
      throw PrologError("cancelled");
    }
    waiter->cv.wait(lk);
  }
  return std::move(waiter->delivery);
}

std::vector<OwnedTerm> TupleSpace::all(Term pattern) {
  OwnedTerm p(pattern);
  std::unique_lock<std::mutex> lk(mu_);
  std::vector<OwnedTerm> out;
  for (auto &stored : tuples_)
    if (matches(p, stored->root())) out.emplace_back(stored->root());
  return out;
}

std::optional<OwnedTerm> TupleSpace::try_in(Term pattern) {
  OwnedTerm p(pattern);
  std::unique_lock<std::mutex> lk(mu_);
  return take_locked(p);
}

size_t TupleSpace::size() const {
  std::lock_guard<std::mutex> lk(mu_);
  return tuples_.size();
}

void TupleSpace::close() {
  std::lock_guard<std::mutex> lk(mu_);
  closing_ = true;
  for (auto &w : waiters_) w->cv.notify_all();
}

} // namespace contina
