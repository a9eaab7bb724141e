#include "runtime.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "reader.hpp"
#include "writer.hpp"

namespace contina {

const char *const kLibrarySource = R"PL(
member(X, [X|_]).
member(X, [_|Xs]) :- member(X, Xs).

append([], Ys, Ys).
append([X|Xs], Ys, [X|Zs]) :- append(Xs, Ys, Zs).

length([], 0).
length([_|Xs], N) :- length(Xs, M), N is M + 1.

for(I, L, H) :- L =< H, (I = L ; L1 is L + 1, for(I, L1, H)).

once(G) :- G -> true ; fail.
not(G) :- G -> fail ; true.

capture_cont_for(Goal) :- assumeal(cont_marker(End)), Goal, end_cont(End).

call_with_cont(Closure) :-
  assumed(cont_marker(End)) -> consume_cont(Closure, End)
  ; errmes(assumption_missing(call_with_cont)).
)PL";

Runtime::Runtime(RuntimeConfig cfg)
    : cfg_(cfg), store_(cfg.thermo, cfg.tier_policy), out_(&std::cout) {
  store_.set_event_sink(
      [this](std::string k, std::string d) { evt(k, d); });
  register_core_builtins(*this);
  if (cfg_.load_lib) consult_text(kLibrarySource, "lib");
}

Runtime::~Runtime() {
  {
    std::lock_guard<std::mutex> lk(reg_mu_);
    for (auto &[h, e] : engines_) {
      e->request_cancel();
      e->resume();
    }
  }
  space_.close();
  join_all_threads();
}

void Runtime::register_builtin(std::string_view name, uint32_t arity,
                               Builtin fn) {
  builtins_[PredKey{intern(name), arity}] = std::move(fn);
}

const Builtin *Runtime::find_builtin(const PredKey &k) const {
  auto it = builtins_.find(k);
  return it == builtins_.end() ? nullptr : &it->second;
}

bool Runtime::is_builtin(const PredKey &k) const {
  return builtins_.count(k) > 0;
}

void Runtime::consult_text(std::string_view source, std::string_view origin) {
  TermPool pool;
  for (Term t : parse_program_text(pool, source)) {
    Term d = deref(t);
    if (d->tag == Tag::Struct && d->sym == sym::bclause() &&
        d->args.size() == 2)
      store_.assert_clause(false, bin_clause_from_term(d), origin);
    else
      store_.assert_clause(false, binarize_clause(pool, clause_from_term(d)),
                           origin);
  }
}

void Runtime::consult_file(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw PrologError("net_error(consult)");
  std::ostringstream ss;
  ss << f.rdbuf();
  consult_text(ss.str(), path);
}

std::unique_ptr<Engine> Runtime::make_engine() {
  return std::make_unique<Engine>(*this, cfg_.default_caps, nullptr);
}

std::unique_ptr<Engine> Runtime::make_engine(EngineCaps caps, Engine *parent) {
  return std::make_unique<Engine>(*this, caps, parent);
}

int64_t Runtime::new_engine_handle(EngineCaps caps) {
  std::lock_guard<std::mutex> lk(reg_mu_);
  int64_t h = next_handle_++;
  engines_.emplace(h, std::make_unique<Engine>(*this, caps, nullptr));
  return h;
}

Engine *Runtime::engine(int64_t h) {
  std::lock_guard<std::mutex> lk(reg_mu_);
  auto it = engines_.find(h);
  return it == engines_.end() ? nullptr : it->second.get();
}

void Runtime::destroy_engine(int64_t h) {
  std::lock_guard<std::mutex> lk(reg_mu_);
  engines_.erase(h);
}

int64_t Runtime::ask_thread(int64_t engine_handle) {
  Engine *eng = engine(engine_handle);
  if (!eng) throw PrologError("stale_handle");
  std::lock_guard<std::mutex> lk(reg_mu_);
  int64_t th = next_handle_++;
  ThreadRec rec;
  rec.engine_handle = engine_handle;
  rec.done = std::make_shared<std::atomic<bool>>(false);
  auto done = rec.done;
  rec.th = std::thread([this, eng, th, done] {
    TermPool pool;
    Term result;
    try {
      auto r = eng->ask();
      result = r ? pool.make_struct("the", {r->instantiate(pool)})
                 : pool.make_atom("no");
    } catch (PrologError &ex) {
      Term reason;
      try {
        reason = parse_term_text(pool, ex.term);
      } catch (...) {
        reason = pool.make_atom("unknown");
      }
      result = pool.make_struct("err", {reason});
    } catch (...) {
      result = pool.make_struct("err", {pool.make_atom("unknown")});
    }
    Term tuple = pool.make_struct("answer", {pool.make_int(th), result});
    try {
      space_.out(tuple);
    } catch (...) {
      // Space already closed during teardown; the answer has no taker.
    }
    done->store(true);
  });
  threads_.emplace(th, std::move(rec));
  return th;
}

void Runtime::thread_join(int64_t th) {
  std::thread t;
  {
    std::lock_guard<std::mutex> lk(reg_mu_);
    auto it = threads_.find(th);
    if (it == threads_.end()) return; // already joined: returns immediately
    t = std::move(it->second.th);
    threads_.erase(it);
  }
  if (t.joinable()) t.join();
}

void Runtime::thread_suspend(int64_t th) {
  std::lock_guard<std::mutex> lk(reg_mu_);
  auto it = threads_.find(th);
  if (it == threads_.end()) return;
  auto eit = engines_.find(it->second.engine_handle);
  if (eit != engines_.end()) eit->second->suspend();
}

void Runtime::thread_resume(int64_t th) {
  std::lock_guard<std::mutex> lk(reg_mu_);
  auto it = threads_.find(th);
  if (it == threads_.end()) return;
  auto eit = engines_.find(it->second.engine_handle);
  if (eit != engines_.end()) eit->second->resume();
}

void Runtime::thread_cancel(int64_t th) {
  std::lock_guard<std::mutex> lk(reg_mu_);
  auto it = threads_.find(th);
  if (it == threads_.end()) return;
  auto eit = engines_.find(it->second.engine_handle);
  if (eit != engines_.end()) {
    eit->second->request_cancel();
    eit->second->resume();
  }
}

void Runtime::join_all_threads() {
  std::vector<std::thread> ts;
  {
    std::lock_guard<std::mutex> lk(reg_mu_);
    for (auto &[h, rec] : threads_)
      if (rec.th.joinable()) ts.push_back(std::move(rec.th));
    threads_.clear();
  }
  for (auto &t : ts) t.join();
}

int64_t Runtime::acquire_monitor(const std::string &key) {
  std::unique_lock<std::mutex> lk(mon_mu_);
  mon_cv_.wait(lk, [&] { return !mon_locked_[key]; });
  mon_locked_[key] = true;
  int64_t h = int64_t(next_token());
  mon_handles_[h] = key;
  return h;
}

void Runtime::release_monitor(int64_t handle) {
  std::lock_guard<std::mutex> lk(mon_mu_);
  auto it = mon_handles_.find(handle);
  if (it == mon_handles_.end()) return; // released already
  mon_locked_[it->second] = false;
  mon_handles_.erase(it);
  mon_cv_.notify_all();
}

void Runtime::set_fetch_hook(FetchHook hook) {
  std::lock_guard<std::mutex> lk(hook_mu_);
  fetch_hook_ = std::move(hook);
}

bool Runtime::run_fetch_hook(Engine &e, const PredKey &k) {
  FetchHook hook;
  {
    std::lock_guard<std::mutex> lk(hook_mu_);
    hook = fetch_hook_;
  }
  return hook ? hook(e, k) : false;
}

std::ostream &Runtime::out() { return *out_; }

void Runtime::set_out(std::ostream *os) { out_ = os ? os : &std::cout; }

void Runtime::evt(std::string_view kind, std::string_view detail) {
  std::lock_guard<std::mutex> lk(evt_mu_);
  if (evt_sink_) {
    evt_sink_(kind, detail);
    return;
  }
  std::cerr << "EVT kind=" << kind << " detail=" << detail << "\n";
  std::cerr.flush();
}

void Runtime::set_evt_sink(
    std::function<void(std::string_view, std::string_view)> s) {
  std::lock_guard<std::mutex> lk(evt_mu_);
  evt_sink_ = std::move(s);
}

} // namespace contina
