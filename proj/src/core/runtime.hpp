#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>

#include "engine.hpp"
#include "linda.hpp"
#include "store.hpp"

namespace contina {

struct RuntimeConfig {
  ThermoConfig thermo;
  TierPolicy tier_policy = TierPolicy::Auto;
  bool occurs_check = false;
  EngineCaps default_caps;
  bool load_lib = true;
  // Fixed 5s settle pause before executing migrated work, instead of
  // probing the sender's code server until it answers.
  bool fixed_settle_delay = false;
};

// Where networked builtins go when the goal names no node explicitly.
struct NetDefaults {
  std::optional<Peer> master; // directory node; also the shared tuple space
  std::optional<Peer> target; // destination for move/0 and remote_run/1
};

// Called on unknown_predicate before the error is raised. Returns true when
// it installed clauses for the key (resolution then retries once).
using FetchHook = std::function<bool(Engine &, const PredKey &)>;

class Runtime {
public:
  explicit Runtime(RuntimeConfig cfg = {});
  ~Runtime();

  Runtime(const Runtime &) = delete;
  Runtime &operator=(const Runtime &) = delete;

  Store &store() { return store_; }
  TupleSpace &space() { return space_; }
  const RuntimeConfig &config() const { return cfg_; }
  NetDefaults &net() { return net_; }

  void register_builtin(std::string_view name, uint32_t arity, Builtin fn);
  const Builtin *find_builtin(const PredKey &k) const;
  bool is_builtin(const PredKey &k) const;

  // Consult source text: clauses are binarized and asserted; ':-'(Goal)
  // directives run once in a scratch engine.
  void consult_text(std::string_view source, std::string_view origin = "local");
  void consult_file(const std::string &path);

  std::unique_ptr<Engine> make_engine();
  std::unique_ptr<Engine> make_engine(EngineCaps caps, Engine *parent);

  // Prolog-visible engine handles.
  int64_t new_engine_handle(EngineCaps caps);
  Engine *engine(int64_t h);
  void destroy_engine(int64_t h);

  // Threads driving registered engines; answers arrive in the tuple space
  // as answer(Handle, the(T)) / answer(Handle, no).
  int64_t ask_thread(int64_t engine_handle);
  void thread_join(int64_t th);
  void thread_suspend(int64_t th);
  void thread_resume(int64_t th);
  void thread_cancel(int64_t th);
  void join_all_threads();

  // Named in-process monitors (synchronize_on). acquire blocks; release is
  // idempotent per handle.
  int64_t acquire_monitor(const std::string &key);
  void release_monitor(int64_t handle);

  void set_fetch_hook(FetchHook hook);
  bool run_fetch_hook(Engine &e, const PredKey &k);

  // Output stream for write/println (defaults to stdout).
  std::ostream &out();
  void set_out(std::ostream *os);

  // EVT protocol lines ("EVT kind=<k> detail=<d>"), default to stderr.
  void evt(std::string_view kind, std::string_view detail);
  void set_evt_sink(std::function<void(std::string_view, std::string_view)> s);

  uint64_t next_token() { return token_counter_.fetch_add(1) + 1; }

private:
  RuntimeConfig cfg_;
  NetDefaults net_;
  Store store_;
  TupleSpace space_;
  std::unordered_map<PredKey, Builtin, PredKeyHash> builtins_;

  mutable std::mutex reg_mu_;
  std::map<int64_t, std::unique_ptr<Engine>> engines_;
  struct ThreadRec {
    std::thread th;
    int64_t engine_handle = 0;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::map<int64_t, ThreadRec> threads_;
  int64_t next_handle_ = 1;

  std::mutex mon_mu_;
  std::condition_variable mon_cv_;
  std::map<std::string, bool> mon_locked_;
  std::map<int64_t, std::string> mon_handles_;

  std::mutex hook_mu_;
  FetchHook fetch_hook_;

  std::atomic<uint64_t> token_counter_{0};
  std::ostream *out_;
  std::mutex evt_mu_;
  std::function<void(std::string_view, std::string_view)> evt_sink_;
};

// Registered by the core; mobility/net layers add their own on top.
void register_core_builtins(Runtime &rt);

// Prolog-level library source compiled into every runtime.
extern const char *const kLibrarySource;

} // namespace contina
