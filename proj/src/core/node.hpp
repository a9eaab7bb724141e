#pragma once

// TCP node speaking the framed term protocol: serves the runtime's tuple
// space, one-shot remote queries, code fetches, and file loads. Requests
// that change or read code (run, fetch, rload, stop) are password gated;
// tuple traffic and the directory (register, lookup) are open.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "runtime.hpp"
#include "wire.hpp"

namespace contina {

struct NodeConfig {
  std::string host = "127.0.0.1";
  uint16_t port = 0;           // 0 picks an ephemeral port
  std::string password;        // random 128-bit token when empty
  std::optional<Peer> master;  // announce there on start
  std::string channel = "main";
  bool servant = false;        // consume todo(G) tuples from the own space
  bool strict_servant = false; // a failing task then stops the servant
};

class Node {
public:
  Node(Runtime &rt, NodeConfig cfg);
  ~Node();

  void start();
  void stop();
  // Blocks until stop() or an authorized stop(Password) frame arrives.
  void wait();

  bool running() const { return running_.load(); }
  uint16_t port() const { return port_; }
  const std::string &password() const { return cfg_.password; }
  const NodeConfig &config() const { return cfg_; }
  Runtime &runtime() { return rt_; }

private:
  void accept_loop();
  void serve(Socket s);
  // One reply per request. A correctly authorized stop sets stop_node.
  Term dispatch(TermPool &pool, Term msg, bool &stop_node);
  bool password_ok(Term t) const;
  void servant_loop();
  void begin_shutdown();

  Runtime &rt_;
  NodeConfig cfg_;
  std::unique_ptr<Listener> listener_;
  uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::thread servant_thread_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
  std::vector<int> conn_fds_; // open connections, for shutdown wakeups
  std::mutex wait_mu_;
  std::condition_variable wait_cv_;
};

// Password token with 128 random bits.
std::string random_password();

// Client-side round trip, logged as an EVT frame_out line.
Term node_request(Runtime &rt, TermPool &pool, const Peer &peer, Term msg);

// Pulls todo(G) tuples from the node at peer over the wire and executes
// each G in a fresh local engine. Failing tasks are logged and skipped
// unless strict. Returns when the peer goes away or stop_flag is set.
void remote_servant_loop(Runtime &rt, const Peer &peer, bool strict,
                         std::atomic<bool> *stop_flag = nullptr);

// remote_run/1,4, rload/1, linda_out/1, linda_in/1, linda_all/2,
// ask_all_servers/3, stop_server/3 and the server readiness probe.
void register_net_builtins(Runtime &rt);

} // namespace contina
