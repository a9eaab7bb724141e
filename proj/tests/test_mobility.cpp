#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "core/mobility.hpp"
#include "core/node.hpp"
#include "core/reader.hpp"
#include "core/writer.hpp"
#include "testing.hpp"

using namespace contina;
using namespace contina::testing;
using namespace std::chrono_literals;

namespace {

// A server node plus a client runtime whose there-target points at it.
struct MobPair {
  Runtime server_rt;
  Node server;
  Runtime client;
  std::ostringstream server_out, client_out;

  explicit MobPair(NodeConfig cfg = {}) : server(server_rt, std::move(cfg)) {
    register_net_builtins(server_rt);
    register_mobility_builtins(server_rt);
    register_net_builtins(client);
    register_mobility_builtins(client);
    server_rt.set_out(&server_out);
    client.set_out(&client_out);
    server.start();
    client.net().target =
        Peer{"127.0.0.1", server.port(), server.password()};
  }
  ~MobPair() { server.stop(); }
};

struct EvtLog {
  std::mutex mu;
  std::vector<std::string> lines;
  void attach(Runtime &rt) {
    rt.set_evt_sink([this](std::string_view k, std::string_view d) {
      std::lock_guard<std::mutex> lk(mu);
      lines.push_back(std::string(k) + " " + std::string(d));
    });
  }
  long count(const std::string &line) {
    std::lock_guard<std::mutex> lk(mu);
    return std::count(lines.begin(), lines.end(), line);
  }
  long count_prefix(const std::string &prefix) {
    std::lock_guard<std::mutex> lk(mu);
    long n = 0;
    for (auto &l : lines)
      if (l.rfind(prefix, 0) == 0) ++n;
    return n;
  }
};

} // namespace

TEST_CASE("move runs the rest of the branch on the server") {
  MobPair mp;
  mp.client.consult_text("d(X) :- there, move, X = 42.\n");
  CHECK(first_value(mp.client, "d(X)", "X") == "42");
}

TEST_CASE("side effects before return land in the server's log") {
  MobPair mp;
  mp.client.consult_text(
      "go(X) :- there, move, println(on_server), member(X, [1, 2, 3]), "
      "return, println(back).\n");
  CHECK(first_value(mp.client, "go(X)", "X") == "1");
  CHECK(mp.server_out.str() == "on_server\n");
  CHECK(mp.client_out.str() == "back\n");
}

TEST_CASE("bindings made on both sides of return stick") {
  MobPair mp;
  mp.client.consult_text(
      "r(X, Y) :- there, move, X = got, return, Y = local.\n");
  Query q(mp.client, "r(X, Y)");
  auto a = q.next();
  REQUIRE(a.has_value());
  CHECK((*a)[0].second == "got");
  CHECK((*a)[1].second == "local");
}

TEST_CASE("findall before return emulates remote nondeterminism") {
  MobPair mp;
  mp.client.consult_text(
      "fa(X) :- there, move, findall(V, member(V, [a, b, c]), Xs), "
      "return, member(X, Xs).\n");
  CHECK(values_of(mp.client, "fa(X)", "X") ==
        std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("a moved segment yields only its first solution") {
  MobPair mp;
  mp.client.consult_text("fs(X) :- there, move, member(X, [p, q, r]).\n");
  CHECK(values_of(mp.client, "fs(X)", "X") == std::vector<std::string>{"p"});
  // Local oracle: once/1 over the same conjunction.
  CHECK(first_value(mp.client, "once(member(X, [p, q, r]))", "X") == "p");
}

TEST_CASE("a segment that fails remotely fails the move") {
  MobPair mp;
  mp.client.consult_text("f(X) :- there, move, X = 1, fail.\n");
  CHECK(count_solutions(mp.client, "f(X)") == 0);
  // The client engine survives and can still migrate.
  mp.client.consult_text("g(X) :- there, move, X = fine.\n");
  CHECK(first_value(mp.client, "g(X)", "X") == "fine");
}

TEST_CASE("unknown predicates are fetched from the base once") {
  MobPair mp;
  EvtLog server_log;
  server_log.attach(mp.server_rt);
  mp.client.consult_text("double(X, Y) :- Y is X + X.\n"
                         "m(Y) :- there, move, double(21, Y).\n");
  CHECK(first_value(mp.client, "m(Y)", "Y") == "42");
  CHECK(server_log.count("frame_out fetch") == 1);
  // Cached: a second migration resolves double/2 from the server's store.
  CHECK(first_value(mp.client, "m(Y)", "Y") == "42");
  CHECK(server_log.count("frame_out fetch") == 1);
  // The fetched clauses are ordinary code on the server now.
  CHECK(first_value(mp.server_rt, "double(2, Z)", "Z") == "4");
}

TEST_CASE("fetching follows clause chains predicate by predicate") {
  MobPair mp;
  EvtLog server_log;
  server_log.attach(mp.server_rt);
  mp.client.consult_text(
      "app2([], Ys, Ys).\n"
      "app2([X|Xs], Ys, [X|Zs]) :- app2(Xs, Ys, Zs).\n"
      "rev2([], []).\n"
      "rev2([X|Xs], Zs) :- rev2(Xs, Ys), app2(Ys, [X], Zs).\n"
      "mr(Zs) :- there, move, rev2([1, 2, 3], Zs), return.\n");
  CHECK(first_value(mp.client, "mr(Zs)", "Zs") == "[3,2,1]");
  // One fetch per distinct base predicate.
  CHECK(server_log.count("frame_out fetch") == 2);
}

TEST_CASE("return without a move in scope is an error") {
  Runtime rt;
  register_net_builtins(rt);
  register_mobility_builtins(rt);
  CHECK(error_of(rt, "return") == "not_migrated");
  rt.consult_text("deep :- return.\n");
  CHECK(error_of(rt, "deep") == "not_migrated");
}

TEST_CASE("move without a target runs the segment locally") {
  Runtime rt;
  register_net_builtins(rt);
  register_mobility_builtins(rt);
  EvtLog log;
  log.attach(rt);
  rt.consult_text("l(X) :- move, X = stayed.\n");
  CHECK(first_value(rt, "l(X)", "X") == "stayed");
  CHECK(log.count_prefix("frame_out") == 0);
}

TEST_CASE("here cancels a pending there") {
  MobPair mp;
  EvtLog client_log;
  client_log.attach(mp.client);
  mp.client.consult_text("h(X) :- there, here, move, X = stayed.\n");
  CHECK(first_value(mp.client, "h(X)", "X") == "stayed");
  CHECK(client_log.count_prefix("frame_out") == 0);
}

TEST_CASE("there with no configured target is an error") {
  Runtime rt;
  register_net_builtins(rt);
  register_mobility_builtins(rt);
  CHECK(error_of(rt, "there") == "existence_error(no_target)");
}

TEST_CASE("an unreachable target degrades move to local execution") {
  Runtime rt;
  register_net_builtins(rt);
  register_mobility_builtins(rt);
  uint16_t dead;
  {
    Listener probe("127.0.0.1", 0);
    dead = probe.port();
  }
  rt.net().target = Peer{"127.0.0.1", dead, "pw"};
  EvtLog log;
  log.attach(rt);
  rt.consult_text("u(X) :- there, move, X = ok.\n");
  CHECK(first_value(rt, "u(X)", "X") == "ok");
  CHECK(log.count_prefix("move_unreachable") == 1);
}

TEST_CASE("explicit there/3 targets a named node") {
  MobPair mp;
  Runtime other;
  register_net_builtins(other);
  register_mobility_builtins(other);
  other.consult_text(
      "t(X) :- there('127.0.0.1', " + std::to_string(mp.server.port()) +
      ", '" + mp.server.password() + "'), move, X = named.\n");
  CHECK(first_value(other, "t(X)", "X") == "named");
}

TEST_CASE("a returned continuation can move again") {
  MobPair mp;
  mp.client.consult_text(
      "pp(X, Y) :- there, move, X = one, return, there, move, Y = two.\n");
  Query q(mp.client, "pp(X, Y)");
  auto a = q.next();
  REQUIRE(a.has_value());
  CHECK((*a)[0].second == "one");
  CHECK((*a)[1].second == "two");
}

TEST_CASE("move ships segments opened under an assumption scope") {
  MobPair mp;
  mp.client.consult_text(
      "sc(X) :- flag(a) =>> scbody(X).\n"
      "scbody(X) :- there, move, X = inside.\n");
  CHECK(first_value(mp.client, "sc(X)", "X") == "inside");
}

TEST_CASE("move_thread hands the captured continuation to a servant") {
  NodeConfig cfg;
  cfg.servant = true;
  MobPair mp(cfg);
  mp.client.consult_text(
      "payload(brought).\n"
      "go :- there, capture_cont_for((move_thread, payload(P), "
      "out(got(P)))).\n");
  CHECK(succeeds(mp.client, "go"));
  // The task ran on the hub: its space holds the tuple, built from a
  // predicate fetched from the base.
  CHECK(first_value(mp.server_rt, "in(got(P))", "P") == "brought");
}

TEST_CASE("a failing migrated task still releases the base") {
  NodeConfig cfg;
  cfg.servant = true;
  MobPair mp(cfg);
  mp.client.consult_text(
      "go2 :- there, capture_cont_for((move_thread, fail)), out(resumed).\n");
  CHECK(succeeds(mp.client, "go2"));
  CHECK(succeeds(mp.client, "in(resumed)"));
}

TEST_CASE("move_thread with an unreachable target raises net_error") {
  Runtime rt;
  register_net_builtins(rt);
  register_mobility_builtins(rt);
  uint16_t dead;
  {
    Listener probe("127.0.0.1", 0);
    dead = probe.port();
  }
  rt.net().target = Peer{"127.0.0.1", dead, "pw"};
  rt.consult_text("gone :- there, capture_cont_for(move_thread).\n");
  std::string err = error_of(rt, "gone");
  CHECK(err.substr(0, 9) == "net_error");
}

TEST_CASE("move_thread outside a capture scope reports the missing marker") {
  Runtime rt;
  register_net_builtins(rt);
  register_mobility_builtins(rt);
  CHECK(error_of(rt, "move_thread") ==
        "assumption_missing(call_with_cont)");
}
