#pragma once

// Framed term transport over TCP. A frame is a 4-byte big-endian payload
// length followed by that many bytes of canonical term text (UTF-8).
// Payloads are capped at 2^24 bytes. Failures surface as Prolog error
// terms: frame_too_large, protocol_error, net_error(Reason).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "term.hpp"

namespace contina {

constexpr size_t kMaxFramePayload = size_t(1) << 24;

// Owning wrapper for a connected socket descriptor.
class Socket {
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket &&other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Socket &operator=(Socket &&other) noexcept;
  Socket(const Socket &) = delete;
  Socket &operator=(const Socket &) = delete;
  ~Socket() { close(); }

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();
  // Half-close for writing; the peer sees EOF after draining.
  void shutdown_write();

private:
  int fd_ = -1;
};

// Bound, listening TCP socket. Port 0 picks an ephemeral port; the chosen
// one is readable afterwards. shutdown() unblocks a pending accept, which
// then returns an invalid Socket.
class Listener {
public:
  Listener(const std::string &host, uint16_t port);
  Listener(Listener &&) = delete;
  ~Listener() { shutdown(); }

  uint16_t port() const { return port_; }
  Socket accept();
  void shutdown();

private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

void send_frame(Socket &s, std::string_view payload);

// One whole payload, or nullopt when the peer closed cleanly between
// frames. Truncation mid-frame is protocol_error.
std::optional<std::string> recv_frame(Socket &s);

void send_term(Socket &s, Term t);
std::optional<Term> recv_term(Socket &s, TermPool &pool);

Socket tcp_connect(const std::string &host, uint16_t port);

// Single round trip: connect, send msg, read one reply, close.
Term request(TermPool &pool, const std::string &host, uint16_t port,
             Term msg);

// net_error(Reason) with the reason quoted as an atom.
PrologError net_error(std::string_view reason);

} // namespace contina
