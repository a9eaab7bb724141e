#include "wire.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "reader.hpp"
#include "writer.hpp"

namespace contina {

PrologError net_error(std::string_view reason) {
  std::string text = "net_error(";
  quote_atom_into(reason, text);
  text += ")";
  return PrologError(std::move(text));
}

namespace {

PrologError net_errno(const char *what) {
  std::string reason = what;
  reason += ": ";
  reason += std::strerror(errno);
  return net_error(reason);
}

// Reads exactly n bytes unless the peer closes or errors out. Returns the
// byte count actually read; sets *failed on a socket error.
size_t read_exact(int fd, char *buf, size_t n, bool *failed) {
  size_t got = 0;
  *failed = false;
  while (got < n) {
    ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r > 0) {
      got += size_t(r);
      continue;
    }
    if (r == 0) return got;
    if (errno == EINTR) continue;
    *failed = true;
    return got;
  }
  return got;
}

void write_all(int fd, const char *buf, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r >= 0) {
      sent += size_t(r);
      continue;
    }
    if (errno == EINTR) continue;
    throw net_errno("send");
  }
}

} // namespace

Socket &Socket::operator=(Socket &&other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown_write() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

Listener::Listener(const std::string &host, uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo *res = nullptr;
  std::string port_text = std::to_string(port);
  int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(),
                         port_text.c_str(), &hints, &res);
  if (rc != 0) throw net_error(std::string("bind: ") + gai_strerror(rc));
  int fd = -1;
  for (addrinfo *ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw net_errno("bind");
  if (::listen(fd, 64) != 0) {
    int e = errno;
    ::close(fd);
    errno = e;
    throw net_errno("listen");
  }
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(fd, reinterpret_cast<sockaddr *>(&addr), &len) != 0) {
    int e = errno;
    ::close(fd);
    errno = e;
    throw net_errno("getsockname");
  }
  fd_ = fd;
  port_ = ntohs(addr.sin_port);
}

Socket Listener::accept() {
  while (true) {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return Socket(fd);
    if (errno == EINTR) continue;
    // shutdown() surfaces here; callers treat an invalid Socket as stop.
    return Socket();
  }
}

void Listener::shutdown() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void send_frame(Socket &s, std::string_view payload) {
  if (!s.valid()) throw net_error("send on closed socket");
  if (payload.size() > kMaxFramePayload)
    throw err_term("frame_too_large");
  unsigned char hdr[4] = {
      static_cast<unsigned char>((payload.size() >> 24) & 0xff),
      static_cast<unsigned char>((payload.size() >> 16) & 0xff),
      static_cast<unsigned char>((payload.size() >> 8) & 0xff),
      static_cast<unsigned char>(payload.size() & 0xff),
  };
  write_all(s.fd(), reinterpret_cast<const char *>(hdr), 4);
  write_all(s.fd(), payload.data(), payload.size());
}

std::optional<std::string> recv_frame(Socket &s) {
  if (!s.valid()) throw net_error("recv on closed socket");
  char hdr[4];
  bool failed = false;
  size_t got = read_exact(s.fd(), hdr, 4, &failed);
  if (failed) throw net_errno("recv");
  if (got == 0) return std::nullopt;
  if (got < 4) throw err_term("protocol_error");
  size_t len = (size_t(static_cast<unsigned char>(hdr[0])) << 24) |
               (size_t(static_cast<unsigned char>(hdr[1])) << 16) |
               (size_t(static_cast<unsigned char>(hdr[2])) << 8) |
               size_t(static_cast<unsigned char>(hdr[3]));
  if (len > kMaxFramePayload) throw err_term("frame_too_large");
  std::string payload(len, '\0');
  if (len > 0) {
    got = read_exact(s.fd(), payload.data(), len, &failed);
    if (failed) throw net_errno("recv");
    if (got < len) throw err_term("protocol_error");
  }
  return payload;
}

void send_term(Socket &s, Term t) { send_frame(s, canonical_text(t)); }

std::optional<Term> recv_term(Socket &s, TermPool &pool) {
  auto payload = recv_frame(s);
  if (!payload) return std::nullopt;
  try {
    return parse_term_text(pool, *payload);
  } catch (const PrologError &) {
    throw err_term("protocol_error");
  }
}

Socket tcp_connect(const std::string &host, uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo *res = nullptr;
  std::string port_text = std::to_string(port);
  int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &res);
  if (rc != 0) throw net_error(std::string("connect: ") + gai_strerror(rc));
  int fd = -1;
  int saved = 0;
  for (addrinfo *ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      saved = errno;
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    saved = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    errno = saved;
    throw net_errno("connect");
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Socket(fd);
}

Term request(TermPool &pool, const std::string &host, uint16_t port,
             Term msg) {
  Socket s = tcp_connect(host, port);
  send_term(s, msg);
  auto reply = recv_term(s, pool);
  if (!reply) throw net_error("peer closed without replying");
  return *reply;
}

} // namespace contina
