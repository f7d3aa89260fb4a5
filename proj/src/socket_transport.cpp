// SPDX-License-Identifier: Apache-2.0

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "lioncub/errors.hpp"
#include "lioncub/transport.hpp"
#include "lioncub/wire.hpp"

namespace lioncub {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kFrameHeader = 8 + 4 + 4 + 4;

bool write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

// Reads exactly len bytes; false on EOF or error.
bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

sockaddr_in resolve(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw ConfigError("socket transport: cannot resolve host " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

class SocketTransport final : public Transport {
 public:
  SocketTransport(int rank, int world_size, const SocketOptions& opts)
      : rank_(rank), world_size_(world_size),
        peers_(static_cast<std::size_t>(world_size)) {
    const auto deadline = Clock::now() + opts.connect_timeout;
    try {
      const int listen_fd = listen_on(opts.base_port + rank);
      for (int peer = 0; peer < rank; ++peer) {
        peers_[peer].fd = connect_to(opts.host, opts.base_port + peer, deadline);
      }
      for (int accepted = 0; accepted < world_size - 1 - rank; ++accepted) {
        accept_one(listen_fd, deadline);
      }
      ::close(listen_fd);
    } catch (...) {
      close_all();
      throw;
    }
    for (int peer = 0; peer < world_size; ++peer) {
      if (peer == rank) continue;
      peers_[peer].reader = std::thread([this, peer] { read_loop(peer); });
    }
  }

  ~SocketTransport() override {
    for (auto& p : peers_) {
      if (p.fd >= 0) ::shutdown(p.fd, SHUT_WR);
    }
    drain_deadline_ = Clock::now() + std::chrono::seconds(5);
    stopping_ = true;
    for (auto& p : peers_) {
      if (p.reader.joinable()) p.reader.join();
    }
    close_all();
  }

  int rank() const override { return rank_; }
  int world_size() const override { return world_size_; }
  std::string name() const override { return "socket"; }

  bool send(int dest, Message msg, std::chrono::milliseconds) override {
    if (dest < 0 || dest >= world_size_) {
      throw ConfigError("socket transport: rank out of range");
    }
    if (dest == rank_) {
      push(rank_, std::move(msg));
      return true;
    }
    wire::Bytes frame;
    frame.reserve(kFrameHeader + msg.payload.size());
    wire::put_le<std::uint64_t>(frame, msg.generation);
    wire::put_le<std::int32_t>(frame, msg.source);
    wire::put_le<std::int32_t>(frame, msg.tag);
    wire::put_le<std::uint32_t>(frame,
                                static_cast<std::uint32_t>(msg.payload.size()));
    frame.insert(frame.end(), msg.payload.begin(), msg.payload.end());
    auto& p = peers_[dest];
    std::lock_guard lock(p.send_mu);
    return write_all(p.fd, frame.data(), frame.size());
  }

  std::optional<Message> recv(int source,
                              std::chrono::milliseconds timeout) override {
    if (source < 0 || source >= world_size_) {
      throw ConfigError("socket transport: rank out of range");
    }
    auto& p = peers_[source];
    std::unique_lock lock(p.mu);
    if (!p.cv.wait_for(lock, timeout,
                       [&] { return !p.inbox.empty() || p.closed; })) {
      return std::nullopt;
    }
    if (p.inbox.empty()) return std::nullopt;
    Message m = std::move(p.inbox.front());
    p.inbox.pop_front();
    return m;
  }

 private:
  struct Peer {
    int fd = -1;
    std::thread reader;
    std::mutex send_mu;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Message> inbox;
    bool closed = false;
  };

  int listen_on(int port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket(): " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(fd, world_size_) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd);
      throw std::runtime_error("cannot listen on port " + std::to_string(port) +
                               ": " + err);
    }
    return fd;
  }

  int connect_to(const std::string& host, int port, Clock::time_point deadline) {
    const sockaddr_in addr = resolve(host, port);
    while (true) {
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw std::runtime_error("socket(): " + std::string(std::strerror(errno)));
      if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
        set_nodelay(fd);
        wire::Bytes hdr;
        wire::put_le<std::int32_t>(hdr, rank_);
        if (!write_all(fd, hdr.data(), hdr.size())) {
          ::close(fd);
          throw CollectiveError("handshake failed", 0, "connect", port);
        }
        return fd;
      }
      ::close(fd);
      if (Clock::now() > deadline) {
        throw CollectiveError("cannot connect to " + host + ":" + std::to_string(port),
                              0, "connect", port);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }

  void accept_one(int listen_fd, Clock::time_point deadline) {
    while (true) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - Clock::now());
      if (left.count() <= 0) {
        throw CollectiveError("timed out accepting peers", 0, "accept", -1);
      }
      pollfd pfd{listen_fd, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready <= 0) continue;
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      set_nodelay(fd);
      std::uint8_t hdr[4];
      if (!read_all(fd, hdr, 4)) {
        ::close(fd);
        continue;
      }
      const auto peer = wire::get_le<std::int32_t>(hdr, 0);
      if (peer <= rank_ || peer >= world_size_ || peers_[peer].fd >= 0) {
        ::close(fd);
        throw CollectiveError("unexpected peer rank in handshake", 0, "accept", peer);
      }
      peers_[peer].fd = fd;
      return;
    }
  }

  void read_loop(int peer) {
    auto& p = peers_[peer];
    while (true) {
      pollfd pfd{p.fd, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, 200);
      if (ready == 0) {
        if (stopping_ && Clock::now() > drain_deadline_.load()) break;
        continue;
      }
      if (ready < 0 && errno == EINTR) continue;
      std::uint8_t hdr[kFrameHeader];
      if (ready < 0 || !read_all(p.fd, hdr, kFrameHeader)) break;
      Message m;
      m.generation = wire::get_le<std::uint64_t>(hdr, 0);
      m.source = wire::get_le<std::int32_t>(hdr, 8);
      m.tag = wire::get_le<std::int32_t>(hdr, 12);
      const auto len = wire::get_le<std::uint32_t>(hdr, 16);
      m.payload.resize(len);
      if (len > 0 && !read_all(p.fd, m.payload.data(), len)) break;
      push(peer, std::move(m));
    }
    std::lock_guard lock(p.mu);
    p.closed = true;
    p.cv.notify_all();
  }

  void push(int source, Message m) {
    auto& p = peers_[source];
    std::lock_guard lock(p.mu);
    p.inbox.push_back(std::move(m));
    p.cv.notify_all();
  }

  void close_all() {
    for (auto& p : peers_) {
      if (p.fd >= 0) {
        ::close(p.fd);
        p.fd = -1;
      }
    }
  }

  int rank_;
  int world_size_;
  std::vector<Peer> peers_;
  std::atomic<bool> stopping_{false};
  std::atomic<Clock::time_point> drain_deadline_{Clock::time_point::max()};
};

}  // namespace

std::unique_ptr<Transport> connect_socket_transport(int rank, int world_size,
                                                    const SocketOptions& opts) {
  if (world_size < 1 || rank < 0 || rank >= world_size) {
    throw ConfigError("socket transport: invalid rank/world size");
  }
  return std::make_unique<SocketTransport>(rank, world_size, opts);
}

}  // namespace lioncub
