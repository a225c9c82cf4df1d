#include "support/stub_server.hpp"

#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "ndem/recon.hpp"

using namespace ndem;

namespace {

enum class ReadResult { ok, closed, quiet };

/// Reads exactly n bytes. `quiet` when the peer stalls for quiet_ms after at
/// least one byte of the frame has arrived (or before it, if mid_frame).
ReadResult read_exact(int fd, std::uint8_t* dst, std::size_t n, int quiet_ms, bool mid_frame,
                      const std::atomic<bool>& stop) {
  std::size_t got = 0;
  while (got < n) {
    pollfd p{fd, POLLIN, 0};
    const int wait = (mid_frame || got > 0) ? quiet_ms : 100;
    const int rc = ::poll(&p, 1, wait);
    if (stop.load()) return ReadResult::closed;
    if (rc == 0) {
      if (mid_frame || got > 0) return ReadResult::quiet;
      continue;
    }
    if (rc < 0) {
      if (errno == EINTR) continue;
      return ReadResult::closed;
    }
    const ssize_t r = ::recv(fd, dst + got, n - got, 0);
    if (r <= 0) return ReadResult::closed;
    got += static_cast<std::size_t>(r);
  }
  return ReadResult::ok;
}

bool send_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

/// Discards whatever the peer is still sending until it goes quiet.
void drain(int fd, int quiet_ms) {
  std::uint8_t buf[4096];
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, quiet_ms) <= 0) return;
    if (::recv(fd, buf, sizeof(buf), 0) <= 0) return;
  }
}

}  // namespace

StubServer::StubServer(Mode mode, int quiet_ms) : mode_(mode), quiet_ms_(quiet_ms) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw std::runtime_error("stub: socket failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    ::close(listen_fd_);
    throw std::runtime_error("stub: bind/listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

StubServer::~StubServer() {
  stop_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::lock_guard lock(mutex_);
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  ::close(listen_fd_);
}

void StubServer::accept_loop() {
  while (!stop_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    std::lock_guard lock(mutex_);
    workers_.emplace_back([this, fd] {
      serve(fd);
      ::close(fd);
    });
  }
}

void StubServer::serve(int fd) {
  int served = 0;
  const auto reply_error = [&](wire::ErrorCode code, const std::string& msg) {
    ++errors_;
    return send_all(fd, wire::encode_error({code, msg}));
  };
  while (!stop_) {
    std::vector<std::uint8_t> frame(wire::kRequestHeaderBytes);
    auto rr = read_exact(fd, frame.data(), frame.size(), quiet_ms_, false, stop_);
    if (rr == ReadResult::closed) return;
    if (rr == ReadResult::quiet) {
      if (!reply_error(wire::ErrorCode::malformed, "truncated frame header")) return;
      continue;
    }
    if (std::memcmp(frame.data(), wire::kRequestMagic, 4) != 0) {
      drain(fd, quiet_ms_);
      if (!reply_error(wire::ErrorCode::malformed, "bad magic")) return;
      continue;
    }
    if (wire::read_u32(frame, 4) != wire::kVersion) {
      drain(fd, quiet_ms_);
      if (!reply_error(wire::ErrorCode::bad_version, "unsupported version")) return;
      continue;
    }
    const auto h = wire::read_u32(frame, 8);
    const auto w = wire::read_u32(frame, 12);
    if (h == 0 || w == 0 || h > 4096 || w > 4096) {
      drain(fd, quiet_ms_);
      if (!reply_error(wire::ErrorCode::bad_shape, "shape out of range")) return;
      continue;
    }
    const std::size_t payload = 4 * std::size_t(kFeatureChannels) * h * w;
    frame.resize(frame.size() + payload);
    rr = read_exact(fd, frame.data() + wire::kRequestHeaderBytes, payload, quiet_ms_, true, stop_);
    if (rr == ReadResult::closed) return;
    if (rr == ReadResult::quiet) {
      if (!reply_error(wire::ErrorCode::malformed, "truncated frame payload")) return;
      continue;
    }
    if (h % 4 != 0 || w % 4 != 0) {
      if (!reply_error(wire::ErrorCode::bad_shape, "H and W must be multiples of 4")) return;
      continue;
    }
    if (close_after_ >= 0 && served >= close_after_) return;
    if (mode_ == Mode::fail) {
      if (!reply_error(wire::ErrorCode::internal, "model unavailable")) return;
      continue;
    }
    const FeatureTensor x = wire::decode_request(frame);
    wire::Response r;
    r.height = h;
    r.width = w;
    r.values.assign(2 * std::size_t(h) * w, 0.0f);
    if (mode_ == Mode::echo) {
      const std::size_t plane = std::size_t(h) * w;
      for (int y = 0; y < x.height; ++y) {
        for (int c = 0; c < x.width; ++c) {
          r.values[std::size_t(y) * w + c] = x.at(kMeanZ, c, y);
          r.values[plane + std::size_t(y) * w + c] = x.at(kCount, c, y);
        }
      }
    }
    ++served;
    ++requests_;
    if (!send_all(fd, wire::encode_response(r))) return;
  }
}
