#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <thread>
#include <vector>

/// Minimal NDIR/NDIS server for protocol tests. Each connection is served on
/// its own thread; one request in flight per connection.
class StubServer {
 public:
  enum class Mode {
    zeros,  // heights 0 and log sigma 0
    echo,   // height = mean-height channel, log sigma = count channel
    fail,   // every well-formed request gets an internal-error frame
  };

  explicit StubServer(Mode mode = Mode::zeros, int quiet_ms = 150);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  int requests() const noexcept { return requests_.load(); }
  int errors() const noexcept { return errors_.load(); }
  /// Connections are dropped without reply after this many good requests.
  void close_after(int n) noexcept { close_after_ = n; }

 private:
  void accept_loop();
  void serve(int fd);

  Mode mode_;
  int quiet_ms_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<int> requests_{0};
  std::atomic<int> errors_{0};
  std::atomic<int> close_after_{-1};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
};
