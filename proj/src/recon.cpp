#include "ndem/recon.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>

#include "ndem/baseline.hpp"
#include "ndem/errors.hpp"

namespace ndem {

ReconResult BaselineReconstructor::reconstruct(const FeatureTensor& x) {
  GridD sparse(x.width, x.height, std::numeric_limits<double>::quiet_NaN());
  bool any = false;
  for (int y = 0; y < x.height; ++y) {
    for (int c = 0; c < x.width; ++c) {
      if (x.at(kCount, c, y) > 0.0f) {
        sparse(c, y) = static_cast<double>(x.at(kMeanZ, c, y)) + x.height_reference;
        any = true;
      }
    }
  }
  ReconResult r;
  if (!any) {
    // Nothing observed yet: report the reference plane.
    r.height = GridD(x.width, x.height, x.height_reference);
  } else {
    r.height = inpaint_iterative(sparse, dense_iteration_cap(sparse));
  }
  r.log_sigma = GridD(x.width, x.height, 0.0);
  return r;
}

namespace wire {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_magic(std::vector<std::uint8_t>& out, const char (&magic)[4]) {
  out.insert(out.end(), magic, magic + 4);
}

bool has_magic(std::span<const std::uint8_t> bytes, const char (&magic)[4]) {
  return bytes.size() >= 4 && std::memcmp(bytes.data(), magic, 4) == 0;
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<float>(read_u32(bytes, offset));
}

}  // namespace

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw FormatError("truncated frame");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[offset + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> encode_request(const FeatureTensor& x) {
  std::vector<std::uint8_t> out;
  out.reserve(kRequestHeaderBytes + x.data.size() * 4);
  put_magic(out, kRequestMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(x.height));
  put_u32(out, static_cast<std::uint32_t>(x.width));
  for (float v : x.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureTensor decode_request(std::span<const std::uint8_t> bytes) {
  if (!has_magic(bytes, kRequestMagic)) throw FormatError("not a request frame");
  if (read_u32(bytes, 4) != kVersion) throw FormatError("unsupported request version");
  const auto h = read_u32(bytes, 8);
  const auto w = read_u32(bytes, 12);
  if (h == 0 || w == 0 || h > 4096 || w > 4096) throw FormatError("request shape out of range");
  const std::size_t n = std::size_t(kFeatureChannels) * h * w;
  if (bytes.size() != kRequestHeaderBytes + 4 * n) throw FormatError("truncated request payload");
  FeatureTensor x(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < n; ++i) x.data[i] = get_f32(bytes, kRequestHeaderBytes + 4 * i);
  return x;
}

std::vector<std::uint8_t> encode_response(const Response& r) {
  if (r.values.size() != 2 * std::size_t(r.height) * r.width) {
    throw DataError("response payload does not match its shape");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kResponseHeaderBytes + r.values.size() * 4);
  put_magic(out, kResponseMagic);
  put_u32(out, r.height);
  put_u32(out, r.width);
  for (float v : r.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Response decode_response(std::span<const std::uint8_t> bytes) {
  if (!has_magic(bytes, kResponseMagic)) throw FormatError("not a response frame");
  Response r;
  r.height = read_u32(bytes, 4);
  r.width = read_u32(bytes, 8);
  const std::size_t n = 2 * std::size_t(r.height) * r.width;
  if (bytes.size() != kResponseHeaderBytes + 4 * n) throw FormatError("truncated response payload");
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.values[i] = get_f32(bytes, kResponseHeaderBytes + 4 * i);
  return r;
}

std::vector<std::uint8_t> encode_error(const ErrorFrame& e) {
  std::vector<std::uint8_t> out;
  put_magic(out, kErrorMagic);
  put_u32(out, static_cast<std::uint32_t>(e.code));
  put_u32(out, static_cast<std::uint32_t>(e.message.size()));
  out.insert(out.end(), e.message.begin(), e.message.end());
  return out;
}

ErrorFrame decode_error(std::span<const std::uint8_t> bytes) {
  if (!has_magic(bytes, kErrorMagic)) throw FormatError("not an error frame");
  ErrorFrame e;
  e.code = static_cast<ErrorCode>(read_u32(bytes, 4));
  const auto len = read_u32(bytes, 8);
  if (bytes.size() != kErrorHeaderBytes + len) throw FormatError("truncated error frame");
  e.message.assign(reinterpret_cast<const char*>(bytes.data()) + kErrorHeaderBytes, len);
  return e;
}

}  // namespace wire

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint e;
  e.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (*end != '\0' || p <= 0 || p > 65535) throw ConfigError("invalid endpoint port '" + port + "'");
  e.port = static_cast<std::uint16_t>(p);
  return e;
}

FeatureTensor pad_tensor(const FeatureTensor& x, int multiple) {
  const int h = (x.height + multiple - 1) / multiple * multiple;
  const int w = (x.width + multiple - 1) / multiple * multiple;
  if (h == x.height && w == x.width) return x;
  FeatureTensor out(h, w);
  out.height_reference = x.height_reference;
  out.count_scale = x.count_scale;
  for (int ch = 0; ch < kFeatureChannels; ++ch) {
    for (int y = 0; y < x.height; ++y) {
      for (int c = 0; c < x.width; ++c) out.at(ch, c, y) = x.at(ch, c, y);
    }
  }
  return out;
}

EndpointReconstructor::EndpointReconstructor(Endpoint endpoint, int timeout_ms)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

EndpointReconstructor::~EndpointReconstructor() { close(); }

void EndpointReconstructor::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void EndpointReconstructor::connect_if_needed() {
  if (fd_ >= 0) return;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(endpoint_.port);
  if (::getaddrinfo(endpoint_.host.c_str(), port.c_str(), &hints, &found) != 0 || !found) {
    throw EndpointError("cannot resolve endpoint " + endpoint_.str());
  }
  std::string last_error = "no address";
  for (addrinfo* ai = found; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      rc = ::poll(&p, 1, timeout_ms_) == 1 ? 0 : -1;
      if (rc == 0) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
          errno = err;
          rc = -1;
        }
      } else {
        errno = ETIMEDOUT;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      timeval tv{timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000};
      ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
      ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (fd_ < 0) throw EndpointError("cannot connect to " + endpoint_.str() + ": " + last_error);
}

void EndpointReconstructor::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      close();
      throw EndpointError("send to " + endpoint_.str() + " failed");
    }
    sent += static_cast<std::size_t>(n);
  }
}

void EndpointReconstructor::recv_exact(std::uint8_t* dst, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, dst + got, n - got, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) {
      close();
      throw EndpointError(r == 0 ? "endpoint " + endpoint_.str() + " closed the connection"
                                 : "receive from " + endpoint_.str() + " failed");
    }
    got += static_cast<std::size_t>(r);
  }
}

std::vector<std::uint8_t> EndpointReconstructor::exchange(std::span<const std::uint8_t> request) {
  connect_if_needed();
  send_all(request);
  std::vector<std::uint8_t> frame(12);
  recv_exact(frame.data(), 12);
  std::size_t payload = 0;
  if (std::memcmp(frame.data(), wire::kResponseMagic, 4) == 0) {
    payload = 4 * 2 * std::size_t(wire::read_u32(frame, 4)) * wire::read_u32(frame, 8);
  } else if (std::memcmp(frame.data(), wire::kErrorMagic, 4) == 0) {
    payload = wire::read_u32(frame, 8);
  } else {
    close();
    throw EndpointError("endpoint " + endpoint_.str() + " sent an unknown frame");
  }
  if (payload > (std::size_t(1) << 31)) {
    close();
    throw EndpointError("endpoint frame too large");
  }
  frame.resize(12 + payload);
  recv_exact(frame.data() + 12, payload);
  return frame;
}

ReconResult EndpointReconstructor::reconstruct(const FeatureTensor& x) {
  const FeatureTensor padded = pad_tensor(x, 4);
  const auto reply = exchange(wire::encode_request(padded));
  if (std::memcmp(reply.data(), wire::kErrorMagic, 4) == 0) {
    const auto err = wire::decode_error(reply);
    throw EndpointError("endpoint error " + std::to_string(static_cast<std::uint32_t>(err.code)) +
                        ": " + err.message);
  }
  const auto resp = wire::decode_response(reply);
  if (resp.height != static_cast<std::uint32_t>(padded.height) ||
      resp.width != static_cast<std::uint32_t>(padded.width)) {
    throw EndpointError("endpoint returned a mis-shaped response");
  }
  ReconResult r;
  r.height = GridD(x.width, x.height);
  r.log_sigma = GridD(x.width, x.height);
  const std::size_t plane = std::size_t(resp.height) * resp.width;
  for (int y = 0; y < x.height; ++y) {
    for (int c = 0; c < x.width; ++c) {
      const std::size_t i = std::size_t(y) * resp.width + c;
      const double h = resp.values[i];
      const double ls = resp.values[plane + i];
      if (!std::isfinite(h) || !std::isfinite(ls)) throw EndpointError("endpoint returned non-finite values");
      r.height(c, y) = h + x.height_reference;
      r.log_sigma(c, y) = ls;
    }
  }
  return r;
}

}  // namespace ndem
