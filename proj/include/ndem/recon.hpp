#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ndem/features.hpp"
#include "ndem/grid.hpp"

namespace ndem {

/// Dense reconstruction in meters plus log-scale uncertainty.
struct ReconResult {
  GridD height;
  GridD log_sigma;
  std::optional<GridD> edges;
};

/// Pluggable dense reconstruction: the classical baseline and the remote
/// learned model share this interface.
class Reconstructor {
 public:
  virtual ~Reconstructor() = default;
  virtual ReconResult reconstruct(const FeatureTensor& x) = 0;
  virtual std::string name() const = 0;
};

/// Observed E(Z) densified by Jacobi inpainting; log sigma is zero.
class BaselineReconstructor final : public Reconstructor {
 public:
  ReconResult reconstruct(const FeatureTensor& x) override;
  std::string name() const override { return "baseline"; }
};

namespace wire {

inline constexpr char kRequestMagic[4] = {'N', 'D', 'I', 'R'};
inline constexpr char kResponseMagic[4] = {'N', 'D', 'I', 'S'};
inline constexpr char kErrorMagic[4] = {'N', 'D', 'I', 'E'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kRequestHeaderBytes = 16;
inline constexpr std::size_t kResponseHeaderBytes = 12;
inline constexpr std::size_t kErrorHeaderBytes = 12;

enum class ErrorCode : std::uint32_t {
  malformed = 1,
  bad_shape = 2,
  bad_version = 3,
  internal = 4,
};

struct Response {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> values;  // heights then log sigma, 2 * H * W
};

struct ErrorFrame {
  ErrorCode code = ErrorCode::internal;
  std::string message;
};

std::vector<std::uint8_t> encode_request(const FeatureTensor& x);
/// Throws FormatError on a malformed or truncated frame.
FeatureTensor decode_request(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_response(const Response& r);
Response decode_response(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_error(const ErrorFrame& e);
ErrorFrame decode_error(std::span<const std::uint8_t> bytes);

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t offset);

}  // namespace wire

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port"; throws ConfigError.
  static Endpoint parse(const std::string& text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Client for the framed inference protocol over TCP. Inputs whose sides are
/// not multiples of 4 are zero-padded (padding reads as unobserved) and the
/// response is cropped back.
class EndpointReconstructor final : public Reconstructor {
 public:
  explicit EndpointReconstructor(Endpoint endpoint, int timeout_ms = 10000);
  ~EndpointReconstructor() override;
  EndpointReconstructor(const EndpointReconstructor&) = delete;
  EndpointReconstructor& operator=(const EndpointReconstructor&) = delete;

  ReconResult reconstruct(const FeatureTensor& x) override;
  std::string name() const override { return "endpoint " + endpoint_.str(); }

  /// Sends raw bytes and returns the next frame (response or error).
  /// Exposed for protocol tests.
  std::vector<std::uint8_t> exchange(std::span<const std::uint8_t> request);

 private:
  void connect_if_needed();
  void close();
  void send_all(std::span<const std::uint8_t> bytes);
  void recv_exact(std::uint8_t* dst, std::size_t n);

  Endpoint endpoint_;
  int timeout_ms_;
  int fd_ = -1;
};

/// Pads a tensor with zeros so both sides are multiples of `multiple`.
FeatureTensor pad_tensor(const FeatureTensor& x, int multiple);

}  // namespace ndem
