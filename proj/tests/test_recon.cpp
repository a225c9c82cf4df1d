#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "ndem/errors.hpp"
#include "ndem/recon.hpp"
#include "ndem/rng.hpp"
#include "support/stub_server.hpp"

using namespace ndem;

namespace {

FeatureTensor random_tensor(int h, int w, Rng& rng) {
  FeatureTensor x(h, w);
  for (float& v : x.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  return x;
}

Endpoint local(std::uint16_t port) {
  Endpoint e;
  e.port = port;
  return e;
}

/// A port nothing listens on: bind, read the port, close.
std::uint16_t dead_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST_CASE("request and response frames round trip bit-exactly") {
  Rng rng(1);
  auto x = random_tensor(8, 12, rng);
  x.data[0] = -0.0f;
  x.data[1] = std::numeric_limits<float>::denorm_min();
  x.data[2] = std::numeric_limits<float>::infinity();
  x.data[3] = std::bit_cast<float>(0x7fc01234u);  // NaN with payload
  const auto bytes = wire::encode_request(x);
  CHECK(bytes.size() == 16 + 4 * 7 * 8 * 12);
  CHECK(std::memcmp(bytes.data(), "NDIR", 4) == 0);
  CHECK(wire::read_u32(bytes, 8) == 8u);
  CHECK(wire::read_u32(bytes, 12) == 12u);
  const auto back = wire::decode_request(bytes);
  REQUIRE(back.data.size() == x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    CHECK(std::bit_cast<std::uint32_t>(back.data[i]) == std::bit_cast<std::uint32_t>(x.data[i]));
  }

  wire::Response r{2, 3, {1, 2, 3, 4, 5, 6, -1, -2, -3, -4, -5, -6}};
  const auto rb = wire::encode_response(r);
  CHECK(rb.size() == 12 + 4 * 12);
  CHECK(wire::decode_response(rb).values == r.values);

  const auto eb = wire::encode_error({wire::ErrorCode::bad_shape, "nope"});
  CHECK(eb.size() == 16);
  const auto e = wire::decode_error(eb);
  CHECK(e.code == wire::ErrorCode::bad_shape);
  CHECK(e.message == "nope");
}

TEST_CASE("malformed frames are rejected by the decoders") {
  Rng rng(2);
  auto bytes = wire::encode_request(random_tensor(4, 4, rng));
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(wire::decode_request(truncated), FormatError);
  auto magic = bytes;
  magic[3] = 'X';
  CHECK_THROWS_AS(wire::decode_request(magic), FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(wire::decode_request(version), FormatError);
  CHECK_THROWS_AS(wire::decode_response(std::vector<std::uint8_t>{'N', 'D', 'I', 'S', 1}), FormatError);
  CHECK_THROWS_AS(wire::encode_response({2, 2, {1.0f}}), DataError);
}

TEST_CASE("Endpoint::parse") {
  const auto e = Endpoint::parse("localhost:9000");
  CHECK(e.host == "localhost");
  CHECK(e.port == 9000);
  CHECK(Endpoint::parse("::1:80").host == "::1");
  CHECK_THROWS_AS(Endpoint::parse("localhost"), ConfigError);
  CHECK_THROWS_AS(Endpoint::parse(":80"), ConfigError);
  CHECK_THROWS_AS(Endpoint::parse("host:0"), ConfigError);
  CHECK_THROWS_AS(Endpoint::parse("host:70000"), ConfigError);
  CHECK_THROWS_AS(Endpoint::parse("host:12ab"), ConfigError);
}

TEST_CASE("pad_tensor") {
  Rng rng(3);
  const auto x = random_tensor(125, 125, rng);
  const auto p = pad_tensor(x, 4);
  CHECK(p.height == 128);
  CHECK(p.width == 128);
  CHECK(p.at(kMeanZ, 124, 124) == x.at(kMeanZ, 124, 124));
  CHECK(p.at(kCount, 125, 3) == 0.0f);
  CHECK(p.at(kVarMin, 3, 127) == 0.0f);
  const auto same = random_tensor(8, 12, rng);
  CHECK(pad_tensor(same, 4).data == same.data);
}

TEST_CASE("endpoint client against the stub server") {
  Rng rng(4);
  SUBCASE("zero model returns the reference plane, cropped") {
    StubServer server(StubServer::Mode::zeros);
    EndpointReconstructor client(local(server.port()));
    auto x = random_tensor(125, 125, rng);
    x.height_reference = 0.35;
    const auto r = client.reconstruct(x);
    REQUIRE(r.height.width() == 125);
    REQUIRE(r.height.height() == 125);
    for (double v : r.height.values()) CHECK(v == 0.35);
    for (double v : r.log_sigma.values()) CHECK(v == 0.0);
  }
  SUBCASE("echo model places every cell where it came from") {
    StubServer server(StubServer::Mode::echo);
    EndpointReconstructor client(local(server.port()));
    auto x = random_tensor(10, 7, rng);
    x.height_reference = -1.0;
    const auto r = client.reconstruct(x);
    for (int y = 0; y < 10; ++y) {
      for (int c = 0; c < 7; ++c) {
        CHECK(r.height(c, y) == static_cast<double>(x.at(kMeanZ, c, y)) - 1.0);
        CHECK(r.log_sigma(c, y) == static_cast<double>(x.at(kCount, c, y)));
      }
    }
    // Same input, same answer, same connection.
    CHECK(client.reconstruct(x).height == r.height);
    CHECK(server.requests() == 2);
  }
  SUBCASE("truncated frame gets an error frame and the connection survives") {
    StubServer server(StubServer::Mode::zeros, 100);
    EndpointReconstructor client(local(server.port()));
    auto bytes = wire::encode_request(random_tensor(8, 8, rng));
    bytes.resize(bytes.size() - 10);
    const auto reply = client.exchange(bytes);
    REQUIRE(std::memcmp(reply.data(), "NDIE", 4) == 0);
    CHECK(wire::decode_error(reply).code == wire::ErrorCode::malformed);
    const auto r = client.reconstruct(random_tensor(8, 8, rng));
    CHECK(r.height.width() == 8);
    CHECK(server.requests() == 1);
    CHECK(server.errors() == 1);
  }
  SUBCASE("shape not divisible by 4 sent raw is refused") {
    StubServer server;
    EndpointReconstructor client(local(server.port()));
    const auto reply = client.exchange(wire::encode_request(random_tensor(5, 8, rng)));
    CHECK(wire::decode_error(reply).code == wire::ErrorCode::bad_shape);
  }
  SUBCASE("error frames surface as EndpointError") {
    StubServer server(StubServer::Mode::fail);
    EndpointReconstructor client(local(server.port()));
    CHECK_THROWS_AS(client.reconstruct(random_tensor(8, 8, rng)), EndpointError);
  }
  SUBCASE("server dropping the connection") {
    StubServer server;
    server.close_after(1);
    EndpointReconstructor client(local(server.port()));
    CHECK_NOTHROW(client.reconstruct(random_tensor(4, 4, rng)));
    CHECK_THROWS_AS(client.reconstruct(random_tensor(4, 4, rng)), EndpointError);
  }
  SUBCASE("multiple clients") {
    StubServer server(StubServer::Mode::echo);
    EndpointReconstructor a(local(server.port()));
    EndpointReconstructor b(local(server.port()));
    const auto x = random_tensor(12, 12, rng);
    CHECK(a.reconstruct(x).height == b.reconstruct(x).height);
  }
}

TEST_CASE("unreachable endpoint") {
  EndpointReconstructor client(local(dead_port()), 500);
  CHECK_THROWS_AS(client.reconstruct(FeatureTensor(4, 4)), EndpointError);
}

TEST_CASE("BaselineReconstructor") {
  SUBCASE("nothing observed gives the reference plane") {
    FeatureTensor x(6, 6);
    x.height_reference = 0.2;
    const auto r = BaselineReconstructor().reconstruct(x);
    for (double v : r.height.values()) CHECK(v == 0.2);
  }
  SUBCASE("observed cells keep their mean, holes are filled within bounds") {
    Rng rng(8);
    FeatureTensor x(20, 20);
    x.height_reference = 1.0;
    for (int y = 0; y < 20; ++y) {
      for (int c = 0; c < 20; ++c) {
        if (rng.unit() < 0.3) {
          x.at(kCount, c, y) = 0.5f;
          x.at(kMeanZ, c, y) = static_cast<float>(rng.uniform(-0.2, 0.2));
        }
      }
    }
    const auto r = BaselineReconstructor().reconstruct(x);
    for (int y = 0; y < 20; ++y) {
      for (int c = 0; c < 20; ++c) {
        if (x.at(kCount, c, y) > 0) CHECK(r.height(c, y) == double(x.at(kMeanZ, c, y)) + 1.0);
        CHECK(r.height(c, y) >= 0.8 - 1e-6);
        CHECK(r.height(c, y) <= 1.2 + 1e-6);
        CHECK(r.log_sigma(c, y) == 0.0);
      }
    }
  }
}
