// Copyright 2026 The Skellam PSA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PSA_NET_H_
#define PSA_NET_H_

// Framed binary protocol between users and the aggregator. See PROTOCOL.md
// for byte layouts.
//
// | length (u32, big-endian) | type (u8) | payload (length bytes) |
//
// Payload integers are little-endian.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psa/dist.h"
#include "psa/scheme.h"

namespace psa::net {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FrameType : uint8_t {
  kHello = 0x01,
  kEpochOpen = 0x02,
  kCipher = 0x03,
  kAggregate = 0x04,
  kError = 0x05,
};

inline constexpr size_t kHeaderSize = 5;
inline constexpr uint32_t kMaxPayload = 1u << 20;

struct Frame {
  FrameType type = FrameType::kHello;
  std::vector<uint8_t> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

std::vector<uint8_t> EncodeFrame(const Frame& frame);

// Decodes one frame from the front of bytes. Returns nullopt when more
// bytes are needed; *consumed is set on success. Throws ProtocolError for
// an unknown type or an oversize length.
std::optional<Frame> DecodeFrame(std::span<const uint8_t> bytes, size_t* consumed);

enum class ErrorCode : uint32_t {
  kDuplicate = 1,
  kTimeout = 2,
  kBadEpoch = 3,
  kBadUser = 4,
  kMalformed = 5,
  kBadModulus = 6,
};

struct CipherMessage {
  uint32_t user_id = 0;
  uint32_t epoch = 0;
  uint64_t value = 0;  // residue in [0, q)

  friend bool operator==(const CipherMessage&, const CipherMessage&) = default;
};

struct AggregateMessage {
  uint32_t epoch = 0;
  int64_t value = 0;
};

struct ErrorMessage {
  ErrorCode code = ErrorCode::kMalformed;
  uint32_t epoch = 0;
  uint32_t user_id = 0;
};

Frame MakeHello(uint32_t user_id);
Frame MakeEpochOpen(uint32_t epoch);
Frame MakeCipher(const CipherMessage& m);
Frame MakeAggregate(const AggregateMessage& m);
Frame MakeError(const ErrorMessage& m);

uint32_t ParseHello(const Frame& f);
uint32_t ParseEpochOpen(const Frame& f);
CipherMessage ParseCipher(const Frame& f);
AggregateMessage ParseAggregate(const Frame& f);
ErrorMessage ParseError(const Frame& f);

// Blocking TCP stream with frame-level send/receive. Owns the descriptor.
class Connection {
 public:
  explicit Connection(int fd) : fd_(fd) {}
  Connection(Connection&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Connection& operator=(Connection&&) = delete;
  Connection(const Connection&) = delete;
  ~Connection();

  static Connection Connect(const std::string& host, uint16_t port);

  void Send(const Frame& frame);
  void SendRaw(std::span<const uint8_t> bytes);
  // nullopt on orderly close by the peer. Throws ProtocolError on a
  // malformed frame and std::runtime_error on transport failure.
  std::optional<Frame> Receive();
  // Unblocks a concurrent Receive.
  void Shutdown();

 private:
  int fd_;
  std::vector<uint8_t> buffer_;
};

// "HOST:PORT" -> (host, port).
std::pair<std::string, uint16_t> ParseAddress(const std::string& address);

struct ServerOptions {
  explicit ServerOptions(KeyFile key) : aggregator_key(std::move(key)) {}

  std::string host = "127.0.0.1";
  uint16_t port = 0;  // 0 picks an ephemeral port
  KeyFile aggregator_key;
  uint32_t epochs = 1;
  std::chrono::milliseconds epoch_timeout{30000};
  std::string log_path;  // optional append-only CSV "epoch,aggregate"
};

struct ServeResult {
  std::vector<int64_t> aggregates;
  bool timed_out = false;
  int64_t rejected_duplicates = 0;
};

// Aggregator service. Waits for n users to say HELLO, then runs the epochs
// in order: EPOCH_OPEN, collect exactly one CIPHER per user, decrypt,
// broadcast AGGREGATE. Holds only ciphertexts, s_0 and the tags.
class AggregatorServer {
 public:
  explicit AggregatorServer(ServerOptions options);
  ~AggregatorServer();

  // Binds and listens; port() is valid afterwards.
  void Bind();
  uint16_t port() const { return port_; }
  // Blocks until every epoch closes or an epoch times out.
  ServeResult Run();

 private:
  struct State;

  ServerOptions options_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
};

struct ClientOptions {
  explicit ClientOptions(KeyFile key) : share(std::move(key)) {}

  std::string host = "127.0.0.1";
  uint16_t port = 0;
  KeyFile share;
  std::vector<int64_t> data;  // one value per epoch
  NoiseSpec noise;
  uint64_t seed = 1;
};

struct ClientResult {
  std::vector<int64_t> aggregates;  // acknowledged per epoch
  int64_t ciphers_sent = 0;
};

// Sends exactly one CIPHER per announced epoch. Throws on ERROR frames or
// transport failure; nothing is retried.
ClientResult RunClient(const ClientOptions& options);

}  // namespace psa::net

#endif  // PSA_NET_H_
