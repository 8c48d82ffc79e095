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

#include "psa/net.h"

#include <algorithm>
#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace psa::net {
namespace {

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void PutU64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t GetU32(std::span<const uint8_t> b, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[at + i]) << (8 * i);
  return v;
}

uint64_t GetU64(std::span<const uint8_t> b, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[at + i]) << (8 * i);
  return v;
}

void Expect(const Frame& f, FrameType type, size_t size) {
  if (f.type != type) throw ProtocolError("unexpected frame type");
  if (f.payload.size() != size) {
    throw ProtocolError("payload of " + std::to_string(f.payload.size()) +
                        " bytes, expected " + std::to_string(size));
  }
}

bool KnownType(uint8_t t) { return t >= 0x01 && t <= 0x05; }

std::string ErrnoText(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

}  // namespace

std::vector<uint8_t> EncodeFrame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw ProtocolError("frame payload too large");
  const auto len = static_cast<uint32_t>(frame.payload.size());
  std::vector<uint8_t> out(kHeaderSize + frame.payload.size());
  out[0] = static_cast<uint8_t>(len >> 24);
  out[1] = static_cast<uint8_t>(len >> 16);
  out[2] = static_cast<uint8_t>(len >> 8);
  out[3] = static_cast<uint8_t>(len);
  out[4] = static_cast<uint8_t>(frame.type);
  std::copy(frame.payload.begin(), frame.payload.end(), out.begin() + kHeaderSize);
  return out;
}

std::optional<Frame> DecodeFrame(std::span<const uint8_t> bytes, size_t* consumed) {
  if (bytes.size() < kHeaderSize) return std::nullopt;
  const uint32_t len = (static_cast<uint32_t>(bytes[0]) << 24) |
                       (static_cast<uint32_t>(bytes[1]) << 16) |
                       (static_cast<uint32_t>(bytes[2]) << 8) | static_cast<uint32_t>(bytes[3]);
  if (len > kMaxPayload) throw ProtocolError("frame length " + std::to_string(len) + " too large");
  if (!KnownType(bytes[4])) {
    throw ProtocolError("unknown frame type " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kHeaderSize + len) return std::nullopt;
  Frame f;
  f.type = static_cast<FrameType>(bytes[4]);
  f.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + len);
  *consumed = kHeaderSize + len;
  return f;
}

Frame MakeHello(uint32_t user_id) {
  Frame f{FrameType::kHello, {}};
  PutU32(f.payload, user_id);
  return f;
}

Frame MakeEpochOpen(uint32_t epoch) {
  Frame f{FrameType::kEpochOpen, {}};
  PutU32(f.payload, epoch);
  return f;
}

Frame MakeCipher(const CipherMessage& m) {
  Frame f{FrameType::kCipher, {}};
  PutU32(f.payload, m.user_id);
  PutU32(f.payload, m.epoch);
  PutU64(f.payload, m.value);
  return f;
}

Frame MakeAggregate(const AggregateMessage& m) {
  Frame f{FrameType::kAggregate, {}};
  PutU32(f.payload, m.epoch);
  PutU64(f.payload, static_cast<uint64_t>(m.value));
  return f;
}

Frame MakeError(const ErrorMessage& m) {
  Frame f{FrameType::kError, {}};
  PutU32(f.payload, static_cast<uint32_t>(m.code));
  PutU32(f.payload, m.epoch);
  PutU32(f.payload, m.user_id);
  return f;
}

uint32_t ParseHello(const Frame& f) {
  Expect(f, FrameType::kHello, 4);
  return GetU32(f.payload, 0);
}

uint32_t ParseEpochOpen(const Frame& f) {
  Expect(f, FrameType::kEpochOpen, 4);
  return GetU32(f.payload, 0);
}

CipherMessage ParseCipher(const Frame& f) {
  Expect(f, FrameType::kCipher, 16);
  return CipherMessage{GetU32(f.payload, 0), GetU32(f.payload, 4), GetU64(f.payload, 8)};
}

AggregateMessage ParseAggregate(const Frame& f) {
  Expect(f, FrameType::kAggregate, 12);
  return AggregateMessage{GetU32(f.payload, 0), static_cast<int64_t>(GetU64(f.payload, 4))};
}

ErrorMessage ParseError(const Frame& f) {
  Expect(f, FrameType::kError, 12);
  return ErrorMessage{static_cast<ErrorCode>(GetU32(f.payload, 0)), GetU32(f.payload, 4),
                      GetU32(f.payload, 8)};
}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

Connection Connection::Connect(const std::string& host, uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) return Connection(fd);
    ::close(fd);
  }
  throw std::runtime_error("cannot connect to " + host + ":" + service);
}

void Connection::SendRaw(std::span<const uint8_t> bytes) {
  size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(ErrnoText("send"));
    }
    sent += static_cast<size_t>(n);
  }
}

void Connection::Send(const Frame& frame) { SendRaw(EncodeFrame(frame)); }

std::optional<Frame> Connection::Receive() {
  while (true) {
    size_t consumed = 0;
    if (auto f = DecodeFrame(buffer_, &consumed)) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<ptrdiff_t>(consumed));
      return f;
    }
    uint8_t chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n == 0) {
      if (!buffer_.empty()) throw ProtocolError("connection closed mid-frame");
      return std::nullopt;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(ErrnoText("recv"));
    }
    buffer_.insert(buffer_.end(), chunk, chunk + n);
  }
}

void Connection::Shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::pair<std::string, uint16_t> ParseAddress(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw std::invalid_argument("address must be HOST:PORT, got '" + address + "'");
  }
  const long port = std::stol(address.substr(colon + 1));
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range");
  return {address.substr(0, colon), static_cast<uint16_t>(port)};
}

struct AggregatorServer::State {
  State(const ServerOptions& o)
      : options(o),
        n(o.aggregator_key.n),
        modulus(o.aggregator_key.q),
        aggregator(o.aggregator_key.key, o.aggregator_key.tags, o.aggregator_key.n) {}

  void Broadcast(const Frame& f) {
    for (auto& [user, conn] : users) {
      try {
        conn->Send(f);
      } catch (const std::exception&) {
        // A vanished client cannot block the others.
      }
    }
  }

  void OpenEpoch() {
    deadline = std::chrono::steady_clock::now() + options.epoch_timeout;
    Broadcast(MakeEpochOpen(current_epoch));
  }

  // Called with mu held.
  void HandleCipher(Connection& from, uint32_t from_user, const CipherMessage& m) {
    auto reject = [&](ErrorCode code) {
      from.Send(MakeError(ErrorMessage{code, m.epoch, m.user_id}));
    };
    if (m.user_id != from_user) return reject(ErrorCode::kBadUser);
    if (finished || m.epoch != current_epoch) return reject(ErrorCode::kBadEpoch);
    if (m.value >= modulus.value()) return reject(ErrorCode::kBadModulus);
    const Ciphertext c{m.epoch, m.user_id, RingElement::FromResidue(m.value, modulus)};
    switch (aggregator.Submit(c)) {
      case SubmitStatus::kAccepted:
        break;
      case SubmitStatus::kDuplicate:
        ++rejected_duplicates;
        return reject(ErrorCode::kDuplicate);
      case SubmitStatus::kBadEpoch:
        return reject(ErrorCode::kBadEpoch);
      case SubmitStatus::kBadUser:
        return reject(ErrorCode::kBadUser);
      case SubmitStatus::kBadModulus:
        return reject(ErrorCode::kBadModulus);
    }
    if (!aggregator.IsComplete(current_epoch)) return;
    const int64_t sum = aggregator.Aggregate(current_epoch);
    aggregates.push_back(sum);
    if (log) *log << current_epoch << "," << sum << "\n" << std::flush;
    Broadcast(MakeAggregate(AggregateMessage{current_epoch, sum}));
    if (++current_epoch == options.epochs) {
      finished = true;
      cv.notify_all();
    } else {
      OpenEpoch();
    }
  }

  const ServerOptions& options;
  const int64_t n;
  const Modulus modulus;

  std::mutex mu;
  std::condition_variable cv;
  EpochAggregator aggregator;
  std::map<uint32_t, std::shared_ptr<Connection>> users;
  std::vector<std::shared_ptr<Connection>> all;
  std::vector<std::thread> readers;
  std::unique_ptr<std::ofstream> log;
  std::vector<int64_t> aggregates;
  uint32_t current_epoch = 0;
  bool started = false;
  bool finished = false;
  int64_t rejected_duplicates = 0;
  std::chrono::steady_clock::time_point deadline;
  std::atomic<bool> stop{false};
};

AggregatorServer::AggregatorServer(ServerOptions options) : options_(std::move(options)) {
  if (options_.aggregator_key.holder != 0) {
    throw std::invalid_argument("the aggregator needs the holder-0 key file");
  }
  if (options_.epochs < 1 ||
      static_cast<int64_t>(options_.epochs) > options_.aggregator_key.lambda) {
    throw std::invalid_argument("epochs must lie in [1, lambda]");
  }
}

AggregatorServer::~AggregatorServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void AggregatorServer::Bind() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(ErrnoText("socket"));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("bind host must be an IPv4 address: " + options_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw std::runtime_error(ErrnoText("bind"));
  }
  if (::listen(listen_fd_, 64) != 0) throw std::runtime_error(ErrnoText("listen"));
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

ServeResult AggregatorServer::Run() {
  if (listen_fd_ < 0) Bind();
  State st(options_);
  if (!options_.log_path.empty()) {
    st.log = std::make_unique<std::ofstream>(options_.log_path, std::ios::app);
    if (!*st.log) throw std::runtime_error("cannot open log " + options_.log_path);
  }
  st.deadline = std::chrono::steady_clock::now() + options_.epoch_timeout;

  auto serve_connection = [&st](std::shared_ptr<Connection> conn) {
    uint32_t user = 0;
    try {
      auto hello = conn->Receive();
      if (!hello) return;
      user = ParseHello(*hello);
      {
        std::lock_guard lock(st.mu);
        if (user < 1 || user > st.n || st.users.contains(user) || st.started) {
          conn->Send(MakeError(ErrorMessage{ErrorCode::kBadUser, 0, user}));
          return;
        }
        st.users.emplace(user, conn);
        if (static_cast<int64_t>(st.users.size()) == st.n) {
          st.started = true;
          st.OpenEpoch();
        }
      }
      while (!st.stop) {
        auto f = conn->Receive();
        if (!f) return;
        std::lock_guard lock(st.mu);
        if (f->type != FrameType::kCipher) {
          conn->Send(MakeError(ErrorMessage{ErrorCode::kMalformed, st.current_epoch, user}));
          continue;
        }
        st.HandleCipher(*conn, user, ParseCipher(*f));
      }
    } catch (const std::exception&) {
      // Malformed input or a dead peer: drop the connection.
      conn->Shutdown();
    }
  };

  std::thread acceptor([&] {
    while (!st.stop) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      auto conn = std::make_shared<Connection>(fd);
      std::lock_guard lock(st.mu);
      st.all.push_back(conn);
      st.readers.emplace_back(serve_connection, conn);
    }
  });

  ServeResult result;
  {
    std::unique_lock lock(st.mu);
    while (!st.finished) {
      if (st.cv.wait_until(lock, st.deadline) == std::cv_status::timeout &&
          !st.finished && std::chrono::steady_clock::now() >= st.deadline) {
        result.timed_out = true;
        const Frame err = MakeError(ErrorMessage{ErrorCode::kTimeout, st.current_epoch, 0});
        for (auto& c : st.all) {
          try {
            c->Send(err);
          } catch (const std::exception&) {
          }
        }
        break;
      }
    }
    st.stop = true;
    for (auto& c : st.all) c->Shutdown();
  }
  acceptor.join();
  for (auto& t : st.readers) t.join();
  result.aggregates = st.aggregates;
  result.rejected_duplicates = st.rejected_duplicates;
  return result;
}

ClientResult RunClient(const ClientOptions& options) {
  const KeyFile& key = options.share;
  if (key.holder == 0) throw std::invalid_argument("client needs a user share, not s_0");
  if (static_cast<int64_t>(options.data.size()) > key.lambda) {
    throw std::invalid_argument("more data values than time tags");
  }
  const auto user = static_cast<uint32_t>(key.holder);
  UserEncryptor encryptor(user, key.key, key.tags, key.m, options.noise, options.seed);
  Connection conn = Connection::Connect(options.host, options.port);
  conn.Send(MakeHello(user));

  ClientResult result;
  std::vector<bool> sent(options.data.size(), false);
  std::vector<std::optional<int64_t>> acks(options.data.size());
  size_t acked = 0;
  while (acked < options.data.size()) {
    auto f = conn.Receive();
    if (!f) throw std::runtime_error("aggregator closed the connection");
    switch (f->type) {
      case FrameType::kEpochOpen: {
        const uint32_t epoch = ParseEpochOpen(*f);
        if (epoch >= options.data.size()) throw ProtocolError("epoch beyond the data stream");
        if (sent[epoch]) break;
        const Ciphertext c = encryptor.Encrypt(epoch, options.data[epoch]);
        conn.Send(MakeCipher(CipherMessage{user, epoch, c.value.residue()}));
        sent[epoch] = true;
        ++result.ciphers_sent;
        break;
      }
      case FrameType::kAggregate: {
        const AggregateMessage a = ParseAggregate(*f);
        if (a.epoch < acks.size() && !acks[a.epoch]) {
          acks[a.epoch] = a.value;
          ++acked;
        }
        break;
      }
      case FrameType::kError: {
        const ErrorMessage e = ParseError(*f);
        throw ProtocolError("aggregator error code " +
                            std::to_string(static_cast<uint32_t>(e.code)) + " in epoch " +
                            std::to_string(e.epoch));
      }
      default:
        throw ProtocolError("unexpected frame from aggregator");
    }
  }
  for (const auto& a : acks) result.aggregates.push_back(*a);
  return result;
}

}  // namespace psa::net
