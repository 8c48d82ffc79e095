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

#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include <gtest/gtest.h>

namespace psa::net {
namespace {

using std::chrono::milliseconds;

TEST(FrameTest, HelloBytes) {
  EXPECT_EQ(EncodeFrame(Frame{FrameType::kHello, {}}),
            (std::vector<uint8_t>{0x00, 0x00, 0x00, 0x00, 0x01}));
  EXPECT_EQ(EncodeFrame(MakeHello(7)),
            (std::vector<uint8_t>{0x00, 0x00, 0x00, 0x04, 0x01, 0x07, 0x00, 0x00, 0x00}));
}

TEST(FrameTest, CipherBytes) {
  const auto bytes = EncodeFrame(MakeCipher(CipherMessage{2, 0x01020304, 0x1122334455667788ull}));
  const std::vector<uint8_t> want = {0x00, 0x00, 0x00, 0x10, 0x03, 0x02, 0x00, 0x00, 0x00,
                                     0x04, 0x03, 0x02, 0x01, 0x88, 0x77, 0x66, 0x55, 0x44,
                                     0x33, 0x22, 0x11};
  EXPECT_EQ(bytes, want);
  const auto agg = EncodeFrame(MakeAggregate(AggregateMessage{1, -2}));
  EXPECT_EQ(agg.size(), 5u + 12u);
  EXPECT_EQ(agg[9], 0xfe);
  EXPECT_EQ(agg[16], 0xff);
}

TEST(FrameTest, StreamingDecode) {
  size_t consumed = 99;
  const std::vector<uint8_t> partial = {0x00, 0x00, 0x00, 0x00};
  EXPECT_EQ(DecodeFrame(partial, &consumed), std::nullopt);
  const auto hello = EncodeFrame(MakeHello(3));
  EXPECT_EQ(DecodeFrame(std::span(hello).first(7), &consumed), std::nullopt);

  auto two = hello;
  const auto open = EncodeFrame(MakeEpochOpen(5));
  two.insert(two.end(), open.begin(), open.end());
  auto f = DecodeFrame(two, &consumed);
  ASSERT_TRUE(f);
  EXPECT_EQ(consumed, hello.size());
  EXPECT_EQ(ParseHello(*f), 3u);
  f = DecodeFrame(std::span(two).subspan(consumed), &consumed);
  ASSERT_TRUE(f);
  EXPECT_EQ(ParseEpochOpen(*f), 5u);
}

TEST(FrameTest, Rejects) {
  size_t consumed = 0;
  const std::vector<uint8_t> unknown = {0, 0, 0, 0, 0x09};
  EXPECT_THROW(DecodeFrame(unknown, &consumed), ProtocolError);
  const std::vector<uint8_t> huge = {0x00, 0x10, 0x00, 0x01, 0x03};
  EXPECT_THROW(DecodeFrame(huge, &consumed), ProtocolError);
  Frame big{FrameType::kCipher, std::vector<uint8_t>(kMaxPayload + 1)};
  EXPECT_THROW(EncodeFrame(big), ProtocolError);
  EXPECT_THROW(ParseCipher(MakeHello(1)), ProtocolError);
  EXPECT_THROW(ParseCipher(Frame{FrameType::kCipher, {1, 2, 3}}), ProtocolError);
}

TEST(FrameTest, CodecRoundTrip) {
  RngStream rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const CipherMessage m{static_cast<uint32_t>(rng.NextU64()), static_cast<uint32_t>(rng.NextU64()),
                          rng.NextU64()};
    const auto bytes = EncodeFrame(MakeCipher(m));
    size_t consumed = 0;
    const auto f = DecodeFrame(bytes, &consumed);
    ASSERT_TRUE(f);
    ASSERT_EQ(consumed, bytes.size());
    ASSERT_EQ(ParseCipher(*f), m);
    const AggregateMessage a{static_cast<uint32_t>(i), static_cast<int64_t>(rng.NextU64())};
    const auto back = ParseAggregate(MakeAggregate(a));
    ASSERT_EQ(back.epoch, a.epoch);
    ASSERT_EQ(back.value, a.value);
  }
  const ErrorMessage e = ParseError(MakeError(ErrorMessage{ErrorCode::kDuplicate, 4, 2}));
  EXPECT_EQ(e.code, ErrorCode::kDuplicate);
  EXPECT_EQ(e.epoch, 4u);
  EXPECT_EQ(e.user_id, 2u);
}

TEST(AddressTest, Parse) {
  EXPECT_EQ(ParseAddress("127.0.0.1:9000"), (std::pair<std::string, uint16_t>{"127.0.0.1", 9000}));
  EXPECT_THROW(ParseAddress("localhost"), std::invalid_argument);
  EXPECT_THROW(ParseAddress("h:70000"), std::invalid_argument);
}

// Keys for the hand example: kappa = 1, q = 101, s1 = 5, s2 = 7, s0 = -12.
std::vector<KeyFile> HandKeys(int64_t lambda) {
  TimeTagSet tags;
  for (int64_t j = 0; j < lambda; ++j) tags.tags.push_back(RingVector({3 + j}, Modulus(101)));
  std::vector<KeyFile> files;
  const int64_t keys[] = {-12, 5, 7};
  for (uint64_t h = 0; h < 3; ++h) {
    files.push_back(KeyFile{1, lambda, 101, 2, h, 5, RingVector({keys[h]}, Modulus(101)), tags});
  }
  return files;
}

struct Server {
  explicit Server(ServerOptions o) : server(std::move(o)) {
    server.Bind();
    result = std::async(std::launch::async, [this] { return server.Run(); });
  }
  AggregatorServer server;
  std::future<ServeResult> result;
};

TEST(ServiceTest, TwoClientsHandExample) {
  const auto keys = HandKeys(2);
  const auto log = std::filesystem::temp_directory_path() / "psa_net_test_log.csv";
  std::filesystem::remove(log);
  ServerOptions so(keys[0]);
  so.epochs = 2;
  so.epoch_timeout = milliseconds(10000);
  so.log_path = log.string();
  Server s(so);

  auto client = [&](int i, std::vector<int64_t> data) {
    ClientOptions co(keys[i]);
    co.port = s.server.port();
    co.data = std::move(data);
    return RunClient(co);
  };
  auto a = std::async(std::launch::async, client, 1, std::vector<int64_t>{1, -5});
  auto b = std::async(std::launch::async, client, 2, std::vector<int64_t>{2, 4});
  const ClientResult ra = a.get(), rb = b.get();
  const ServeResult rs = s.result.get();
  EXPECT_EQ(rs.aggregates, (std::vector<int64_t>{3, -1}));
  EXPECT_EQ(ra.aggregates, rs.aggregates);
  EXPECT_EQ(rb.aggregates, rs.aggregates);
  EXPECT_EQ(ra.ciphers_sent, 2);
  EXPECT_FALSE(rs.timed_out);
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, "0,3\n1,-1\n");
  std::filesystem::remove(log);
}

std::optional<Frame> ReceiveType(Connection& c, FrameType type) {
  for (;;) {
    auto f = c.Receive();
    if (!f || f->type == type) return f;
  }
}

TEST(ServiceTest, DuplicateRejectedFirstValueKept) {
  const auto keys = HandKeys(1);
  ServerOptions so(keys[0]);
  so.epoch_timeout = milliseconds(10000);
  Server s(so);

  Connection u1 = Connection::Connect("127.0.0.1", s.server.port());
  Connection u2 = Connection::Connect("127.0.0.1", s.server.port());
  u1.Send(MakeHello(1));
  u2.Send(MakeHello(2));
  ASSERT_TRUE(ReceiveType(u1, FrameType::kEpochOpen));
  ASSERT_TRUE(ReceiveType(u2, FrameType::kEpochOpen));

  const auto enc = [&](int h, int64_t x) {
    return PsaEncrypt(h, 0, keys[h].key, keys[h].tags.at(0), x, 0, 5).value.residue();
  };
  u1.Send(MakeCipher(CipherMessage{1, 0, enc(1, 1)}));
  u1.Send(MakeCipher(CipherMessage{1, 0, enc(1, 4)}));
  auto err = ReceiveType(u1, FrameType::kError);
  ASSERT_TRUE(err);
  EXPECT_EQ(ParseError(*err).code, ErrorCode::kDuplicate);
  // Impersonation and out-of-range residues are refused too.
  u2.Send(MakeCipher(CipherMessage{1, 0, 0}));
  err = ReceiveType(u2, FrameType::kError);
  EXPECT_EQ(ParseError(*err).code, ErrorCode::kBadUser);
  u2.Send(MakeCipher(CipherMessage{2, 0, 101}));
  err = ReceiveType(u2, FrameType::kError);
  EXPECT_EQ(ParseError(*err).code, ErrorCode::kBadModulus);

  u2.Send(MakeCipher(CipherMessage{2, 0, enc(2, 2)}));
  auto agg = ReceiveType(u2, FrameType::kAggregate);
  ASSERT_TRUE(agg);
  EXPECT_EQ(ParseAggregate(*agg).value, 3);
  const ServeResult rs = s.result.get();
  EXPECT_EQ(rs.aggregates, std::vector<int64_t>{3});
  EXPECT_EQ(rs.rejected_duplicates, 1);
}

TEST(ServiceTest, MissingCipherTimesOut) {
  const auto keys = HandKeys(1);
  ServerOptions so(keys[0]);
  so.epoch_timeout = milliseconds(300);
  Server s(so);
  Connection u1 = Connection::Connect("127.0.0.1", s.server.port());
  Connection u2 = Connection::Connect("127.0.0.1", s.server.port());
  u1.Send(MakeHello(1));
  u2.Send(MakeHello(2));
  ASSERT_TRUE(ReceiveType(u1, FrameType::kEpochOpen));
  u1.Send(MakeCipher(CipherMessage{1, 0, 0}));
  auto err = ReceiveType(u2, FrameType::kError);
  ASSERT_TRUE(err);
  EXPECT_EQ(ParseError(*err).code, ErrorCode::kTimeout);
  const ServeResult rs = s.result.get();
  EXPECT_TRUE(rs.timed_out);
  EXPECT_TRUE(rs.aggregates.empty());
}

TEST(ServiceTest, ClientRejectsAggregatorKey) {
  const auto keys = HandKeys(1);
  ClientOptions co(keys[0]);
  co.data = {1};
  EXPECT_THROW(RunClient(co), std::invalid_argument);
  EXPECT_THROW(AggregatorServer{ServerOptions(keys[1])}, std::invalid_argument);
}

}  // namespace
}  // namespace psa::net
