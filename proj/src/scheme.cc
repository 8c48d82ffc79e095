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

#include "psa/scheme.h"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

namespace psa {
namespace {

void Require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

void PutU64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint64_t U64() {
    if (pos_ + 8 > bytes_.size()) throw std::runtime_error("key file truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  void Magic() {
    static constexpr uint8_t kMagic[4] = {'P', 'S', 'A', '1'};
    if (bytes_.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes_.begin())) {
      throw std::runtime_error("not a PSA key file (bad magic)");
    }
    pos_ = 4;
  }

  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

RingVector ReadVector(Reader& r, int64_t kappa, const Modulus& q) {
  std::vector<RingElement> v;
  v.reserve(static_cast<size_t>(kappa));
  for (int64_t k = 0; k < kappa; ++k) {
    const uint64_t residue = r.U64();
    if (residue >= q.value()) throw std::runtime_error("key file residue out of range");
    v.push_back(RingElement::FromResidue(residue, q));
  }
  return RingVector(std::move(v));
}

}  // namespace

void PsaParams::Validate() const {
  Require(kappa >= 1, "kappa must be >= 1");
  Require(lambda >= 1, "lambda must be >= 1");
  Require(n >= 1, "n must be >= 1");
  Require(m >= 0, "m must be >= 0");
  Require(gamma > 0 && gamma <= 1, "gamma must lie in (0,1]");
  Require(slack_s >= 1, "slack_s must be >= 1");
  if (preset == Preset::kSkellamExample) {
    Require(lambda > 3 * kappa, "Skellam preset requires lambda > 3 kappa");
  }
  const double budget = static_cast<double>(m) * static_cast<double>(n) +
                        12.0 * std::sqrt(static_cast<double>(n) * noise.Variance());
  Require(budget <= static_cast<double>(q.half()),
          "modulus " + std::to_string(q.value()) + " too small for m*n plus noise headroom");
}

const RingVector& TimeTagSet::at(uint32_t epoch) const {
  if (epoch >= tags.size()) {
    throw std::out_of_range("epoch " + std::to_string(epoch) + " has no time tag");
  }
  return tags[epoch];
}

RingElement LwePrf::Evaluate(const RingVector& key, const RingVector& tag) const {
  return InnerProduct(tag, key);
}

RingVector LwePrf::CombineKeys(const RingVector& a, const RingVector& b) const {
  return a + b;
}

RingVector LwePrf::InverseKey(const RingVector& key) const { return -key; }

RingElement LwePrf::Embed(int64_t x) const { return RingElement(x, q_); }

std::optional<int64_t> LwePrf::Unembed(const RingElement& y, int64_t bound) const {
  const int64_t v = y.lift();
  if (v < -bound || v > bound) return std::nullopt;
  return v;
}

RingVector UniformRingVector(size_t length, const Modulus& q, RngStream& rng) {
  std::vector<RingElement> v;
  v.reserve(length);
  for (size_t k = 0; k < length; ++k) {
    v.push_back(RingElement::FromResidue(rng.UniformBelow(q.value()), q));
  }
  return RingVector(std::move(v));
}

std::pair<KeyMaterial, TimeTagSet> Setup(const PsaParams& params, RngStream& rng) {
  params.Validate();
  const auto kappa = static_cast<size_t>(params.kappa);
  std::vector<RingVector> shares;
  shares.reserve(static_cast<size_t>(params.n));
  RingVector sum = RingVector::Zero(kappa, params.q);
  for (int64_t i = 0; i < params.n; ++i) {
    shares.push_back(UniformRingVector(kappa, params.q, rng));
    sum = sum + shares.back();
  }
  TimeTagSet tags;
  tags.tags.reserve(static_cast<size_t>(params.lambda));
  for (int64_t j = 0; j < params.lambda; ++j) {
    tags.tags.push_back(UniformRingVector(kappa, params.q, rng));
  }
  return {KeyMaterial{std::move(shares), -sum}, std::move(tags)};
}

Modulus ChooseModulus(int64_t m, int64_t n, double total_variance, double headroom) {
  Require(m >= 0 && n >= 1, "m must be >= 0 and n >= 1");
  Require(total_variance >= 0 && headroom >= 0, "variance and headroom must be >= 0");
  const long double half =
      static_cast<long double>(m) * n + std::ceil(headroom * std::sqrt(total_variance));
  const long double q_min = 2 * half + 1;
  if (q_min > static_cast<long double>(Modulus::kMaxValue)) {
    throw std::overflow_error("required modulus exceeds 63 bits");
  }
  return Modulus(NextPrime(std::max<uint64_t>(3, static_cast<uint64_t>(q_min))));
}

int64_t DefaultSlack(int64_t kappa) {
  Require(kappa >= 2, "kappa must be >= 2");
  const double l = std::log2(static_cast<double>(kappa));
  return static_cast<int64_t>(std::ceil(l * l / 4));
}

PsaParams SecurityParameterPreset(Preset kind, int64_t kappa, double gamma, int64_t n,
                                  int64_t m) {
  Require(kappa >= 16, "presets require kappa >= 16");
  Require(kind != Preset::kCustom, "choose the Gaussian or Skellam preset");
  Require(gamma > 0 && gamma <= 1, "gamma must lie in (0,1]");
  Require(n >= 1, "n must be >= 1");
  PsaParams p;
  p.kappa = kappa;
  p.lambda = 3 * kappa + 1;
  p.n = n;
  p.m = m;
  p.gamma = gamma;
  p.slack_s = DefaultSlack(kappa);
  p.preset = kind;
  if (kind == Preset::kSkellamExample) {
    const auto l = static_cast<double>(p.lambda);
    const auto s = static_cast<double>(p.slack_s);
    p.noise = NoiseSpec(SkellamParams{4 * l * l * static_cast<double>(kappa) * s * s});
  } else {
    p.noise = NoiseSpec(GaussianParams{2 * static_cast<double>(kappa) / M_PI});
  }
  // Worst case for the modulus: all n users add noise.
  p.q = ChooseModulus(m, n, static_cast<double>(n) * p.noise.Variance());
  p.Validate();
  return p;
}

Ciphertext PsaEncrypt(uint32_t user, uint32_t epoch, const RingVector& share,
                      const RingVector& tag, int64_t x, int64_t noise, int64_t m) {
  if (x < -m || x > m) {
    throw std::out_of_range("plaintext " + std::to_string(x) + " outside [-" +
                            std::to_string(m) + ", " + std::to_string(m) + "]");
  }
  const Modulus& q = share.modulus();
  RingElement value = InnerProduct(tag, share) +
                      ReduceCentral(static_cast<__int128>(noise) + x, q);
  return Ciphertext{epoch, user, value};
}

int64_t PsaDecrypt(const RingVector& aggregator_key, const RingVector& tag,
                   std::span<const Ciphertext> ciphers, int64_t n) {
  if (static_cast<int64_t>(ciphers.size()) != n) {
    throw std::invalid_argument("expected " + std::to_string(n) + " ciphertexts, got " +
                                std::to_string(ciphers.size()));
  }
  std::set<uint32_t> users;
  RingElement acc = InnerProduct(tag, aggregator_key);
  for (const auto& c : ciphers) {
    if (c.epoch != ciphers.front().epoch) {
      throw std::invalid_argument("ciphertexts from different epochs");
    }
    if (!users.insert(c.user).second) {
      throw std::invalid_argument("duplicate ciphertext for user " + std::to_string(c.user));
    }
    acc += c.value;
  }
  return acc.lift();
}

std::vector<int64_t> GenericPsaRoundtrip(const WeakPrf& prf, const PsaParams& params,
                                         const std::vector<std::vector<int64_t>>& data,
                                         RngStream& rng) {
  params.Validate();
  const auto kappa = static_cast<size_t>(params.kappa);
  if (static_cast<int64_t>(data.size()) > params.lambda) {
    throw std::invalid_argument("more epochs than time tags");
  }
  std::vector<RingVector> shares;
  for (int64_t i = 0; i < params.n; ++i) {
    shares.push_back(UniformRingVector(kappa, params.q, rng));
  }
  RingVector combined = shares.front();
  for (size_t i = 1; i < shares.size(); ++i) combined = prf.CombineKeys(combined, shares[i]);
  const RingVector s0 = prf.InverseKey(combined);

  const int64_t bound = params.m * params.n;
  std::vector<int64_t> sums;
  sums.reserve(data.size());
  for (const auto& row : data) {
    if (static_cast<int64_t>(row.size()) != params.n) {
      throw std::invalid_argument("data row must hold one value per user");
    }
    const RingVector tag = UniformRingVector(kappa, params.q, rng);
    RingElement acc = prf.Evaluate(s0, tag);
    for (int64_t i = 0; i < params.n; ++i) {
      if (row[i] < -params.m || row[i] > params.m) {
        throw std::out_of_range("plaintext outside [-m, m]");
      }
      acc += prf.Evaluate(shares[i], tag) + prf.Embed(row[i]);
    }
    auto x = prf.Unembed(acc, bound);
    if (!x) throw WraparoundError("aggregate does not decode inside [-m n, m n]");
    sums.push_back(*x);
  }
  return sums;
}

UserEncryptor::UserEncryptor(uint32_t user, RingVector share, TimeTagSet tags, int64_t m,
                             NoiseSpec noise, uint64_t seed)
    : user_(user),
      share_(std::move(share)),
      tags_(std::move(tags)),
      m_(m),
      noise_(std::move(noise)),
      rng_(seed, user) {}

Ciphertext UserEncryptor::Encrypt(uint32_t epoch, int64_t x) {
  last_noise_ = SampleNoise(noise_, rng_);
  return PsaEncrypt(user_, epoch, share_, tags_.at(epoch), x, last_noise_, m_);
}

const char* SubmitStatusName(SubmitStatus status) {
  switch (status) {
    case SubmitStatus::kAccepted:
      return "accepted";
    case SubmitStatus::kDuplicate:
      return "duplicate";
    case SubmitStatus::kBadEpoch:
      return "bad epoch";
    case SubmitStatus::kBadUser:
      return "bad user";
    case SubmitStatus::kBadModulus:
      return "bad modulus";
  }
  return "unknown";
}

EpochAggregator::EpochAggregator(RingVector aggregator_key, TimeTagSet tags, int64_t n)
    : aggregator_key_(std::move(aggregator_key)), tags_(std::move(tags)), n_(n) {
  Require(n >= 1, "n must be >= 1");
}

SubmitStatus EpochAggregator::Submit(const Ciphertext& c) {
  if (c.epoch >= tags_.tags.size() || results_.contains(c.epoch)) {
    return SubmitStatus::kBadEpoch;
  }
  if (c.user < 1 || c.user > n_) return SubmitStatus::kBadUser;
  if (!(c.value.modulus() == aggregator_key_.modulus())) return SubmitStatus::kBadModulus;
  auto& slot = pending_[c.epoch];
  if (slot.contains(c.user)) return SubmitStatus::kDuplicate;
  slot.emplace(c.user, c);
  return SubmitStatus::kAccepted;
}

bool EpochAggregator::IsComplete(uint32_t epoch) const {
  if (results_.contains(epoch)) return true;
  auto it = pending_.find(epoch);
  return it != pending_.end() && static_cast<int64_t>(it->second.size()) == n_;
}

int64_t EpochAggregator::Aggregate(uint32_t epoch) {
  if (auto r = results_.find(epoch); r != results_.end()) return r->second;
  if (!IsComplete(epoch)) {
    throw std::logic_error("epoch " + std::to_string(epoch) + " is incomplete");
  }
  std::vector<Ciphertext> ciphers;
  for (auto& [user, c] : pending_[epoch]) ciphers.push_back(c);
  const int64_t sum = PsaDecrypt(aggregator_key_, tags_.at(epoch), ciphers, n_);
  pending_.erase(epoch);
  results_[epoch] = sum;
  return sum;
}

std::optional<int64_t> EpochAggregator::Result(uint32_t epoch) const {
  if (auto r = results_.find(epoch); r != results_.end()) return r->second;
  return std::nullopt;
}

std::vector<uint8_t> KeyFile::Serialize() const {
  std::vector<uint8_t> out = {'P', 'S', 'A', '1'};
  PutU64(out, kVersion);
  PutU64(out, static_cast<uint64_t>(kappa));
  PutU64(out, static_cast<uint64_t>(lambda));
  PutU64(out, q);
  PutU64(out, static_cast<uint64_t>(n));
  PutU64(out, holder);
  PutU64(out, static_cast<uint64_t>(m));
  for (const auto& e : key.elements()) PutU64(out, e.residue());
  for (const auto& t : tags.tags) {
    for (const auto& e : t.elements()) PutU64(out, e.residue());
  }
  return out;
}

KeyFile KeyFile::Parse(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  r.Magic();
  if (r.U64() != kVersion) throw std::runtime_error("unsupported key file version");
  const auto kappa = static_cast<int64_t>(r.U64());
  const auto lambda = static_cast<int64_t>(r.U64());
  const uint64_t q_value = r.U64();
  const auto n = static_cast<int64_t>(r.U64());
  const uint64_t holder = r.U64();
  const auto m = static_cast<int64_t>(r.U64());
  if (kappa < 1 || kappa > (1 << 20) || lambda < 1 || lambda > (1 << 24) || n < 1 ||
      m < 0 || holder > static_cast<uint64_t>(n)) {
    throw std::runtime_error("key file header out of range");
  }
  const Modulus q(q_value);
  RingVector key = ReadVector(r, kappa, q);
  TimeTagSet tags;
  for (int64_t j = 0; j < lambda; ++j) tags.tags.push_back(ReadVector(r, kappa, q));
  if (!r.AtEnd()) throw std::runtime_error("trailing bytes in key file");
  return KeyFile{kappa, lambda, q_value, n, holder, m, std::move(key), std::move(tags)};
}

void WriteKeyFile(const std::string& path, const KeyFile& file) {
  const auto bytes = file.Serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

KeyFile ReadKeyFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return KeyFile::Parse(bytes);
}

std::vector<KeyFile> MakeKeyFiles(const PsaParams& params, const KeyMaterial& keys,
                                  const TimeTagSet& tags) {
  std::vector<KeyFile> files;
  auto make = [&](uint64_t holder, const RingVector& key) {
    return KeyFile{params.kappa, params.lambda, params.q.value(), params.n, holder,
                   params.m,     key,           tags};
  };
  files.push_back(make(0, keys.aggregator_key));
  for (size_t i = 0; i < keys.shares.size(); ++i) files.push_back(make(i + 1, keys.shares[i]));
  return files;
}

}  // namespace psa
