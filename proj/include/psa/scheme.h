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

#ifndef PSA_SCHEME_H_
#define PSA_SCHEME_H_

// Private stream aggregation over a key-homomorphic weak PRF, and its
// instantiation with the LWE-style function F_s(t) = <t, s> + e over Z_q.
//
// Each user i holds a key share s_i, the aggregator holds s_0 = -sum s_i.
// In epoch j every user publishes c_ij = <t_j, s_i> + e_ij + x_ij; adding
// <t_j, s_0> to the sum of all n ciphertexts cancels the keys and leaves
// sum x_ij + sum e_ij, which lifts exactly when it stays inside the central
// range of q.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psa/dist.h"
#include "psa/zq.h"

namespace psa {

class WraparoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Preset { kCustom, kGaussianExample, kSkellamExample };

struct PsaParams {
  int64_t kappa = 16;
  int64_t lambda = 1;
  Modulus q{3};
  int64_t n = 1;
  // Plaintexts lie in {-m, ..., m}.
  int64_t m = 1;
  double gamma = 1.0;
  int64_t slack_s = 1;
  // Noise each honest user adds per epoch.
  NoiseSpec noise;
  Preset preset = Preset::kCustom;

  // Throws std::invalid_argument when an invariant is violated, including
  // the no-wraparound budget m*n + 12 sqrt(n * Var(noise)) <= (q-1)/2.
  void Validate() const;
};

struct KeyMaterial {
  std::vector<RingVector> shares;  // s_1..s_n
  RingVector aggregator_key;       // s_0
};

struct TimeTagSet {
  std::vector<RingVector> tags;  // t_1..t_lambda

  const RingVector& at(uint32_t epoch) const;
};

struct Ciphertext {
  uint32_t epoch = 0;
  uint32_t user = 0;  // 1-based
  RingElement value;
};

// Key-homomorphic weak PRF into the additive group Z_q together with the
// plaintext embedding phi.
class WeakPrf {
 public:
  virtual ~WeakPrf() = default;
  // Deterministic part of F_key(tag).
  virtual RingElement Evaluate(const RingVector& key, const RingVector& tag) const = 0;
  // Key k with F_k = F_a * F_b.
  virtual RingVector CombineKeys(const RingVector& a, const RingVector& b) const = 0;
  virtual RingVector InverseKey(const RingVector& key) const = 0;
  virtual RingElement Embed(int64_t x) const = 0;
  // Inverse of phi over {-bound, ..., bound}; nullopt outside that range.
  virtual std::optional<int64_t> Unembed(const RingElement& y, int64_t bound) const = 0;
};

// F_s(t) = <t, s> with phi the identity embedding into Z_q.
class LwePrf final : public WeakPrf {
 public:
  explicit LwePrf(Modulus q) : q_(q) {}
  RingElement Evaluate(const RingVector& key, const RingVector& tag) const override;
  RingVector CombineKeys(const RingVector& a, const RingVector& b) const override;
  RingVector InverseKey(const RingVector& key) const override;
  RingElement Embed(int64_t x) const override;
  std::optional<int64_t> Unembed(const RingElement& y, int64_t bound) const override;

 private:
  Modulus q_;
};

RingVector UniformRingVector(size_t length, const Modulus& q, RngStream& rng);

// Trusted-dealer setup: n uniform shares, s_0 the inverse of their
// combination, lambda uniform tags.
std::pair<KeyMaterial, TimeTagSet> Setup(const PsaParams& params, RngStream& rng);

// Smallest prime q with (q-1)/2 >= m*n + headroom * sqrt(total_variance).
// Throws std::overflow_error if q would not fit in 63 bits.
Modulus ChooseModulus(int64_t m, int64_t n, double total_variance, double headroom = 12.0);

// ceil(log2(kappa)^2 / 4).
int64_t DefaultSlack(int64_t kappa);

PsaParams SecurityParameterPreset(Preset kind, int64_t kappa, double gamma, int64_t n,
                                  int64_t m = 1);

// c = <tag, share> + noise + x. Throws std::out_of_range if |x| > m.
Ciphertext PsaEncrypt(uint32_t user, uint32_t epoch, const RingVector& share,
                      const RingVector& tag, int64_t x, int64_t noise, int64_t m);

// lift(<tag, s_0> + sum c_i). Requires exactly n ciphertexts of one epoch
// from distinct users.
int64_t PsaDecrypt(const RingVector& aggregator_key, const RingVector& tag,
                   std::span<const Ciphertext> ciphers, int64_t n);

// Runs Setup/Enc/Dec through the generic interface without noise and
// returns the decoded sum of each epoch. data[j][i] is user i's value in
// epoch j. Throws WraparoundError if a sum escapes {-m n, ..., m n}.
std::vector<int64_t> GenericPsaRoundtrip(const WeakPrf& prf, const PsaParams& params,
                                         const std::vector<std::vector<int64_t>>& data,
                                         RngStream& rng);

// One user's encryption state: the share, the public tags and a private
// noise stream seeded by (seed, user).
class UserEncryptor {
 public:
  UserEncryptor(uint32_t user, RingVector share, TimeTagSet tags, int64_t m,
                NoiseSpec noise, uint64_t seed);

  uint32_t user() const { return user_; }
  // Draws this epoch's noise and encrypts x.
  Ciphertext Encrypt(uint32_t epoch, int64_t x);
  // Noise added by the most recent Encrypt call.
  int64_t last_noise() const { return last_noise_; }

 private:
  uint32_t user_;
  RingVector share_;
  TimeTagSet tags_;
  int64_t m_;
  NoiseSpec noise_;
  RngStream rng_;
  int64_t last_noise_ = 0;
};

enum class SubmitStatus { kAccepted, kDuplicate, kBadEpoch, kBadUser, kBadModulus };
const char* SubmitStatusName(SubmitStatus status);

// Per-epoch ciphertext buffer. Accepts one ciphertext per (user, epoch) and
// decrypts an epoch once all n users have submitted. Holds no plaintexts.
// Not synchronized.
class EpochAggregator {
 public:
  EpochAggregator(RingVector aggregator_key, TimeTagSet tags, int64_t n);

  int64_t n() const { return n_; }
  SubmitStatus Submit(const Ciphertext& c);
  bool IsComplete(uint32_t epoch) const;
  // Decrypts a complete epoch; throws std::logic_error otherwise.
  int64_t Aggregate(uint32_t epoch);
  std::optional<int64_t> Result(uint32_t epoch) const;

 private:
  RingVector aggregator_key_;
  TimeTagSet tags_;
  int64_t n_;
  std::map<uint32_t, std::map<uint32_t, Ciphertext>> pending_;
  std::map<uint32_t, int64_t> results_;
};

// Binary key file shared by the dealer, the users and the aggregator.
//
//   "PSA1" | u64 version | u64 kappa | u64 lambda | u64 q | u64 n
//   | u64 holder | u64 m | kappa x u64 key | lambda x kappa x u64 tags
//
// All integers little-endian; residues in [0, q). holder 0 is the
// aggregator key s_0, holder i >= 1 is user i's share.
struct KeyFile {
  static constexpr uint64_t kVersion = 1;

  int64_t kappa = 0;
  int64_t lambda = 0;
  uint64_t q = 0;
  int64_t n = 0;
  uint64_t holder = 0;
  int64_t m = 0;
  RingVector key;
  TimeTagSet tags;

  std::vector<uint8_t> Serialize() const;
  // Throws std::runtime_error on malformed input.
  static KeyFile Parse(std::span<const uint8_t> bytes);
};

void WriteKeyFile(const std::string& path, const KeyFile& file);
KeyFile ReadKeyFile(const std::string& path);

// Key files for the aggregator (index 0) and each user (index i).
std::vector<KeyFile> MakeKeyFiles(const PsaParams& params, const KeyMaterial& keys,
                                  const TimeTagSet& tags);

}  // namespace psa

#endif  // PSA_SCHEME_H_
