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

#ifndef PSA_ZQ_H_
#define PSA_ZQ_H_

// Exact arithmetic in Z_q using the central residue-class representation
// {-(q-1)/2, ..., (q-1)/2}.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace psa {

class ModulusMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Deterministic Miller-Rabin, exact for every 64-bit input.
bool IsPrime(uint64_t n);

// Smallest prime >= n. Throws std::overflow_error if none fits in 63 bits.
uint64_t NextPrime(uint64_t n);

// An odd prime q < 2^63.
class Modulus {
 public:
  static constexpr uint64_t kMaxValue = (uint64_t{1} << 63) - 1;

  // Throws std::invalid_argument unless q is an odd prime below 2^63.
  explicit Modulus(uint64_t q);

  uint64_t value() const { return q_; }
  // (q-1)/2, the largest central representative.
  int64_t half() const { return half_; }

  friend bool operator==(const Modulus&, const Modulus&) = default;

 private:
  uint64_t q_;
  int64_t half_;
};

class RingElement {
 public:
  RingElement(int64_t x, Modulus q);
  static RingElement FromWide(__int128 x, Modulus q);
  // Builds from a canonical residue in [0, q).
  static RingElement FromResidue(uint64_t r, Modulus q);

  int64_t lift() const { return value_; }
  // Canonical residue in [0, q).
  uint64_t residue() const;
  const Modulus& modulus() const { return q_; }

  RingElement operator-() const;
  friend RingElement operator+(const RingElement& a, const RingElement& b);
  friend RingElement operator-(const RingElement& a, const RingElement& b);
  friend RingElement operator*(const RingElement& a, const RingElement& b);
  RingElement& operator+=(const RingElement& other);

  friend bool operator==(const RingElement&, const RingElement&) = default;

 private:
  struct Raw {};
  RingElement(Raw, int64_t central, Modulus q) : value_(central), q_(q) {}

  int64_t value_;
  Modulus q_;
};

RingElement ReduceCentral(int64_t x, const Modulus& q);
RingElement ReduceCentral(__int128 x, const Modulus& q);
inline int64_t Lift(const RingElement& x) { return x.lift(); }

// Non-empty vector over Z_q with a single modulus.
class RingVector {
 public:
  RingVector(std::vector<RingElement> elements);
  RingVector(std::initializer_list<int64_t> values, Modulus q);
  static RingVector Zero(size_t length, Modulus q);

  size_t size() const { return elements_.size(); }
  const Modulus& modulus() const { return elements_.front().modulus(); }
  const RingElement& operator[](size_t i) const { return elements_[i]; }
  std::span<const RingElement> elements() const { return elements_; }

  RingVector operator-() const;
  friend RingVector operator+(const RingVector& a, const RingVector& b);

  friend bool operator==(const RingVector&, const RingVector&) = default;

 private:
  std::vector<RingElement> elements_;
};

// Sum of u_k * v_k mod q. Throws ModulusMismatch or std::invalid_argument
// on mismatched moduli or lengths.
RingElement InnerProduct(const RingVector& u, const RingVector& v);

}  // namespace psa

#endif  // PSA_ZQ_H_
