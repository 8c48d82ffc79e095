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

#include "psa/zq.h"

#include <stdexcept>
#include <string>

namespace psa {
namespace {

using u128 = unsigned __int128;

uint64_t MulMod(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<u128>(a) * b % m);
}

uint64_t PowMod(uint64_t base, uint64_t exp, uint64_t m) {
  uint64_t result = 1 % m;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = MulMod(result, base, m);
    base = MulMod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// This witness set is exact for all n < 3.3e24.
constexpr uint64_t kWitnesses[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

void CheckSame(const Modulus& a, const Modulus& b) {
  if (!(a == b)) {
    throw ModulusMismatch("ring elements have different moduli (" +
                          std::to_string(a.value()) + " vs " +
                          std::to_string(b.value()) + ")");
  }
}

}  // namespace

bool IsPrime(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : kWitnesses) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (uint64_t a : kWitnesses) {
    uint64_t x = PowMod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = MulMod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

uint64_t NextPrime(uint64_t n) {
  if (n <= 2) return 2;
  uint64_t c = n | 1;
  for (; c <= Modulus::kMaxValue; c += 2) {
    if (IsPrime(c)) return c;
  }
  throw std::overflow_error("no prime below 2^63 at or above " +
                            std::to_string(n));
}

Modulus::Modulus(uint64_t q) : q_(q), half_(static_cast<int64_t>((q - 1) / 2)) {
  if (q <= 2 || q > kMaxValue || !IsPrime(q)) {
    throw std::invalid_argument("modulus must be an odd prime below 2^63, got " +
                                std::to_string(q));
  }
}

RingElement RingElement::FromWide(__int128 x, Modulus q) {
  const __int128 m = static_cast<__int128>(q.value());
  __int128 r = x % m;
  if (r < 0) r += m;
  if (r > q.half()) r -= m;
  return RingElement(Raw{}, static_cast<int64_t>(r), q);
}

RingElement::RingElement(int64_t x, Modulus q)
    : RingElement(FromWide(static_cast<__int128>(x), q)) {}

RingElement RingElement::FromResidue(uint64_t r, Modulus q) {
  if (r >= q.value()) {
    throw std::out_of_range("residue " + std::to_string(r) +
                            " not below modulus " + std::to_string(q.value()));
  }
  return FromWide(static_cast<__int128>(r), q);
}

uint64_t RingElement::residue() const {
  return value_ >= 0 ? static_cast<uint64_t>(value_)
                     : q_.value() - static_cast<uint64_t>(-value_);
}

RingElement RingElement::operator-() const {
  return RingElement(Raw{}, -value_, q_);
}

RingElement operator+(const RingElement& a, const RingElement& b) {
  CheckSame(a.q_, b.q_);
  return RingElement::FromWide(static_cast<__int128>(a.value_) + b.value_, a.q_);
}

RingElement operator-(const RingElement& a, const RingElement& b) {
  return a + (-b);
}

RingElement operator*(const RingElement& a, const RingElement& b) {
  CheckSame(a.q_, b.q_);
  return RingElement::FromWide(static_cast<__int128>(a.value_) * b.value_, a.q_);
}

RingElement& RingElement::operator+=(const RingElement& other) {
  *this = *this + other;
  return *this;
}

RingElement ReduceCentral(int64_t x, const Modulus& q) {
  return RingElement(x, q);
}

RingElement ReduceCentral(__int128 x, const Modulus& q) {
  return RingElement::FromWide(x, q);
}

RingVector::RingVector(std::vector<RingElement> elements)
    : elements_(std::move(elements)) {
  if (elements_.empty()) {
    throw std::invalid_argument("ring vector must be non-empty");
  }
  for (const auto& e : elements_) CheckSame(e.modulus(), elements_[0].modulus());
}

RingVector::RingVector(std::initializer_list<int64_t> values, Modulus q)
    : RingVector([&] {
        std::vector<RingElement> v;
        v.reserve(values.size());
        for (int64_t x : values) v.emplace_back(x, q);
        return v;
      }()) {}

RingVector RingVector::Zero(size_t length, Modulus q) {
  return RingVector(std::vector<RingElement>(length, RingElement(0, q)));
}

RingVector RingVector::operator-() const {
  std::vector<RingElement> out;
  out.reserve(elements_.size());
  for (const auto& e : elements_) out.push_back(-e);
  return RingVector(std::move(out));
}

RingVector operator+(const RingVector& a, const RingVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("ring vector length mismatch");
  }
  std::vector<RingElement> out;
  out.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i) out.push_back(a[i] + b[i]);
  return RingVector(std::move(out));
}

RingElement InnerProduct(const RingVector& u, const RingVector& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("inner product of vectors with lengths " +
                                std::to_string(u.size()) + " and " +
                                std::to_string(v.size()));
  }
  const Modulus& q = u.modulus();
  CheckSame(q, v.modulus());
  // Each product is below 2^124 in magnitude; reduce per term to stay exact.
  const __int128 m = static_cast<__int128>(q.value());
  __int128 acc = 0;
  for (size_t k = 0; k < u.size(); ++k) {
    acc += static_cast<__int128>(u[k].lift()) * v[k].lift() % m;
    acc %= m;
  }
  return RingElement::FromWide(acc, q);
}

}  // namespace psa
