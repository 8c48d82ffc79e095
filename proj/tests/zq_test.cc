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

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include "psa/dist.h"

namespace psa {
namespace {

using boost::multiprecision::cpp_int;

int64_t CentralOracle(const cpp_int& x, uint64_t q) {
  cpp_int r = x % q;
  if (r < 0) r += q;
  if (r > (q - 1) / 2) r -= q;
  return r.convert_to<int64_t>();
}

TEST(ZqTest, ReduceCentralExamples) {
  const Modulus q5(5);
  EXPECT_EQ(ReduceCentral(int64_t{7}, q5).lift(), 2);
  EXPECT_EQ(ReduceCentral(int64_t{8}, q5).lift(), -2);
  for (uint64_t qv : {5ull, 101ull, 9223372036854775783ull}) {
    const Modulus q(qv);
    EXPECT_EQ(ReduceCentral(-q.half() - 1, q).lift(), q.half());
  }
}

TEST(ZqTest, LiftExamples) {
  const Modulus q(101);
  EXPECT_EQ(Lift(ReduceCentral(int64_t{3}, q)), 3);
  EXPECT_EQ(Lift(ReduceCentral(int64_t{100}, q)), -1);
  EXPECT_EQ(Lift(ReduceCentral(int64_t{0}, q)), 0);
}

TEST(ZqTest, ArithmeticExamples) {
  const Modulus q5(5);
  EXPECT_EQ((RingElement(2, q5) + RingElement(-2, q5)).lift(), 0);
  const Modulus q101(101);
  EXPECT_EQ((RingElement(3, q101) * RingElement(89, q101)).residue(), 65u);
  EXPECT_EQ((RingElement(3, q101) * RingElement(89, q101)).lift(), -36);
}

TEST(ZqTest, InnerProductExamples) {
  const Modulus q7(7);
  EXPECT_EQ(InnerProduct(RingVector({1, 2}, q7), RingVector({3, 4}, q7)).lift(), -3);
  EXPECT_EQ(InnerProduct(RingVector({5, -3}, q7), RingVector::Zero(2, q7)).lift(), 0);
  const Modulus q101(101);
  EXPECT_EQ(InnerProduct(RingVector({3}, q101), RingVector({89}, q101)).residue(), 65u);
}

TEST(ZqTest, MismatchedOperandsThrow) {
  const Modulus a(5), b(7);
  EXPECT_THROW(RingElement(1, a) + RingElement(1, b), ModulusMismatch);
  EXPECT_THROW(RingElement(1, a) * RingElement(1, b), ModulusMismatch);
  EXPECT_THROW(InnerProduct(RingVector({1}, a), RingVector({1}, b)), ModulusMismatch);
  EXPECT_THROW(InnerProduct(RingVector({1, 2}, a), RingVector({1}, a)), std::invalid_argument);
  EXPECT_THROW(RingVector(std::vector<RingElement>{}), std::invalid_argument);
  EXPECT_THROW(RingVector({RingElement(1, a), RingElement(1, b)}), ModulusMismatch);
}

TEST(ZqTest, ModulusValidation) {
  EXPECT_THROW(Modulus(2), std::invalid_argument);
  EXPECT_THROW(Modulus(9), std::invalid_argument);
  EXPECT_THROW(Modulus(1), std::invalid_argument);
  EXPECT_THROW(Modulus(0), std::invalid_argument);
  // 2^63 + 29 is prime but too wide.
  EXPECT_THROW(Modulus(9223372036854775837ull), std::invalid_argument);
  EXPECT_NO_THROW(Modulus(2305843009213693951ull));  // 2^61 - 1
  EXPECT_EQ(Modulus(101).half(), 50);
}

TEST(ZqTest, PrimalityMatchesTrialDivision) {
  auto trial = [](uint64_t n) {
    if (n < 2) return false;
    for (uint64_t d = 2; d * d <= n; ++d) {
      if (n % d == 0) return false;
    }
    return true;
  };
  for (uint64_t n = 0; n < 20000; ++n) ASSERT_EQ(IsPrime(n), trial(n)) << n;
  // Strong pseudoprimes to several small bases.
  EXPECT_FALSE(IsPrime(3215031751ull));
  EXPECT_FALSE(IsPrime(3825123056546413051ull));
  EXPECT_TRUE(IsPrime(9223372036854775783ull));  // largest prime below 2^63
  EXPECT_EQ(NextPrime(262), 263u);
  EXPECT_EQ(NextPrime(263), 263u);
  EXPECT_THROW(NextPrime(9223372036854775784ull), std::overflow_error);
}

TEST(ZqTest, ArithmeticAgreesWithBigIntegers) {
  RngStream rng(7, 0);
  const uint64_t moduli[] = {5, 101, 1000003, 4294967311ull, 2305843009213693951ull,
                             9223372036854775783ull};
  for (int trial = 0; trial < 10000; ++trial) {
    const uint64_t qv = moduli[trial % 6];
    const Modulus q(qv);
    const auto a = static_cast<int64_t>(rng.NextU64());
    const auto b = static_cast<int64_t>(rng.NextU64());
    const RingElement x(a, q), y(b, q);
    ASSERT_EQ(x.lift(), CentralOracle(cpp_int(a), qv));
    ASSERT_EQ((x + y).lift(), CentralOracle(cpp_int(a) + b, qv));
    ASSERT_EQ((x * y).lift(), CentralOracle(cpp_int(a) * b, qv));
    ASSERT_EQ((-(-x)), x);
    ASSERT_LE(std::abs((x * y).lift()), q.half());
    // Round trip through lift and through the canonical residue.
    ASSERT_EQ(ReduceCentral(x.lift(), q), x);
    ASSERT_EQ(RingElement::FromResidue(x.residue(), q), x);
  }
}

TEST(ZqTest, InnerProductIsSymmetricAndBilinear) {
  RngStream rng(11, 0);
  const Modulus q(9223372036854775783ull);
  auto random_vec = [&](size_t len) {
    std::vector<RingElement> v;
    for (size_t i = 0; i < len; ++i) v.push_back(RingElement::FromResidue(rng.UniformBelow(q.value()), q));
    return RingVector(std::move(v));
  };
  for (int trial = 0; trial < 500; ++trial) {
    const size_t len = 1 + rng.UniformBelow(64);
    const RingVector u = random_vec(len), v = random_vec(len), w = random_vec(len);
    ASSERT_EQ(InnerProduct(u, v), InnerProduct(v, u));
    ASSERT_EQ(InnerProduct(u + w, v), InnerProduct(u, v) + InnerProduct(w, v));
    ASSERT_EQ(InnerProduct(-u, v), -InnerProduct(u, v));
    cpp_int acc = 0;
    for (size_t k = 0; k < len; ++k) acc += cpp_int(u[k].lift()) * v[k].lift();
    ASSERT_EQ(InnerProduct(u, v).lift(), CentralOracle(acc, q.value()));
  }
}

}  // namespace
}  // namespace psa
