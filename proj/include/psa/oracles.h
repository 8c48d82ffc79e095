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

#ifndef PSA_ORACLES_H_
#define PSA_ORACLES_H_

// Two sampling experiments over a pair of adjacent databases with
// per-coordinate Skellam noise. Experiment one draws a fair bit b and
// outputs (b, x = D_b + e, s = sum x). Experiment two draws s the same way,
// forgets how, then re-draws b from its posterior given s and x from its
// conditional law given (b, s). Both have the same joint law; the second is
// what a reduction can simulate knowing only s.

#include <cstdint>
#include <memory>
#include <vector>

#include "psa/dist.h"

namespace psa {

class AdjacentPair {
 public:
  // Throws std::invalid_argument unless d0 and d1 have equal length and
  // differ in exactly one coordinate.
  AdjacentPair(std::vector<int64_t> d0, std::vector<int64_t> d1);

  const std::vector<int64_t>& d0() const { return d0_; }
  const std::vector<int64_t>& d1() const { return d1_; }
  const std::vector<int64_t>& d(int b) const { return b == 0 ? d0_ : d1_; }
  size_t size() const { return d0_.size(); }
  int64_t sum0() const { return sum0_; }
  int64_t sum1() const { return sum1_; }

 private:
  std::vector<int64_t> d0_, d1_;
  int64_t sum0_ = 0, sum1_ = 0;
};

struct ExperimentOutput {
  int b = 0;
  std::vector<int64_t> x;
  int64_t s = 0;
};

ExperimentOutput RunExp1(const AdjacentPair& pair, double mu_user, RngStream& rng);

// Posterior P[b = 0 | S = s] when the aggregate noise is Sk(n mu_user).
// Throws std::range_error if both likelihoods underflow.
double BiasP(int64_t s, const AdjacentPair& pair, double mu_user, int64_t n);

// Samples e_1..e_n with sum y, each e_i ~ Sk(mu_user) independently, by
// drawing e_i from P[E_i = e | E_i + ... + E_n = y_i] in turn. Log-pmf
// tables for each partial sum are cached across calls.
class ConditionalNoiseSampler {
 public:
  ConditionalNoiseSampler(double mu_user, int64_t n);

  double mu_user() const { return mu_user_; }
  int64_t n() const { return n_; }

  std::vector<int64_t> Sample(int64_t y, RngStream& rng);
  // Conditional pmf of e_i given E_i + ... + E_n = y over [lo, lo + size).
  // i is 1-based; returns normalized probabilities.
  std::vector<double> ConditionalPmf(int64_t i, int64_t y, int64_t* lo);
  // log P[E_1 + ... + E_n = y].
  double AggregateLogPmf(int64_t y) { return Table(n_)(y); }

 private:
  SkellamLogPmfTable& Table(int64_t terms);

  double mu_user_;
  int64_t n_;
  // tables_[j-1] is the law of a sum of j shares.
  std::vector<std::unique_ptr<SkellamLogPmfTable>> tables_;
};

std::vector<int64_t> ConditionalNoiseSample(int64_t s, int b, const AdjacentPair& pair,
                                            double mu_user, int64_t n, RngStream& rng);

// Uses the sampler's cached tables; sampler.n() must equal pair.size().
ExperimentOutput RunExp2(const AdjacentPair& pair, ConditionalNoiseSampler& sampler,
                         RngStream& rng);
ExperimentOutput RunExp2(const AdjacentPair& pair, double mu_user, int64_t n,
                         RngStream& rng);

}  // namespace psa

#endif  // PSA_ORACLES_H_
