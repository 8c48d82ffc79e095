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

#ifndef PSA_DIST_H_
#define PSA_DIST_H_

// Discrete samplers and probability evaluation for the noise distributions
// used by the aggregation mechanisms: Poisson, symmetric Skellam, two-sided
// geometric, centered binomial and rounded Gaussian.

#include <cstdint>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

namespace psa {

// Deterministic random source. Identical (seed, stream) pairs produce
// identical sequences on every platform: the engine and its seeding are
// fully specified by the standard, and all derived variates are computed
// here rather than through std:: distributions.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

  uint64_t NextU64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform();
  // Uniform on (0, 1].
  double UniformPositive() { return 1.0 - Uniform(); }
  // Uniform integer in [0, bound). bound > 0.
  uint64_t UniformBelow(uint64_t bound);
  bool Bernoulli(double p) { return Uniform() < p; }
  double StandardNormal();

 private:
  uint64_t seed_;
  uint64_t stream_;
  std::mt19937_64 engine_;
};

struct SkellamParams {
  // Variance of the symmetric law Sk(mu) = Poisson(mu/2) - Poisson(mu/2).
  double mu;
};

struct NoNoise {};

struct GeometricParams {
  double alpha;  // P[X = k] proportional to alpha^|k|
  double activation = 1.0;
};

struct BinomialParams {
  int64_t trials;  // even; draw is Binomial(trials, 1/2) - trials/2
};

struct GaussianParams {
  double variance;
};

enum class NoiseKind { kNone, kSkellam, kGeometric, kBinomial, kDiscreteGaussian };

std::string_view NoiseKindName(NoiseKind kind);
// Accepts "none", "skellam", "geometric", "binomial", "discrete_gaussian"
// (also "gaussian"). Throws std::invalid_argument otherwise.
NoiseKind ParseNoiseKind(std::string_view name);

// A single user's noise law. The active alternative determines the kind.
class NoiseSpec {
 public:
  using Params = std::variant<NoNoise, SkellamParams, GeometricParams,
                              BinomialParams, GaussianParams>;

  NoiseSpec() = default;
  // Throws std::invalid_argument when parameters are out of domain.
  NoiseSpec(Params params);

  NoiseKind kind() const;
  const Params& params() const { return params_; }
  // Variance of one draw.
  double Variance() const;

 private:
  Params params_ = NoNoise{};
};

// One draw from the law described by spec.
int64_t SampleNoise(const NoiseSpec& spec, RngStream& rng);

int64_t SamplePoisson(double mean, RngStream& rng);
int64_t SampleSkellam(const SkellamParams& params, RngStream& rng);
int64_t SampleSymmetricGeometric(double alpha, RngStream& rng);
// Binomial(trials, 1/2) - trials/2; trials must be even and >= 2.
int64_t SampleBinomialCentered(int64_t trials, RngStream& rng);
// Continuous N(0, variance) rounded to the nearest integer.
int64_t SampleDiscreteGaussian(double variance, RngStream& rng);

// log Gamma(x) for x > 0, reentrant.
double LogGamma(double x);

// log(e^{-mu} I_k(mu)) for integer order k >= 0 and mu > 0.
double LogBesselIScaled(int64_t k, double mu);
// e^{-mu} I_k(mu). Throws std::underflow_error if the value is below the
// smallest normal double; use LogBesselIScaled in that regime.
double BesselIScaled(int64_t k, double mu);
// log(e^{-mu} I_k(mu)) for k = 0..kmax from a single pass.
std::vector<double> LogBesselIScaledTable(int64_t kmax, double mu);

double SkellamLogPmf(int64_t k, const SkellamParams& params);
// Underflows to 0 far in the tails.
double SkellamPmf(int64_t k, const SkellamParams& params);

// Log-pmf of Sk(mu) over a growing symmetric support, computed in batches.
class SkellamLogPmfTable {
 public:
  explicit SkellamLogPmfTable(double mu, int64_t initial_kmax = 0);
  double mu() const { return mu_; }
  double operator()(int64_t k);

 private:
  double mu_;
  std::vector<double> log_pmf_;
};

// Chernoff bound on P[X > sigma*mu + tau] for X ~ Sk(mu). Requires
// sigma > 0 and tau >= -sigma*mu.
double SkellamTailBound(double sigma, double tau, const SkellamParams& params);

}  // namespace psa

#endif  // PSA_DIST_H_
