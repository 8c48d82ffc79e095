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

#include "psa/dist.h"

#include <math.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace psa {
namespace {

void RequirePositive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::domain_error(std::string(what) + " must be positive and finite, got " +
                            std::to_string(v));
  }
}

std::seed_seq MakeSeedSeq(uint64_t seed, uint64_t stream) {
  return std::seed_seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                       static_cast<uint32_t>(stream),
                       static_cast<uint32_t>(stream >> 32)};
}

// Sequential-search inversion; exact for small means.
int64_t PoissonInversion(double mean, RngStream& rng) {
  const double u = rng.Uniform();
  double p = std::exp(-mean);
  double cdf = p;
  int64_t k = 0;
  // The bound on k only matters when u lands in the last ulp of the cdf.
  while (u >= cdf && k < 1000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Hormann's transformed rejection with squeeze (PTRS).
int64_t PoissonTransformedRejection(double mean, RngStream& rng) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2);
  while (true) {
    const double u = rng.Uniform() - 0.5;
    const double v = rng.Uniform();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<int64_t>(kf);
    if (kf < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + kf * loglam - LogGamma(kf + 1)) {
      return static_cast<int64_t>(kf);
    }
  }
}

// log(e^{-mu} I_k(mu)) from the ascending series, summed with scaled terms.
double LogBesselSeries(int64_t k, double mu) {
  const double half_sq = 0.25 * mu * mu;
  double term = 1.0;
  double sum = 1.0;
  for (int64_t j = 1; j < 10000; ++j) {
    term *= half_sq / (static_cast<double>(j) * static_cast<double>(j + k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  const double kd = static_cast<double>(k);
  return kd * std::log(0.5 * mu) - LogGamma(kd + 1) + std::log(sum) - mu;
}

constexpr double kSeriesThreshold = 20.0;

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
  auto seq = MakeSeedSeq(seed, stream);
  engine_.seed(seq);
}

double RngStream::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

uint64_t RngStream::UniformBelow(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("UniformBelow: bound must be positive");
  // Rejection on the top of the range keeps the draw exactly uniform.
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % bound;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double RngStream::StandardNormal() {
  // Marsaglia polar method; the second variate is discarded.
  while (true) {
    const double u = 2.0 * Uniform() - 1.0;
    const double v = 2.0 * Uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

std::string_view NoiseKindName(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone:
      return "none";
    case NoiseKind::kSkellam:
      return "skellam";
    case NoiseKind::kGeometric:
      return "geometric";
    case NoiseKind::kBinomial:
      return "binomial";
    case NoiseKind::kDiscreteGaussian:
      return "discrete_gaussian";
  }
  return "unknown";
}

NoiseKind ParseNoiseKind(std::string_view name) {
  if (name == "none") return NoiseKind::kNone;
  if (name == "skellam") return NoiseKind::kSkellam;
  if (name == "geometric") return NoiseKind::kGeometric;
  if (name == "binomial") return NoiseKind::kBinomial;
  if (name == "discrete_gaussian" || name == "gaussian") {
    return NoiseKind::kDiscreteGaussian;
  }
  throw std::invalid_argument("unknown noise kind '" + std::string(name) + "'");
}

NoiseSpec::NoiseSpec(Params params) : params_(std::move(params)) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SkellamParams>) {
          if (!(p.mu > 0.0) || !std::isfinite(p.mu)) {
            throw std::invalid_argument("Skellam variance must be positive and finite");
          }
        } else if constexpr (std::is_same_v<T, GeometricParams>) {
          if (!(p.alpha > 0.0 && p.alpha < 1.0)) {
            throw std::invalid_argument("geometric alpha must lie in (0,1)");
          }
          if (!(p.activation > 0.0 && p.activation <= 1.0)) {
            throw std::invalid_argument("geometric activation must lie in (0,1]");
          }
        } else if constexpr (std::is_same_v<T, BinomialParams>) {
          if (p.trials < 2 || p.trials % 2 != 0) {
            throw std::invalid_argument("binomial trials must be even and >= 2");
          }
        } else if constexpr (std::is_same_v<T, GaussianParams>) {
          if (!(p.variance > 0.0) || !std::isfinite(p.variance)) {
            throw std::invalid_argument("Gaussian variance must be positive and finite");
          }
        }
      },
      params_);
}

NoiseKind NoiseSpec::kind() const {
  switch (params_.index()) {
    case 1:
      return NoiseKind::kSkellam;
    case 2:
      return NoiseKind::kGeometric;
    case 3:
      return NoiseKind::kBinomial;
    case 4:
      return NoiseKind::kDiscreteGaussian;
    default:
      return NoiseKind::kNone;
  }
}

double NoiseSpec::Variance() const {
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SkellamParams>) {
          return p.mu;
        } else if constexpr (std::is_same_v<T, GeometricParams>) {
          return p.activation * 2 * p.alpha / ((1 - p.alpha) * (1 - p.alpha));
        } else if constexpr (std::is_same_v<T, BinomialParams>) {
          return static_cast<double>(p.trials) / 4;
        } else if constexpr (std::is_same_v<T, GaussianParams>) {
          return p.variance;
        } else {
          return 0.0;
        }
      },
      params_);
}

int64_t SampleNoise(const NoiseSpec& spec, RngStream& rng) {
  return std::visit(
      [&rng](const auto& p) -> int64_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SkellamParams>) {
          return SampleSkellam(p, rng);
        } else if constexpr (std::is_same_v<T, GeometricParams>) {
          if (p.activation < 1.0 && !rng.Bernoulli(p.activation)) return 0;
          return SampleSymmetricGeometric(p.alpha, rng);
        } else if constexpr (std::is_same_v<T, BinomialParams>) {
          return SampleBinomialCentered(p.trials, rng);
        } else if constexpr (std::is_same_v<T, GaussianParams>) {
          return SampleDiscreteGaussian(p.variance, rng);
        } else {
          return 0;
        }
      },
      spec.params());
}

int64_t SamplePoisson(double mean, RngStream& rng) {
  RequirePositive(mean, "Poisson mean");
  return mean < 30.0 ? PoissonInversion(mean, rng)
                     : PoissonTransformedRejection(mean, rng);
}

int64_t SampleSkellam(const SkellamParams& params, RngStream& rng) {
  RequirePositive(params.mu, "Skellam variance");
  const double half = 0.5 * params.mu;
  const int64_t a = SamplePoisson(half, rng);
  return a - SamplePoisson(half, rng);
}

int64_t SampleSymmetricGeometric(double alpha, RngStream& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("geometric alpha must lie in (0,1)");
  }
  // Difference of two iid Geometric(1 - alpha) failure counts.
  const double log_alpha = std::log(alpha);
  auto geometric = [&] {
    return static_cast<int64_t>(std::floor(std::log(rng.UniformPositive()) / log_alpha));
  };
  const int64_t a = geometric();
  return a - geometric();
}

int64_t SampleBinomialCentered(int64_t trials, RngStream& rng) {
  if (trials < 2 || trials % 2 != 0) {
    throw std::domain_error("binomial trials must be even and >= 2, got " +
                            std::to_string(trials));
  }
  int64_t ones = 0;
  int64_t remaining = trials;
  while (remaining >= 64) {
    ones += std::popcount(rng.NextU64());
    remaining -= 64;
  }
  if (remaining > 0) {
    ones += std::popcount(rng.NextU64() & ((uint64_t{1} << remaining) - 1));
  }
  return ones - trials / 2;
}

int64_t SampleDiscreteGaussian(double variance, RngStream& rng) {
  RequirePositive(variance, "Gaussian variance");
  return std::llround(std::sqrt(variance) * rng.StandardNormal());
}

double LogGamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

std::vector<double> LogBesselIScaledTable(int64_t kmax, double mu) {
  RequirePositive(mu, "Bessel argument");
  if (kmax < 0) throw std::domain_error("Bessel order must be non-negative");
  std::vector<double> out(static_cast<size_t>(kmax) + 1);
  if (mu < kSeriesThreshold) {
    for (int64_t k = 0; k <= kmax; ++k) out[k] = LogBesselSeries(k, mu);
    return out;
  }
  // Backward recurrence on r_j = I_j / I_{j-1}, started far enough above
  // both kmax and the bulk of the mass that the starting error is damped
  // below double precision, then normalized by I_0 + 2 sum_j I_j = e^mu.
  const int64_t top = kmax + static_cast<int64_t>(std::ceil(12.0 * std::sqrt(mu))) + 64;
  std::vector<double> log_ratio_prefix(static_cast<size_t>(top) + 1, 0.0);
  std::vector<double> ratio(static_cast<size_t>(top) + 2, 0.0);
  const double n1 = static_cast<double>(top + 1);
  ratio[top + 1] = mu / (n1 + std::sqrt(n1 * n1 + mu * mu));
  for (int64_t j = top; j >= 1; --j) {
    ratio[j] = 1.0 / (2.0 * static_cast<double>(j) / mu + ratio[j + 1]);
  }
  double tail_sum = 0.0;
  double compensation = 0.0;
  for (int64_t j = 1; j <= top; ++j) {
    log_ratio_prefix[j] = log_ratio_prefix[j - 1] + std::log(ratio[j]);
    const double y = std::exp(log_ratio_prefix[j]) - compensation;
    const double t = tail_sum + y;
    compensation = (t - tail_sum) - y;
    tail_sum = t;
  }
  const double log_norm = std::log1p(2.0 * tail_sum);
  for (int64_t k = 0; k <= kmax; ++k) out[k] = log_ratio_prefix[k] - log_norm;
  return out;
}

double LogBesselIScaled(int64_t k, double mu) {
  RequirePositive(mu, "Bessel argument");
  if (k < 0) throw std::domain_error("Bessel order must be non-negative");
  // For k >= mu^2 the series ratio is below 1/4 from the first term.
  if (mu < kSeriesThreshold || static_cast<double>(k) >= mu * mu) return LogBesselSeries(k, mu);
  return LogBesselIScaledTable(k, mu).back();
}

double BesselIScaled(int64_t k, double mu) {
  const double log_value = LogBesselIScaled(k, mu);
  if (log_value < std::log(std::numeric_limits<double>::min())) {
    throw std::underflow_error("e^-mu I_" + std::to_string(k) + "(" +
                               std::to_string(mu) + ") underflows a double");
  }
  return std::exp(log_value);
}

double SkellamLogPmf(int64_t k, const SkellamParams& params) {
  return LogBesselIScaled(k < 0 ? -k : k, params.mu);
}

double SkellamPmf(int64_t k, const SkellamParams& params) {
  return std::exp(SkellamLogPmf(k, params));
}

SkellamLogPmfTable::SkellamLogPmfTable(double mu, int64_t initial_kmax) : mu_(mu) {
  RequirePositive(mu, "Skellam variance");
  log_pmf_ = LogBesselIScaledTable(std::max<int64_t>(initial_kmax, 16), mu);
}

double SkellamLogPmfTable::operator()(int64_t k) {
  const int64_t a = k < 0 ? -k : k;
  if (a >= static_cast<int64_t>(log_pmf_.size())) {
    log_pmf_ = LogBesselIScaledTable(std::max<int64_t>(a, 2 * log_pmf_.size()), mu_);
  }
  return log_pmf_[a];
}

double SkellamTailBound(double sigma, double tau, const SkellamParams& params) {
  RequirePositive(sigma, "tail bound sigma");
  RequirePositive(params.mu, "Skellam variance");
  if (!(tau >= -sigma * params.mu)) {
    throw std::domain_error("tail bound requires tau >= -sigma*mu");
  }
  const double root = std::sqrt(1.0 + sigma * sigma);
  const double t = std::asinh(sigma);  // ln(sigma + sqrt(1 + sigma^2))
  return std::exp(-params.mu * (1.0 - root + sigma * t) - tau * t);
}

}  // namespace psa
