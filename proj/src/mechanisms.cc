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

#include "psa/mechanisms.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace psa {
namespace {

void Require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

int64_t CeilToEven(double x) {
  auto v = static_cast<int64_t>(std::ceil(x));
  if (v % 2 != 0) ++v;
  return v < 2 ? 2 : v;
}

MechanismParams PerQuery(const MechanismParams& p) {
  MechanismParams q = p;
  q.epsilon = p.epsilon / static_cast<double>(p.lambda_queries);
  q.lambda_queries = 1;
  return q;
}

}  // namespace

void MechanismParams::Validate() const {
  Require(epsilon > 0 && std::isfinite(epsilon), "epsilon must be positive");
  Require(delta > 0 && delta < 1, "delta must lie in (0,1)");
  Require(beta > 0 && beta < 1, "beta must lie in (0,1)");
  Require(gamma > 0 && gamma <= 1, "gamma must lie in (0,1]");
  Require(sensitivity >= 1, "sensitivity must be >= 1");
  Require(n_users >= 1, "n_users must be >= 1");
  Require(lambda_queries >= 1, "lambda_queries must be >= 1");
}

double SkellamDenominator(double x) {
  if (std::fabs(x) < 1e-3) {
    // sum_{m>=1} x^{2m} (2m-1)/(2m)!
    const double x2 = x * x;
    return x2 * (0.5 + x2 * (1.0 / 8 + x2 * (1.0 / 144 + x2 * (7.0 / 40320))));
  }
  return 1.0 - std::cosh(x) + x * std::sinh(x);
}

double CalibrateSkellamVariance(const MechanismParams& p) {
  p.Validate();
  const double x = p.epsilon / static_cast<double>(p.sensitivity);
  const double denominator = SkellamDenominator(x);
  if (!(denominator > 0)) {
    throw std::domain_error("Skellam calibration denominator is not positive");
  }
  return (std::log(1 / p.delta) + p.epsilon) / denominator;
}

double SkellamVarianceUpperBound(const MechanismParams& p) {
  p.Validate();
  const double r = static_cast<double>(p.sensitivity) / p.epsilon;
  return 2 * r * r * (std::log(1 / p.delta) + p.epsilon);
}

CalibratedNoise SplitPerUser(double mu, double gamma, int64_t n) {
  Require(mu > 0, "mu must be positive");
  Require(gamma > 0 && gamma <= 1, "gamma must lie in (0,1]");
  Require(n >= 1, "n must be >= 1");
  CalibratedNoise out;
  out.kind = NoiseKind::kSkellam;
  out.total_variance = mu;
  out.per_user_variance = mu / (gamma * static_cast<double>(n));
  out.per_user = NoiseSpec(SkellamParams{out.per_user_variance});
  return out;
}

double AccuracyAlpha(const MechanismParams& p) {
  p.Validate();
  return static_cast<double>(p.sensitivity) / p.epsilon *
         ((std::log(1 / p.delta) + p.epsilon) / p.gamma + std::log(2 / p.beta));
}

double ComposeOverQueries(double mu_single, int64_t lambda) {
  Require(lambda >= 1, "lambda must be >= 1");
  const auto l = static_cast<double>(lambda);
  return l * l * mu_single;
}

SecurityEpsilon EpsilonFromSecurity(int64_t w, double gamma, int64_t n, int64_t kappa,
                                    int64_t s, double delta) {
  Require(w >= 1 && n >= 1 && kappa >= 1 && s >= 1, "parameters must be positive");
  Require(gamma > 0 && gamma <= 1, "gamma must lie in (0,1]");
  Require(delta > 0 && delta < 1, "delta must lie in (0,1)");
  const double w2 = static_cast<double>(w) * static_cast<double>(w);
  const double c = gamma * static_cast<double>(n) * static_cast<double>(kappa) *
                   static_cast<double>(s) * static_cast<double>(s);
  const double log_inv_delta = std::log(1 / delta);
  SecurityEpsilon out;
  out.epsilon = (w2 + std::sqrt(w2 * w2 + 8 * w2 * log_inv_delta * c)) / (4 * c);
  out.lower = std::sqrt(w2 * log_inv_delta / (2 * c));
  out.upper = out.lower + w2 / (2 * c);
  return out;
}

double GeometricAlpha(const MechanismParams& p) {
  return std::exp(-p.epsilon / static_cast<double>(p.sensitivity));
}

double GeometricActivation(const MechanismParams& p) {
  const double a = std::log(1 / p.delta) / (p.gamma * static_cast<double>(p.n_users));
  return a < 1 ? a : 1.0;
}

int64_t BinomialTotalTrials(const MechanismParams& p) {
  const auto s = static_cast<double>(p.sensitivity);
  return static_cast<int64_t>(
      std::ceil(64 * s * s * std::log(2 / p.delta) / (p.epsilon * p.epsilon)));
}

int64_t BinomialTrialsPerUser(const MechanismParams& p) {
  return CeilToEven(static_cast<double>(BinomialTotalTrials(p)) /
                    (p.gamma * static_cast<double>(p.n_users)));
}

CalibratedNoise CalibrateMechanism(NoiseKind kind, const MechanismParams& p) {
  p.Validate();
  const double honest = p.gamma * static_cast<double>(p.n_users);
  CalibratedNoise out;
  out.kind = kind;
  switch (kind) {
    case NoiseKind::kNone:
      return out;
    case NoiseKind::kSkellam: {
      MechanismParams single = p;
      single.lambda_queries = 1;
      const double mu = ComposeOverQueries(CalibrateSkellamVariance(single), p.lambda_queries);
      return SplitPerUser(mu, p.gamma, p.n_users);
    }
    case NoiseKind::kGeometric: {
      const MechanismParams q = PerQuery(p);
      GeometricParams g{GeometricAlpha(q), GeometricActivation(q)};
      out.per_user = NoiseSpec(g);
      out.per_user_variance = out.per_user.Variance();
      out.total_variance = out.per_user_variance * honest;
      return out;
    }
    case NoiseKind::kBinomial: {
      const MechanismParams q = PerQuery(p);
      out.per_user = NoiseSpec(BinomialParams{BinomialTrialsPerUser(q)});
      out.per_user_variance = out.per_user.Variance();
      out.total_variance = out.per_user_variance * honest;
      return out;
    }
    case NoiseKind::kDiscreteGaussian:
      throw std::invalid_argument(
          "discrete Gaussian noise has no DP calibration; use a PSA preset");
  }
  return out;
}

int64_t DistributedNoiseShare(const CalibratedNoise& noise, RngStream& rng) {
  if (noise.kind != noise.per_user.kind()) {
    throw std::invalid_argument("noise share requested from an uncalibrated spec");
  }
  return SampleNoise(noise.per_user, rng);
}

int64_t DistributedNoiseShare(NoiseKind kind, const MechanismParams& p, RngStream& rng) {
  return DistributedNoiseShare(CalibrateMechanism(kind, p), rng);
}

}  // namespace psa
