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

#ifndef PSA_MECHANISMS_H_
#define PSA_MECHANISMS_H_

// Differential-privacy calibration for the three distributed discrete
// mechanisms (Skellam, geometric, binomial) and the per-user noise split.

#include <cstdint>

#include "psa/dist.h"

namespace psa {

struct MechanismParams {
  double epsilon = 0.1;
  double delta = 1e-5;
  double beta = 0.05;
  // A-priori lower bound on the fraction of uncompromised users.
  double gamma = 1.0;
  int64_t sensitivity = 1;
  int64_t n_users = 1;
  int64_t lambda_queries = 1;

  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
};

// Per-user noise assignment for one query.
struct CalibratedNoise {
  NoiseKind kind = NoiseKind::kNone;
  // Variance of the aggregate noise when exactly gamma*n users contribute.
  double total_variance = 0.0;
  // Variance of one user's share. For Skellam, total_variance / (gamma*n).
  double per_user_variance = 0.0;
  NoiseSpec per_user;
};

// 1 - cosh(x) + x sinh(x), with the Taylor series near zero.
double SkellamDenominator(double x);

// Variance of Sk(mu) noise that makes one query (epsilon, delta)-DP.
double CalibrateSkellamVariance(const MechanismParams& p);
// 2 (S/epsilon)^2 (log(1/delta) + epsilon); always above the calibrated mu.
double SkellamVarianceUpperBound(const MechanismParams& p);

CalibratedNoise SplitPerUser(double mu, double gamma, int64_t n);

// Error alpha such that |noise| <= alpha with probability >= 1 - beta.
double AccuracyAlpha(const MechanismParams& p);

// Variance needed for lambda sequential queries given a single-query mu.
double ComposeOverQueries(double mu_single, int64_t lambda);

struct SecurityEpsilon {
  double epsilon;
  double lower;
  double upper;
};

// Largest epsilon achievable when every honest user's Skellam share is
// fixed by the lattice security requirement 4 lambda^2 kappa s^2. Data lies
// in {-w/2, ..., w/2}.
SecurityEpsilon EpsilonFromSecurity(int64_t w, double gamma, int64_t n, int64_t kappa,
                                    int64_t s, double delta);

// Two-sided geometric alpha = exp(-epsilon / S).
double GeometricAlpha(const MechanismParams& p);
// Probability that a user emits geometric noise: min(1, log(1/delta)/(gamma n)).
double GeometricActivation(const MechanismParams& p);
// ceil(64 S^2 log(2/delta) / epsilon^2).
int64_t BinomialTotalTrials(const MechanismParams& p);
// N_total / (gamma n) rounded up to an even count (at least 2).
int64_t BinomialTrialsPerUser(const MechanismParams& p);

// Calibrates the given mechanism for lambda_queries sequential queries.
// Skellam scales the single-query variance by lambda^2; geometric and
// binomial spend epsilon/lambda per query.
CalibratedNoise CalibrateMechanism(NoiseKind kind, const MechanismParams& p);

// One user's noise contribution.
int64_t DistributedNoiseShare(const CalibratedNoise& noise, RngStream& rng);
int64_t DistributedNoiseShare(NoiseKind kind, const MechanismParams& p, RngStream& rng);

}  // namespace psa

#endif  // PSA_MECHANISMS_H_
