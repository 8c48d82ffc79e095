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

#ifndef PSA_HARNESS_H_
#define PSA_HARNESS_H_

// Accuracy experiments: n simulated users perturb their values with one of
// the distributed mechanisms, an aggregator decrypts the noisy sum, and the
// absolute error is summarized per sweep point.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psa/mechanisms.h"
#include "psa/scheme.h"

namespace psa {

enum class SweepKind { kNone, kDelta, kGamma };
enum class DataKind { kZeros, kUniformInRange, kFixed };

struct ExperimentConfig {
  NoiseKind mechanism = NoiseKind::kSkellam;
  MechanismParams params;
  int64_t repeats = 1000;
  SweepKind sweep = SweepKind::kNone;
  std::vector<double> delta_sweep;
  std::vector<double> gamma_sweep;
  DataKind data = DataKind::kZeros;
  std::vector<int64_t> fixed_data;
  int64_t m = 1;
  // Fraction of users that actually add noise. The accuracy bound's worst
  // case is 1: every user adds its share even though only gamma*n are
  // guaranteed honest.
  double honest_fraction = 1.0;
  uint64_t seed = 1;
  // Route this many repeats per sweep point through full encryption and
  // check decrypted - true == sum of noise.
  bool full_crypto = false;
  int64_t full_crypto_repeats = 10;
  int threads = 0;  // 0: hardware concurrency

  void Validate() const;
  static ExperimentConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

struct ErrorPoint {
  double sweep_value = 0;
  double mean_abs_error = 0;
  double stddev = 0;  // of the signed error
  // Fraction of repeats with |error| above the Skellam accuracy bound.
  double tail_frequency = 0;
  double alpha = 0;
  int64_t repeats = 0;
};

struct ErrorReport {
  NoiseKind mechanism = NoiseKind::kNone;
  SweepKind sweep = SweepKind::kNone;
  std::vector<ErrorPoint> points;

  std::string ToCsv() const;
};

ErrorReport RunAccuracyExperiment(const ExperimentConfig& config);

struct EpochResult {
  int64_t true_sum = 0;
  int64_t decrypted = 0;
  std::vector<int64_t> noise;
  std::vector<Ciphertext> ciphers;
};

// Encrypts data[i] + noise[i] for every user, aggregates and decrypts one
// epoch. Every ciphertext goes through an EpochAggregator.
EpochResult EndToEndEpoch(const PsaParams& params, const KeyMaterial& keys,
                          const TimeTagSet& tags, uint32_t epoch,
                          const std::vector<int64_t>& data,
                          const std::vector<int64_t>& noise);
// Samples each honest user's noise from params.noise; users with
// honest[i] == false add none. An empty mask means everyone is honest.
EpochResult EndToEndEpoch(const PsaParams& params, const KeyMaterial& keys,
                          const TimeTagSet& tags, uint32_t epoch,
                          const std::vector<int64_t>& data, RngStream& rng,
                          const std::vector<bool>& honest = {});

struct Figure1Row {
  double sweep_value = 0;
  double geometric = 0;
  double skellam = 0;
  double binomial = 0;
};

struct Figure1Tables {
  std::vector<Figure1Row> by_delta;  // gamma = 1
  std::vector<Figure1Row> by_gamma;  // delta = 1e-5

  std::string DeltaCsv() const;
  std::string GammaCsv() const;
};

std::vector<double> Figure1DeltaGrid();
std::vector<double> Figure1GammaGrid();

// epsilon = 0.1, S = 1. Paper scale is n = 1000 users and 1000 repeats.
Figure1Tables ReproduceFigure1(uint64_t seed, int64_t n = 1000, int64_t repeats = 1000,
                               int threads = 0);

}  // namespace psa

#endif  // PSA_HARNESS_H_
