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

#include "psa/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace psa {
namespace {

constexpr uint64_t kKeyStreamBase = uint64_t{1} << 62;

std::string_view SweepName(SweepKind s) {
  switch (s) {
    case SweepKind::kDelta:
      return "delta";
    case SweepKind::kGamma:
      return "gamma";
    case SweepKind::kNone:
      break;
  }
  return "none";
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int ResolveThreads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

// Runs body(r) for r in [0, count) across worker threads. Each r writes only
// its own output slot, so the result does not depend on scheduling.
template <typename Body>
void ParallelFor(int64_t count, int threads, Body body) {
  const int64_t workers = std::min<int64_t>(ResolveThreads(threads), std::max<int64_t>(count, 1));
  if (workers <= 1) {
    for (int64_t r = 0; r < count; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  for (int64_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int64_t r = w; r < count; r += workers) body(r);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<int64_t> MakeData(const ExperimentConfig& c, RngStream& rng) {
  const auto n = static_cast<size_t>(c.params.n_users);
  switch (c.data) {
    case DataKind::kZeros:
      return std::vector<int64_t>(n, 0);
    case DataKind::kFixed:
      return c.fixed_data;
    case DataKind::kUniformInRange: {
      std::vector<int64_t> d(n);
      const auto width = static_cast<uint64_t>(2 * c.m + 1);
      for (auto& v : d) v = static_cast<int64_t>(rng.UniformBelow(width)) - c.m;
      return d;
    }
  }
  return {};
}

struct CryptoContext {
  PsaParams params;
  KeyMaterial keys;
  TimeTagSet tags;
};

CryptoContext MakeCryptoContext(const ExperimentConfig& c, const CalibratedNoise& noise,
                                size_t point) {
  PsaParams p;
  p.kappa = 16;
  p.lambda = std::max<int64_t>(1, std::min(c.full_crypto_repeats, c.repeats));
  p.n = c.params.n_users;
  p.m = c.m;
  p.gamma = c.params.gamma;
  p.noise = noise.per_user;
  p.q = ChooseModulus(p.m, p.n, static_cast<double>(p.n) * noise.per_user.Variance());
  RngStream rng(c.seed, kKeyStreamBase + point);
  auto [keys, tags] = Setup(p, rng);
  return CryptoContext{p, std::move(keys), std::move(tags)};
}

ErrorPoint RunPoint(const ExperimentConfig& c, const MechanismParams& p, double sweep_value,
                    size_t point) {
  const CalibratedNoise noise = CalibrateMechanism(c.mechanism, p);
  const int64_t n = p.n_users;
  const auto honest =
      static_cast<int64_t>(std::llround(c.honest_fraction * static_cast<double>(n)));
  std::optional<CryptoContext> crypto;
  if (c.full_crypto) crypto = MakeCryptoContext(c, noise, point);

  std::vector<int64_t> errors(static_cast<size_t>(c.repeats));
  ParallelFor(c.repeats, c.threads, [&](int64_t r) {
    RngStream rng(c.seed, (static_cast<uint64_t>(point) << 32) | static_cast<uint64_t>(r));
    const std::vector<int64_t> data = MakeData(c, rng);
    std::vector<int64_t> shares(static_cast<size_t>(n), 0);
    int64_t total = 0;
    for (int64_t i = 0; i < honest; ++i) {
      shares[i] = SampleNoise(noise.per_user, rng);
      total += shares[i];
    }
    if (crypto && r < crypto->params.lambda) {
      const EpochResult e = EndToEndEpoch(crypto->params, crypto->keys, crypto->tags,
                                          static_cast<uint32_t>(r), data, shares);
      if (e.decrypted - e.true_sum != total) {
        throw std::logic_error("full-crypto path disagrees with the noise-only path");
      }
    }
    errors[static_cast<size_t>(r)] = total;
  });

  ErrorPoint out;
  out.sweep_value = sweep_value;
  out.repeats = c.repeats;
  out.alpha = AccuracyAlpha(p);
  double sum_abs = 0, sum = 0, sum_sq = 0;
  int64_t tail = 0;
  for (int64_t e : errors) {
    const auto d = static_cast<double>(e);
    sum_abs += std::fabs(d);
    sum += d;
    sum_sq += d * d;
    tail += std::fabs(d) > out.alpha;
  }
  const auto reps = static_cast<double>(c.repeats);
  out.mean_abs_error = sum_abs / reps;
  out.tail_frequency = static_cast<double>(tail) / reps;
  if (c.repeats > 1) {
    const double mean = sum / reps;
    out.stddev = std::sqrt(std::max(0.0, (sum_sq - reps * mean * mean) / (reps - 1)));
  }
  return out;
}

}  // namespace

void ExperimentConfig::Validate() const {
  params.Validate();
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (sweep == SweepKind::kDelta && delta_sweep.empty()) {
    throw std::invalid_argument("delta sweep selected with an empty delta list");
  }
  if (sweep == SweepKind::kGamma && gamma_sweep.empty()) {
    throw std::invalid_argument("gamma sweep selected with an empty gamma list");
  }
  if (data == DataKind::kFixed &&
      static_cast<int64_t>(fixed_data.size()) != params.n_users) {
    throw std::invalid_argument("fixed data must hold one value per user");
  }
  for (int64_t v : fixed_data) {
    if (v < -m || v > m) throw std::invalid_argument("fixed data outside [-m, m]");
  }
  if (!(honest_fraction >= 0 && honest_fraction <= 1)) {
    throw std::invalid_argument("honest_fraction must lie in [0,1]");
  }
  if (mechanism == NoiseKind::kDiscreteGaussian) {
    throw std::invalid_argument("discrete Gaussian is not a DP mechanism here");
  }
}

ExperimentConfig ExperimentConfig::FromJson(const nlohmann::json& j) {
  ExperimentConfig c;
  c.mechanism = ParseNoiseKind(j.value("mechanism", std::string("skellam")));
  c.params.epsilon = j.value("epsilon", c.params.epsilon);
  c.params.delta = j.value("delta", c.params.delta);
  c.params.beta = j.value("beta", c.params.beta);
  c.params.gamma = j.value("gamma", c.params.gamma);
  c.params.sensitivity = j.value("sensitivity", c.params.sensitivity);
  c.params.n_users = j.value("n", c.params.n_users);
  c.params.lambda_queries = j.value("lambda_queries", c.params.lambda_queries);
  c.repeats = j.value("repeats", c.repeats);
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    if (s.is_string() && s.get<std::string>() == "none") {
      c.sweep = SweepKind::kNone;
    } else if (s.contains("delta_sweep")) {
      c.sweep = SweepKind::kDelta;
      c.delta_sweep = s.at("delta_sweep").get<std::vector<double>>();
    } else if (s.contains("gamma_sweep")) {
      c.sweep = SweepKind::kGamma;
      c.gamma_sweep = s.at("gamma_sweep").get<std::vector<double>>();
    } else {
      throw std::invalid_argument("sweep must be \"none\", {delta_sweep} or {gamma_sweep}");
    }
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    if (d.is_array()) {
      c.data = DataKind::kFixed;
      c.fixed_data = d.get<std::vector<int64_t>>();
    } else if (d == "zeros") {
      c.data = DataKind::kZeros;
    } else if (d == "uniform_in_range") {
      c.data = DataKind::kUniformInRange;
    } else {
      throw std::invalid_argument("data must be \"zeros\", \"uniform_in_range\" or a list");
    }
  }
  c.m = j.value("m", c.m);
  c.honest_fraction = j.value("honest_fraction", c.honest_fraction);
  c.seed = j.value("seed", c.seed);
  c.full_crypto = j.value("full_crypto", c.full_crypto);
  c.full_crypto_repeats = j.value("full_crypto_repeats", c.full_crypto_repeats);
  c.threads = j.value("threads", c.threads);
  c.Validate();
  return c;
}

nlohmann::json ExperimentConfig::ToJson() const {
  nlohmann::json j;
  j["mechanism"] = std::string(NoiseKindName(mechanism));
  j["epsilon"] = params.epsilon;
  j["delta"] = params.delta;
  j["beta"] = params.beta;
  j["gamma"] = params.gamma;
  j["sensitivity"] = params.sensitivity;
  j["n"] = params.n_users;
  j["lambda_queries"] = params.lambda_queries;
  j["repeats"] = repeats;
  switch (sweep) {
    case SweepKind::kNone:
      j["sweep"] = "none";
      break;
    case SweepKind::kDelta:
      j["sweep"] = {{"delta_sweep", delta_sweep}};
      break;
    case SweepKind::kGamma:
      j["sweep"] = {{"gamma_sweep", gamma_sweep}};
      break;
  }
  switch (data) {
    case DataKind::kZeros:
      j["data"] = "zeros";
      break;
    case DataKind::kUniformInRange:
      j["data"] = "uniform_in_range";
      break;
    case DataKind::kFixed:
      j["data"] = fixed_data;
      break;
  }
  j["m"] = m;
  j["honest_fraction"] = honest_fraction;
  j["seed"] = seed;
  j["full_crypto"] = full_crypto;
  j["full_crypto_repeats"] = full_crypto_repeats;
  j["threads"] = threads;
  return j;
}

std::string ErrorReport::ToCsv() const {
  std::string out(sweep == SweepKind::kNone ? "sweep" : SweepName(sweep));
  out += ",mechanism,mean_abs_error,stddev,tail_frequency,alpha,repeats\n";
  for (const auto& p : points) {
    out += FormatDouble(p.sweep_value) + "," + std::string(NoiseKindName(mechanism)) + "," +
           FormatDouble(p.mean_abs_error) + "," + FormatDouble(p.stddev) + "," +
           FormatDouble(p.tail_frequency) + "," + FormatDouble(p.alpha) + "," +
           std::to_string(p.repeats) + "\n";
  }
  return out;
}

ErrorReport RunAccuracyExperiment(const ExperimentConfig& config) {
  config.Validate();
  ErrorReport report;
  report.mechanism = config.mechanism;
  report.sweep = config.sweep;
  switch (config.sweep) {
    case SweepKind::kNone:
      report.points.push_back(RunPoint(config, config.params, 0.0, 0));
      break;
    case SweepKind::kDelta:
      for (size_t i = 0; i < config.delta_sweep.size(); ++i) {
        MechanismParams p = config.params;
        p.delta = config.delta_sweep[i];
        report.points.push_back(RunPoint(config, p, p.delta, i));
      }
      break;
    case SweepKind::kGamma:
      for (size_t i = 0; i < config.gamma_sweep.size(); ++i) {
        MechanismParams p = config.params;
        p.gamma = config.gamma_sweep[i];
        report.points.push_back(RunPoint(config, p, p.gamma, i));
      }
      break;
  }
  return report;
}

EpochResult EndToEndEpoch(const PsaParams& params, const KeyMaterial& keys,
                          const TimeTagSet& tags, uint32_t epoch,
                          const std::vector<int64_t>& data,
                          const std::vector<int64_t>& noise) {
  if (static_cast<int64_t>(data.size()) != params.n ||
      static_cast<int64_t>(noise.size()) != params.n) {
    throw std::invalid_argument("need one data value and one noise value per user");
  }
  EpochResult out;
  out.noise = noise;
  EpochAggregator aggregator(keys.aggregator_key, tags, params.n);
  for (int64_t i = 0; i < params.n; ++i) {
    out.true_sum += data[i];
    Ciphertext c = PsaEncrypt(static_cast<uint32_t>(i + 1), epoch, keys.shares[i],
                              tags.at(epoch), data[i], noise[i], params.m);
    const SubmitStatus status = aggregator.Submit(c);
    if (status != SubmitStatus::kAccepted) {
      throw std::logic_error(std::string("ciphertext rejected: ") + SubmitStatusName(status));
    }
    out.ciphers.push_back(std::move(c));
  }
  out.decrypted = aggregator.Aggregate(epoch);
  return out;
}

EpochResult EndToEndEpoch(const PsaParams& params, const KeyMaterial& keys,
                          const TimeTagSet& tags, uint32_t epoch,
                          const std::vector<int64_t>& data, RngStream& rng,
                          const std::vector<bool>& honest) {
  if (!honest.empty() && static_cast<int64_t>(honest.size()) != params.n) {
    throw std::invalid_argument("honest mask must hold one flag per user");
  }
  std::vector<int64_t> noise(static_cast<size_t>(params.n), 0);
  for (size_t i = 0; i < noise.size(); ++i) {
    if (honest.empty() || honest[i]) noise[i] = SampleNoise(params.noise, rng);
  }
  return EndToEndEpoch(params, keys, tags, epoch, data, noise);
}

std::vector<double> Figure1DeltaGrid() {
  std::vector<double> g;
  for (int e = 1; e <= 8; ++e) g.push_back(std::pow(10.0, -e));
  return g;
}

std::vector<double> Figure1GammaGrid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

namespace {

std::string Figure1Csv(const char* column, const std::vector<Figure1Row>& rows) {
  std::string out = std::string(column) + ",geometric,skellam,binomial\n";
  for (const auto& r : rows) {
    out += FormatDouble(r.sweep_value) + "," + FormatDouble(r.geometric) + "," +
           FormatDouble(r.skellam) + "," + FormatDouble(r.binomial) + "\n";
  }
  return out;
}

std::vector<Figure1Row> Figure1Panel(uint64_t seed, int64_t n, int64_t repeats, int threads,
                                     SweepKind sweep, const std::vector<double>& grid) {
  std::vector<Figure1Row> rows(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) rows[i].sweep_value = grid[i];
  for (NoiseKind kind : {NoiseKind::kGeometric, NoiseKind::kSkellam, NoiseKind::kBinomial}) {
    ExperimentConfig c;
    c.mechanism = kind;
    c.params.epsilon = 0.1;
    c.params.delta = 1e-5;
    c.params.gamma = 1.0;
    c.params.sensitivity = 1;
    c.params.n_users = n;
    c.repeats = repeats;
    c.sweep = sweep;
    (sweep == SweepKind::kDelta ? c.delta_sweep : c.gamma_sweep) = grid;
    c.seed = seed;
    c.threads = threads;
    const ErrorReport report = RunAccuracyExperiment(c);
    for (size_t i = 0; i < grid.size(); ++i) {
      const double e = report.points[i].mean_abs_error;
      switch (kind) {
        case NoiseKind::kGeometric:
          rows[i].geometric = e;
          break;
        case NoiseKind::kSkellam:
          rows[i].skellam = e;
          break;
        default:
          rows[i].binomial = e;
          break;
      }
    }
  }
  return rows;
}

}  // namespace

std::string Figure1Tables::DeltaCsv() const { return Figure1Csv("delta", by_delta); }
std::string Figure1Tables::GammaCsv() const { return Figure1Csv("gamma", by_gamma); }

Figure1Tables ReproduceFigure1(uint64_t seed, int64_t n, int64_t repeats, int threads) {
  Figure1Tables t;
  t.by_delta = Figure1Panel(seed, n, repeats, threads, SweepKind::kDelta, Figure1DeltaGrid());
  t.by_gamma = Figure1Panel(seed, n, repeats, threads, SweepKind::kGamma, Figure1GammaGrid());
  return t;
}

}  // namespace psa
