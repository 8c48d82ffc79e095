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

#include "psa/oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace psa {
namespace {

double PosteriorFromLogLikelihoods(double log_l0, double log_l1) {
  // Below this both pmf values are zero as doubles.
  const double floor = std::log(std::numeric_limits<double>::denorm_min());
  if (!(log_l0 > floor) && !(log_l1 > floor)) {
    throw std::range_error("both likelihoods underflow; s is outside the numeric support");
  }
  // p = l0 / (l0 + l1) = 1 / (1 + exp(log_l1 - log_l0))
  return 1.0 / (1.0 + std::exp(log_l1 - log_l0));
}

}  // namespace

AdjacentPair::AdjacentPair(std::vector<int64_t> d0, std::vector<int64_t> d1)
    : d0_(std::move(d0)), d1_(std::move(d1)) {
  if (d0_.empty() || d0_.size() != d1_.size()) {
    throw std::invalid_argument("adjacent databases must be non-empty and of equal length");
  }
  int differing = 0;
  for (size_t i = 0; i < d0_.size(); ++i) {
    differing += d0_[i] != d1_[i];
    sum0_ += d0_[i];
    sum1_ += d1_[i];
  }
  if (differing != 1) {
    throw std::invalid_argument("adjacent databases must differ in exactly one entry");
  }
}

ExperimentOutput RunExp1(const AdjacentPair& pair, double mu_user, RngStream& rng) {
  const SkellamParams noise{mu_user};
  ExperimentOutput out;
  out.b = rng.Bernoulli(0.5) ? 1 : 0;
  out.x = pair.d(out.b);
  for (auto& xi : out.x) {
    xi += SampleSkellam(noise, rng);
    out.s += xi;
  }
  return out;
}

double BiasP(int64_t s, const AdjacentPair& pair, double mu_user, int64_t n) {
  const SkellamParams aggregate{static_cast<double>(n) * mu_user};
  return PosteriorFromLogLikelihoods(SkellamLogPmf(s - pair.sum0(), aggregate),
                                     SkellamLogPmf(s - pair.sum1(), aggregate));
}

ConditionalNoiseSampler::ConditionalNoiseSampler(double mu_user, int64_t n)
    : mu_user_(mu_user), n_(n) {
  if (!(mu_user > 0)) throw std::invalid_argument("mu_user must be positive");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  tables_.resize(static_cast<size_t>(n));
}

SkellamLogPmfTable& ConditionalNoiseSampler::Table(int64_t terms) {
  auto& slot = tables_[static_cast<size_t>(terms - 1)];
  if (!slot) {
    const double mu = static_cast<double>(terms) * mu_user_;
    slot = std::make_unique<SkellamLogPmfTable>(
        mu, static_cast<int64_t>(std::ceil(40 * std::sqrt(mu))) + 64);
  }
  return *slot;
}

std::vector<double> ConditionalNoiseSampler::ConditionalPmf(int64_t i, int64_t y,
                                                            int64_t* lo) {
  if (i < 1 || i >= n_) throw std::invalid_argument("conditional index out of range");
  const int64_t radius =
      static_cast<int64_t>(std::ceil(20 * std::sqrt(mu_user_))) + (y < 0 ? -y : y);
  *lo = -radius;
  SkellamLogPmfTable& single = Table(1);
  SkellamLogPmfTable& rest = Table(n_ - i);
  std::vector<double> w(static_cast<size_t>(2 * radius + 1));
  double max_log = -std::numeric_limits<double>::infinity();
  for (int64_t e = -radius; e <= radius; ++e) {
    const double lw = single(e) + rest(y - e);
    w[e + radius] = lw;
    max_log = std::max(max_log, lw);
  }
  if (!std::isfinite(max_log)) {
    throw std::range_error("conditional support exhausted");
  }
  double total = 0;
  for (auto& v : w) {
    v = std::exp(v - max_log);
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

std::vector<int64_t> ConditionalNoiseSampler::Sample(int64_t y, RngStream& rng) {
  std::vector<int64_t> e;
  e.reserve(static_cast<size_t>(n_));
  int64_t remaining = y;
  for (int64_t i = 1; i < n_; ++i) {
    int64_t lo = 0;
    const auto pmf = ConditionalPmf(i, remaining, &lo);
    const double u = rng.Uniform();
    double cdf = 0;
    size_t idx = 0;
    for (; idx + 1 < pmf.size(); ++idx) {
      cdf += pmf[idx];
      if (u < cdf) break;
    }
    const int64_t ei = lo + static_cast<int64_t>(idx);
    e.push_back(ei);
    remaining -= ei;
  }
  e.push_back(remaining);
  return e;
}

std::vector<int64_t> ConditionalNoiseSample(int64_t s, int b, const AdjacentPair& pair,
                                            double mu_user, int64_t n, RngStream& rng) {
  ConditionalNoiseSampler sampler(mu_user, n);
  return sampler.Sample(s - (b == 0 ? pair.sum0() : pair.sum1()), rng);
}

ExperimentOutput RunExp2(const AdjacentPair& pair, ConditionalNoiseSampler& sampler,
                         RngStream& rng) {
  if (static_cast<int64_t>(pair.size()) != sampler.n()) {
    throw std::invalid_argument("sampler size does not match the databases");
  }
  // Only s leaves this scope.
  const int64_t s = [&] { return RunExp1(pair, sampler.mu_user(), rng).s; }();

  ExperimentOutput out;
  out.s = s;
  const double p = PosteriorFromLogLikelihoods(sampler.AggregateLogPmf(s - pair.sum0()),
                                               sampler.AggregateLogPmf(s - pair.sum1()));
  out.b = rng.Uniform() < p ? 0 : 1;
  const auto e = sampler.Sample(s - (out.b == 0 ? pair.sum0() : pair.sum1()), rng);
  out.x = pair.d(out.b);
  for (size_t i = 0; i < out.x.size(); ++i) out.x[i] += e[i];
  return out;
}

ExperimentOutput RunExp2(const AdjacentPair& pair, double mu_user, int64_t n,
                         RngStream& rng) {
  ConditionalNoiseSampler sampler(mu_user, n);
  return RunExp2(pair, sampler, rng);
}

}  // namespace psa
