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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "psa/dist.h"
#include "psa/harness.h"
#include "psa/mechanisms.h"
#include "psa/net.h"
#include "psa/oracles.h"
#include "psa/scheme.h"
#include "test_util.h"

namespace {

using namespace psa;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

unsigned Workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs body(chunk, begin, end) over [0, total) split into Workers() chunks.
void ParallelChunks(int64_t total, const std::function<void(unsigned, int64_t, int64_t)>& body) {
  const unsigned w = Workers();
  std::vector<std::thread> threads;
  for (unsigned c = 0; c < w; ++c) {
    const int64_t b = total * c / w, e = total * (c + 1) / w;
    threads.emplace_back(body, c, b, e);
  }
  for (auto& t : threads) t.join();
}

Outcome Exactness() {
  RngStream rng(101, 0);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    PsaParams p;
    p.n = 1 + static_cast<int64_t>(rng.UniformBelow(100));
    p.kappa = 1 + static_cast<int64_t>(rng.UniformBelow(64));
    p.m = 1 + static_cast<int64_t>(rng.UniformBelow(1000));
    p.lambda = 1;
    p.q = ChooseModulus(p.m, p.n, 0);
    auto [keys, tags] = Setup(p, rng);
    std::vector<Ciphertext> cs;
    int64_t truth = 0;
    for (int64_t i = 0; i < p.n; ++i) {
      const int64_t x = static_cast<int64_t>(rng.UniformBelow(2 * p.m + 1)) - p.m;
      truth += x;
      cs.push_back(PsaEncrypt(static_cast<uint32_t>(i + 1), 0, keys.shares[i], tags.at(0), x, 0, p.m));
    }
    failures += PsaDecrypt(keys.aggregator_key, tags.at(0), cs, p.n) != truth;
  }
  return {failures == 0, Fmt("%d/1000 failures", failures)};
}

Outcome KeyCancellation() {
  RngStream rng(102, 0);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    PsaParams p;
    p.n = 1 + static_cast<int64_t>(rng.UniformBelow(100));
    p.kappa = 1 + static_cast<int64_t>(rng.UniformBelow(64));
    p.lambda = 1 + static_cast<int64_t>(rng.UniformBelow(4));
    // Random prime modulus anywhere from tiny to 63 bits.
    const int bits = 3 + static_cast<int>(rng.UniformBelow(60));
    p.q = Modulus(NextPrime((uint64_t{1} << (bits - 1)) + rng.UniformBelow(uint64_t{1} << (bits - 1))));
    p.m = 0;
    auto [keys, tags] = Setup(p, rng);
    for (const auto& t : tags.tags) {
      RingElement acc = InnerProduct(t, keys.aggregator_key);
      for (const auto& s : keys.shares) acc += InnerProduct(t, s);
      failures += acc.lift() != 0;
    }
  }
  return {failures == 0, Fmt("%d failures over 1000 (keys, tags) draws", failures)};
}

Outcome CalibrationVsBound() {
  RngStream rng(103, 0);
  int violations = 0;
  int64_t checked = 0;
  double worst = -INFINITY;
  for (double eps : {0.1, 0.5, 1.0}) {
    for (double delta : {1e-3, 1e-5}) {
      for (int64_t sens : {1, 2}) {
        MechanismParams p;
        p.epsilon = eps;
        p.delta = delta;
        p.sensitivity = sens;
        const double mu = CalibrateSkellamVariance(p);
        if (!(mu < SkellamVarianceUpperBound(p) * (1 + 1e-12))) ++violations;
        const double kmax = std::sinh(eps / static_cast<double>(sens)) * mu - static_cast<double>(sens);
        SkellamLogPmfTable table(mu, static_cast<int64_t>(kmax) + sens + 1);
        for (int i = 0; i < 1000; ++i) {
          // Log-uniform on [1, kmax + 1], shifted to start at 0.
          const double u = std::exp(rng.Uniform() * std::log(kmax + 1));
          const auto k = std::min(static_cast<int64_t>(u) - 1, static_cast<int64_t>(kmax));
          const double log_ratio = table(std::max<int64_t>(k, 0)) - table(std::max<int64_t>(k, 0) + sens);
          worst = std::max(worst, log_ratio - eps);
          if (!(log_ratio <= eps + 1e-12 * eps)) ++violations;
          ++checked;
        }
      }
    }
  }
  return {violations == 0,
          Fmt("%d violations over %lld ratio checks; max log-ratio - eps = %.3g", violations,
              static_cast<long long>(checked), worst)};
}

Outcome Accuracy() {
  ExperimentConfig c;
  c.mechanism = NoiseKind::kSkellam;
  c.params.epsilon = 0.1;
  c.params.delta = 1e-5;
  c.params.beta = 0.05;
  c.params.gamma = 1.0;
  c.params.sensitivity = 1;
  c.params.n_users = 1000;
  c.repeats = 10000;
  c.seed = 104;
  const ErrorPoint pt = RunAccuracyExperiment(c).points.at(0);
  return {pt.tail_frequency <= 0.05 && pt.repeats == 10000,
          Fmt("alpha = %.4f, tail frequency %.5f over %lld aggregates (beta 0.05)", pt.alpha,
              pt.tail_frequency, static_cast<long long>(pt.repeats))};
}

Outcome Figure1() {
  const Figure1Tables t = ReproduceFigure1(105, 1000, 1000);
  double min_sg = INFINITY, max_sg = -INFINITY, min_bs = INFINITY;
  bool ok = true;
  for (const auto* rows : {&t.by_delta, &t.by_gamma}) {
    for (const auto& r : *rows) {
      const double sg = r.skellam / r.geometric, bs = r.binomial / r.skellam;
      min_sg = std::min(min_sg, sg);
      max_sg = std::max(max_sg, sg);
      min_bs = std::min(min_bs, bs);
      ok &= sg >= 0.5 && sg <= 2.0 && bs >= 2.0;
    }
  }
  ok &= t.by_delta.size() == 8 && t.by_gamma.size() == 10;
  return {ok, Fmt("skellam/geometric in [%.3f, %.3f], binomial/skellam >= %.3f over %zu points",
                  min_sg, max_sg, min_bs, t.by_delta.size() + t.by_gamma.size())};
}

Outcome Reproducibility() {
  const int64_t trials = 100000;
  std::vector<int64_t> sums(trials);
  ParallelChunks(trials, [&](unsigned c, int64_t b, int64_t e) {
    RngStream rng(106, c);
    for (int64_t t = b; t < e; ++t) {
      int64_t acc = 0;
      for (int i = 0; i < 100; ++i) acc += SampleSkellam({1.0}, rng);
      sums[t] = acc;
    }
  });
  const auto g = testing::ChiSquareGof(sums, [](int64_t k) { return SkellamPmf(k, {100.0}); }, -60, 60);
  return {g.p_value > 1e-4, Fmt("chi2 = %.2f, dof %d, p = %.4f", g.statistic, g.dof, g.p_value)};
}

Outcome Exp1VersusExp2() {
  const AdjacentPair pair({0, 0, 0}, {1, 0, 0});
  const double mu_user = 4.0;
  // 1e5 runs per side leave an expected sampling TV near 0.0105 for two
  // identical laws on this histogram, so use ten times that.
  const int64_t runs = 1000000;
  const unsigned w = Workers();
  auto key = [](int b, int64_t s) { return std::pair{b, std::clamp<int64_t>(s, -61, 61)}; };
  std::vector<std::map<std::pair<int, int64_t>, int64_t>> h1(w), h2(w), h1_small(w), h2_small(w);
  ParallelChunks(runs, [&](unsigned c, int64_t b, int64_t e) {
    RngStream r1(107, 2 * c), r2(107, 2 * c + 1);
    ConditionalNoiseSampler sampler(mu_user, 3);
    for (int64_t i = b; i < e; ++i) {
      const auto a = RunExp1(pair, mu_user, r1);
      const auto x = RunExp2(pair, sampler, r2);
      h1[c][key(a.b, a.s)]++;
      h2[c][key(x.b, x.s)]++;
      if (i - b < (e - b) / 10) {
        h1_small[c][key(a.b, a.s)]++;
        h2_small[c][key(x.b, x.s)]++;
      }
    }
  });
  auto tv = [](const std::vector<std::map<std::pair<int, int64_t>, int64_t>>& a,
               const std::vector<std::map<std::pair<int, int64_t>, int64_t>>& b) {
    std::map<std::pair<int, int64_t>, std::pair<double, double>> m;
    double na = 0, nb = 0;
    for (const auto& h : a) {
      for (const auto& [k, v] : h) {
        m[k].first += static_cast<double>(v);
        na += static_cast<double>(v);
      }
    }
    for (const auto& h : b) {
      for (const auto& [k, v] : h) {
        m[k].second += static_cast<double>(v);
        nb += static_cast<double>(v);
      }
    }
    double d = 0;
    for (const auto& [k, v] : m) d += std::abs(v.first / na - v.second / nb);
    return d / 2;
  };
  const double distance = tv(h1, h2);
  const double distance_small = tv(h1_small, h2_small);

  // Posterior sandwich with s drawn from the calibrated mechanism.
  MechanismParams mp;
  mp.epsilon = 0.1;
  mp.delta = 1e-5;
  const double mu = CalibrateSkellamVariance(mp);
  const double lo = 1 / (1 + std::exp(0.1)), hi = std::exp(0.1) / (1 + std::exp(0.1));
  RngStream rng(107, 1u << 20);
  int outside = 0;
  double pmin = 1, pmax = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto out = RunExp1(pair, mu / 3, rng);
    const double p = BiasP(out.s, pair, mu / 3, 3);
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
    outside += p < lo || p > hi;
  }
  return {distance <= 0.01 && outside == 0,
          Fmt("TV(b,s) = %.5f at %lld runs each (%.5f at %lld); p in [%.5f, %.5f] within "
              "[%.4f, %.4f], %d outside",
              distance, static_cast<long long>(runs), distance_small,
              static_cast<long long>(runs / 10), pmin, pmax, lo, hi, outside)};
}

Outcome TailBound() {
  std::ostringstream detail;
  bool ok = true;
  int point = 0;
  for (double sigma : {0.5, 1.0}) {
    for (bool tenth : {false, true}) {
      for (double mu : {10.0, 40.0}) {
        const double tau = tenth ? mu / 10 : 0.0;
        const double cut = sigma * mu + tau;
        const int64_t draws = 1000000;
        std::vector<int64_t> hits(Workers(), 0);
        ParallelChunks(draws, [&](unsigned c, int64_t b, int64_t e) {
          RngStream rng(108, static_cast<uint64_t>(point) * 1024 + c);
          for (int64_t i = b; i < e; ++i) hits[c] += SampleSkellam({mu}, rng) > cut;
        });
        const double freq =
            static_cast<double>(std::accumulate(hits.begin(), hits.end(), int64_t{0})) / draws;
        const double bound = SkellamTailBound(sigma, tau, {mu});
        ok &= freq <= bound;
        detail << Fmt(" (%.1f,%g,%g):%.3g<=%.3g", sigma, tau, mu, freq, bound);
        ++point;
      }
    }
  }
  return {ok, "freq<=bound" + detail.str()};
}

Outcome Bessel() {
  double worst = 0;
  int turan_violations = 0;
  const double log_min = std::log(std::numeric_limits<double>::min());
  for (double mu : {1.0, 10.0, 100.0, 1e4}) {
    std::vector<double> got(201);
    for (int64_t k = 0; k <= 200; ++k) {
      const long double oracle = testing::SeriesLogBesselIScaled(k, static_cast<long double>(mu));
      double rel;
      if (oracle > log_min + 1) {
        const double v = BesselIScaled(k, mu);
        rel = static_cast<double>(std::fabs(v / std::exp(oracle) - 1.0L));
      } else {
        // Below double range: compare through the log form.
        rel = std::fabs(std::expm1(static_cast<double>(LogBesselIScaled(k, mu) - oracle)));
      }
      worst = std::max(worst, rel);
      got[k] = LogBesselIScaled(k, mu);
    }
    for (int64_t k = 1; k < 200; ++k) turan_violations += !(2 * got[k] > got[k - 1] + got[k + 1]);
  }
  return {worst <= 1e-10 && turan_violations == 0,
          Fmt("max relative error %.3g over 804 points; %d Turan violations", worst,
              turan_violations)};
}

Outcome NetworkEquivalence() {
  const int64_t n = 3, epochs = 50;
  MechanismParams mp;
  mp.epsilon = 0.1;
  mp.delta = 1e-5;
  mp.n_users = n;
  const NoiseSpec noise = CalibrateMechanism(NoiseKind::kSkellam, mp).per_user;
  PsaParams p;
  p.kappa = 16;
  p.lambda = epochs;
  p.n = n;
  p.m = 100;
  p.noise = noise;
  p.q = ChooseModulus(p.m, n, static_cast<double>(n) * noise.Variance());
  RngStream rng(110, 0);
  auto [keys, tags] = Setup(p, rng);
  const auto files = MakeKeyFiles(p, keys, tags);
  std::vector<std::vector<int64_t>> data(n, std::vector<int64_t>(epochs));
  for (auto& row : data) {
    for (auto& x : row) x = static_cast<int64_t>(rng.UniformBelow(201)) - 100;
  }
  auto seed_of = [](int64_t i) { return static_cast<uint64_t>(5000 + i); };

  // In process.
  std::vector<int64_t> local;
  {
    std::vector<UserEncryptor> users;
    for (int64_t i = 0; i < n; ++i) {
      users.emplace_back(static_cast<uint32_t>(i + 1), keys.shares[i], tags, p.m, noise, seed_of(i));
    }
    EpochAggregator agg(keys.aggregator_key, tags, n);
    for (uint32_t j = 0; j < epochs; ++j) {
      for (int64_t i = 0; i < n; ++i) agg.Submit(users[i].Encrypt(j, data[i][j]));
      local.push_back(agg.Aggregate(j));
    }
  }

  // Over TCP.
  net::ServerOptions so(files[0]);
  so.epochs = epochs;
  so.epoch_timeout = std::chrono::milliseconds(20000);
  net::AggregatorServer server(so);
  server.Bind();
  auto served = std::async(std::launch::async, [&] { return server.Run(); });
  std::vector<std::future<net::ClientResult>> clients;
  for (int64_t i = 0; i < n; ++i) {
    clients.push_back(std::async(std::launch::async, [&, i] {
      net::ClientOptions co(files[i + 1]);
      co.port = server.port();
      co.data = data[i];
      co.noise = noise;
      co.seed = seed_of(i);
      return net::RunClient(co);
    }));
  }
  bool clients_agree = true;
  for (auto& c : clients) clients_agree &= c.get().aggregates == local;
  const net::ServeResult remote = served.get();
  const bool identical = remote.aggregates == local && clients_agree;

  // Duplicate submission on a fresh session.
  net::ServerOptions so2(files[0]);
  so2.epoch_timeout = std::chrono::milliseconds(20000);
  net::AggregatorServer server2(so2);
  server2.Bind();
  auto served2 = std::async(std::launch::async, [&] { return server2.Run(); });
  std::vector<std::unique_ptr<net::Connection>> conns;
  for (int64_t i = 0; i < n; ++i) {
    conns.push_back(std::make_unique<net::Connection>(net::Connection::Connect("127.0.0.1", server2.port())));
    conns.back()->Send(net::MakeHello(static_cast<uint32_t>(i + 1)));
  }
  auto next = [](net::Connection& c, net::FrameType t) {
    for (;;) {
      auto f = c.Receive();
      if (!f || f->type == t) return f;
    }
  };
  for (auto& c : conns) next(*c, net::FrameType::kEpochOpen);
  int64_t truth = 0;
  auto cipher = [&](int64_t i, int64_t x) {
    const Ciphertext c = PsaEncrypt(static_cast<uint32_t>(i + 1), 0, keys.shares[i], tags.at(0), x, 0, p.m);
    return net::MakeCipher(net::CipherMessage{static_cast<uint32_t>(i + 1), 0, c.value.residue()});
  };
  conns[0]->Send(cipher(0, 7));
  conns[0]->Send(cipher(0, -7));
  auto err = next(*conns[0], net::FrameType::kError);
  const bool duplicate_rejected = err && net::ParseError(*err).code == net::ErrorCode::kDuplicate;
  truth += 7;
  for (int64_t i = 1; i < n; ++i) {
    conns[i]->Send(cipher(i, i));
    truth += i;
  }
  auto agg = next(*conns[1], net::FrameType::kAggregate);
  const bool first_kept = agg && net::ParseAggregate(*agg).value == truth;
  const net::ServeResult r2 = served2.get();

  return {identical && duplicate_rejected && first_kept && r2.rejected_duplicates == 1,
          Fmt("%zu/%lld epochs bit-identical over TCP; duplicate %s, first value %s",
              static_cast<size_t>(std::inner_product(remote.aggregates.begin(), remote.aggregates.end(),
                                                     local.begin(), int64_t{0}, std::plus<>(),
                                                     std::equal_to<>())),
              static_cast<long long>(epochs), duplicate_rejected ? "rejected" : "ACCEPTED",
              first_kept ? "kept" : "LOST")};
}

Outcome SecuritySandwich() {
  int violations = 0, points = 0;
  for (int64_t w : {1, 2, 8}) {
    for (double gamma : {0.1, 0.5, 1.0}) {
      for (int64_t n : {10, 1000, 100000}) {
        for (int64_t kappa : {16, 128, 512}) {
          const SecurityEpsilon e = EpsilonFromSecurity(w, gamma, n, kappa, DefaultSlack(kappa), 1e-5);
          violations += !(e.lower <= e.epsilon && e.epsilon <= e.upper);
          ++points;
        }
      }
    }
  }
  return {violations == 0, Fmt("%d violations over %d grid points", violations, points)};
}

struct Criterion {
  const char* name;
  double budget_seconds;  // 0: no runtime requirement
  Outcome (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"C1  noiseless round-trip exactness", 10, Exactness},
      {"C2  key cancellation", 0, KeyCancellation},
      {"C3  calibration vs bound and DP ratio", 30, CalibrationVsBound},
      {"C4  accuracy alpha tail frequency", 10, Accuracy},
      {"C5  mechanism error comparison", 300, Figure1},
      {"C6  Skellam reproducibility", 0, Reproducibility},
      {"C7  Exp1 vs Exp2 and bias sandwich", 0, Exp1VersusExp2},
      {"C8  Skellam tail bound", 0, TailBound},
      {"C9  scaled Bessel accuracy and Turan", 0, Bessel},
      {"C10 network vs in-process equivalence", 0, NetworkEquivalence},
      {"C11 security epsilon sandwich", 0, SecuritySandwich},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += Fmt("; over the %.0f s budget", c.budget_seconds);
    }
    failed += !o.pass;
    std::printf("%s  %-40s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}
