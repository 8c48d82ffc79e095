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

// Command-line front end: accuracy simulations, mechanism comparison tables,
// calibration, and a file- or network-based aggregation pipeline.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "psa/harness.h"
#include "psa/mechanisms.h"
#include "psa/net.h"
#include "psa/scheme.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct NoiseFlags {
  std::string kind = "none";
  double epsilon = 0.1;
  double delta = 1e-5;
  double gamma = 1.0;

  void Add(CLI::App* app) {
    app->add_option("--noise", kind, "none|skellam|geometric|binomial")->capture_default_str();
    app->add_option("--epsilon", epsilon)->capture_default_str();
    app->add_option("--delta", delta)->capture_default_str();
    app->add_option("--gamma", gamma)->capture_default_str();
  }

  // Per-user noise for n users answering one query.
  psa::NoiseSpec Spec(int64_t n) const {
    const psa::NoiseKind k = psa::ParseNoiseKind(kind);
    if (k == psa::NoiseKind::kNone) return {};
    psa::MechanismParams p;
    p.epsilon = epsilon;
    p.delta = delta;
    p.gamma = gamma;
    p.n_users = n;
    return psa::CalibrateMechanism(k, p).per_user;
  }
};

std::vector<int64_t> ReadIntegers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<int64_t> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(std::stoll(line));
  }
  return out;
}

void WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

int Simulate(const std::string& config_path, psa::ExperimentConfig c, const std::string& out) {
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open " + config_path);
    c = psa::ExperimentConfig::FromJson(json::parse(in));
  }
  WriteText(out, psa::RunAccuracyExperiment(c).ToCsv());
  return 0;
}

int Figure1(uint64_t seed, int64_t n, int64_t repeats, const std::string& dir) {
  fs::create_directories(dir);
  const psa::Figure1Tables t = psa::ReproduceFigure1(seed, n, repeats);
  WriteText((fs::path(dir) / "figure1_delta.csv").string(), t.DeltaCsv());
  WriteText((fs::path(dir) / "figure1_gamma.csv").string(), t.GammaCsv());
  return 0;
}

int Calibrate(const psa::MechanismParams& p) {
  const double mu = psa::CalibrateSkellamVariance(p);
  const psa::CalibratedNoise c = psa::CalibrateMechanism(psa::NoiseKind::kSkellam, p);
  json j;
  j["epsilon"] = p.epsilon;
  j["delta"] = p.delta;
  j["beta"] = p.beta;
  j["gamma"] = p.gamma;
  j["sensitivity"] = p.sensitivity;
  j["n"] = p.n_users;
  j["lambda_queries"] = p.lambda_queries;
  j["mu"] = mu;
  j["mu_upper_bound"] = psa::SkellamVarianceUpperBound(p);
  j["mu_total"] = c.total_variance;
  j["mu_user"] = c.per_user_variance;
  j["alpha"] = psa::AccuracyAlpha(p);
  j["tail_bound"] = psa::SkellamTailBound(std::sinh(p.epsilon / p.sensitivity),
                                          -static_cast<double>(p.sensitivity), {mu});
  j["geometric_alpha"] = psa::GeometricAlpha(p);
  j["geometric_activation"] = psa::GeometricActivation(p);
  j["binomial_total_trials"] = psa::BinomialTotalTrials(p);
  j["binomial_trials_per_user"] = psa::BinomialTrialsPerUser(p);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int Keygen(int64_t n, int64_t kappa, int64_t epochs, int64_t m, const NoiseFlags& noise,
           uint64_t seed, const std::string& dir) {
  psa::PsaParams p;
  p.kappa = kappa;
  p.lambda = epochs;
  p.n = n;
  p.m = m;
  p.gamma = noise.gamma;
  p.noise = noise.Spec(n);
  p.q = psa::ChooseModulus(m, n, static_cast<double>(n) * p.noise.Variance());
  p.Validate();
  psa::RngStream rng(seed, 0);
  const auto [keys, tags] = psa::Setup(p, rng);
  const auto files = psa::MakeKeyFiles(p, keys, tags);
  fs::create_directories(dir);
  psa::WriteKeyFile((fs::path(dir) / "aggregator.key").string(), files[0]);
  for (int64_t i = 1; i <= n; ++i) {
    psa::WriteKeyFile((fs::path(dir) / ("user_" + std::to_string(i) + ".key")).string(),
                      files[i]);
  }
  std::cerr << "q = " << p.q.value() << "\n";
  return 0;
}

int Encrypt(const std::string& share_path, const std::string& data_path,
            const NoiseFlags& noise, uint64_t seed, const std::string& out) {
  const psa::KeyFile key = psa::ReadKeyFile(share_path);
  if (key.holder == 0) throw std::invalid_argument("encrypt needs a user share, not s_0");
  const std::vector<int64_t> data = ReadIntegers(data_path);
  if (static_cast<int64_t>(data.size()) > key.lambda) {
    throw std::invalid_argument("more data values than time tags");
  }
  const auto user = static_cast<uint32_t>(key.holder);
  psa::UserEncryptor enc(user, key.key, key.tags, key.m, noise.Spec(key.n), seed);
  std::ostringstream csv;
  csv << "user,epoch,residue\n";
  for (uint32_t j = 0; j < data.size(); ++j) {
    csv << user << "," << j << "," << enc.Encrypt(j, data[j]).value.residue() << "\n";
  }
  WriteText(out, csv.str());
  return 0;
}

int Aggregate(const std::string& key_path, const std::vector<std::string>& inputs,
              const std::string& out) {
  const psa::KeyFile key = psa::ReadKeyFile(key_path);
  if (key.holder != 0) throw std::invalid_argument("aggregate needs the aggregator key");
  const psa::Modulus q(key.q);
  psa::EpochAggregator agg(key.key, key.tags, key.n);
  std::map<uint32_t, bool> epochs;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string user, epoch, residue;
      std::getline(row, user, ',');
      std::getline(row, epoch, ',');
      std::getline(row, residue, ',');
      const psa::Ciphertext c{static_cast<uint32_t>(std::stoul(epoch)),
                              static_cast<uint32_t>(std::stoul(user)),
                              psa::RingElement::FromResidue(std::stoull(residue), q)};
      const psa::SubmitStatus s = agg.Submit(c);
      if (s != psa::SubmitStatus::kAccepted) {
        throw std::runtime_error(path + ": ciphertext for user " + user + " epoch " + epoch +
                                 " rejected (" + psa::SubmitStatusName(s) + ")");
      }
      epochs[c.epoch] = true;
    }
  }
  std::ostringstream csv;
  csv << "epoch,aggregate\n";
  for (const auto& [epoch, unused] : epochs) {
    if (!agg.IsComplete(epoch)) {
      std::cerr << "epoch " << epoch << " is incomplete; skipped\n";
      continue;
    }
    csv << epoch << "," << agg.Aggregate(epoch) << "\n";
  }
  WriteText(out, csv.str());
  return 0;
}

int Serve(const std::string& bind, const std::string& key_path, int64_t n, uint32_t epochs,
          int64_t timeout_ms, const std::string& log) {
  psa::net::ServerOptions o(psa::ReadKeyFile(key_path));
  if (n != o.aggregator_key.n) {
    throw std::invalid_argument("--n does not match the key file (" +
                                std::to_string(o.aggregator_key.n) + ")");
  }
  std::tie(o.host, o.port) = psa::net::ParseAddress(bind);
  o.epochs = epochs;
  o.epoch_timeout = std::chrono::milliseconds(timeout_ms);
  o.log_path = log;
  psa::net::AggregatorServer server(std::move(o));
  server.Bind();
  std::cerr << "listening on port " << server.port() << "\n";
  const psa::net::ServeResult r = server.Run();
  for (size_t j = 0; j < r.aggregates.size(); ++j) {
    std::cout << j << "," << r.aggregates[j] << "\n";
  }
  if (r.timed_out) {
    std::cerr << "epoch " << r.aggregates.size() << " timed out\n";
    return 2;
  }
  return 0;
}

int Client(const std::string& connect, const std::string& share_path,
           const std::string& data_path, const NoiseFlags& noise, uint64_t seed) {
  psa::net::ClientOptions o(psa::ReadKeyFile(share_path));
  std::tie(o.host, o.port) = psa::net::ParseAddress(connect);
  o.data = ReadIntegers(data_path);
  o.noise = noise.Spec(o.share.n);
  o.seed = seed;
  const psa::net::ClientResult r = psa::net::RunClient(o);
  for (size_t j = 0; j < r.aggregates.size(); ++j) {
    std::cout << j << "," << r.aggregates[j] << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private stream aggregation with distributed discrete noise"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo accuracy of a mechanism");
  psa::ExperimentConfig sim_cfg;
  std::string sim_mech = "skellam", sim_config, sim_out;
  sim->add_option("--mechanism", sim_mech, "skellam|geometric|binomial|none")->capture_default_str();
  sim->add_option("--epsilon", sim_cfg.params.epsilon)->capture_default_str();
  sim->add_option("--delta", sim_cfg.params.delta)->capture_default_str();
  sim->add_option("--beta", sim_cfg.params.beta)->capture_default_str();
  sim->add_option("--gamma", sim_cfg.params.gamma)->capture_default_str();
  sim->add_option("--sensitivity", sim_cfg.params.sensitivity)->capture_default_str();
  sim->add_option("--n", sim_cfg.params.n_users)->capture_default_str();
  sim->add_option("--repeats", sim_cfg.repeats)->capture_default_str();
  sim->add_option("--seed", sim_cfg.seed)->capture_default_str();
  sim->add_option("--threads", sim_cfg.threads)->capture_default_str();
  sim->add_flag("--full-crypto", sim_cfg.full_crypto, "also run repeats through encryption");
  sim->add_option("--config", sim_config, "JSON config; overrides the flags");
  sim->add_option("--out", sim_out, "CSV output (default stdout)");

  // figure1
  auto* fig = app.add_subcommand("figure1", "Error of the three mechanisms over delta and gamma");
  uint64_t fig_seed = 1;
  int64_t fig_n = 1000, fig_repeats = 1000;
  std::string fig_dir = ".";
  fig->add_option("--seed", fig_seed)->capture_default_str();
  fig->add_option("--n", fig_n)->capture_default_str();
  fig->add_option("--repeats", fig_repeats)->capture_default_str();
  fig->add_option("--out-dir", fig_dir)->capture_default_str();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Print Skellam calibration as JSON");
  psa::MechanismParams cal_p;
  cal->add_option("--epsilon", cal_p.epsilon)->capture_default_str();
  cal->add_option("--delta", cal_p.delta)->capture_default_str();
  cal->add_option("--beta", cal_p.beta)->capture_default_str();
  cal->add_option("--gamma", cal_p.gamma)->capture_default_str();
  cal->add_option("--sensitivity", cal_p.sensitivity)->capture_default_str();
  cal->add_option("--n", cal_p.n_users)->capture_default_str();
  cal->add_option("--lambda", cal_p.lambda_queries, "sequential queries")->capture_default_str();

  // keygen
  auto* kg = app.add_subcommand("keygen", "Trusted-dealer key and time-tag generation");
  int64_t kg_n = 2, kg_kappa = 16, kg_epochs = 1, kg_m = 1;
  uint64_t kg_seed = 1;
  std::string kg_dir = ".";
  NoiseFlags kg_noise;
  kg->add_option("--n", kg_n)->capture_default_str();
  kg->add_option("--kappa", kg_kappa)->capture_default_str();
  kg->add_option("--epochs", kg_epochs)->capture_default_str();
  kg->add_option("--m", kg_m, "plaintext bound")->capture_default_str();
  kg_noise.Add(kg);
  kg->add_option("--seed", kg_seed)->capture_default_str();
  kg->add_option("--out-dir", kg_dir)->capture_default_str();

  // encrypt
  auto* en = app.add_subcommand("encrypt", "Encrypt one value per epoch under a user share");
  std::string en_share, en_data, en_out;
  uint64_t en_seed = 1;
  NoiseFlags en_noise;
  en->add_option("--share", en_share)->required();
  en->add_option("--data", en_data, "one integer per line")->required();
  en_noise.Add(en);
  en->add_option("--seed", en_seed)->capture_default_str();
  en->add_option("--out", en_out);

  // aggregate
  auto* ag = app.add_subcommand("aggregate", "Decrypt per-epoch sums from ciphertext CSVs");
  std::string ag_key, ag_out;
  std::vector<std::string> ag_in;
  ag->add_option("--keys", ag_key, "aggregator key file")->required();
  ag->add_option("--in", ag_in, "ciphertext CSV files")->required();
  ag->add_option("--out", ag_out);

  // serve
  auto* sv = app.add_subcommand("serve", "Run the aggregator service");
  std::string sv_bind = "127.0.0.1:7000", sv_keys, sv_log;
  int64_t sv_n = 0, sv_timeout = 30000;
  uint32_t sv_epochs = 1;
  sv->add_option("--bind", sv_bind)->capture_default_str();
  sv->add_option("--keys", sv_keys)->required();
  sv->add_option("--n", sv_n)->required();
  sv->add_option("--epochs", sv_epochs)->capture_default_str();
  sv->add_option("--timeout-ms", sv_timeout)->capture_default_str();
  sv->add_option("--log", sv_log, "append epoch,aggregate rows here");

  // client
  auto* cl = app.add_subcommand("client", "Submit one ciphertext per epoch to an aggregator");
  std::string cl_connect, cl_share, cl_data;
  uint64_t cl_seed = 1;
  NoiseFlags cl_noise;
  cl->add_option("--connect", cl_connect)->required();
  cl->add_option("--share", cl_share)->required();
  cl->add_option("--data", cl_data)->required();
  cl_noise.Add(cl);
  cl->add_option("--seed", cl_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      sim_cfg.mechanism = psa::ParseNoiseKind(sim_mech);
      return Simulate(sim_config, sim_cfg, sim_out);
    }
    if (*fig) return Figure1(fig_seed, fig_n, fig_repeats, fig_dir);
    if (*cal) return Calibrate(cal_p);
    if (*kg) return Keygen(kg_n, kg_kappa, kg_epochs, kg_m, kg_noise, kg_seed, kg_dir);
    if (*en) return Encrypt(en_share, en_data, en_noise, en_seed, en_out);
    if (*ag) return Aggregate(ag_key, ag_in, ag_out);
    if (*sv) return Serve(sv_bind, sv_keys, sv_n, sv_epochs, sv_timeout, sv_log);
    if (*cl) return Client(cl_connect, cl_share, cl_data, cl_noise, cl_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
