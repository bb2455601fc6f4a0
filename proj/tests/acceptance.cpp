// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "pipeboost/baselines.hpp"
#include "pipeboost/compare.hpp"
#include "pipeboost/error.hpp"
#include "pipeboost/evaluator.hpp"
#include "pipeboost/mcts.hpp"
#include "pipeboost/nn.hpp"
#include "pipeboost/rng.hpp"
#include "pipeboost/simulator.hpp"
#include "test_support.hpp"

namespace pb = pipeboost;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kCountSeconds = 1.0;
constexpr std::size_t kGradParams = 1000;
constexpr double kGradStep = 1e-3;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr double kTrainSeconds = 300.0;
constexpr double kValL1 = 0.15;
constexpr std::size_t kOracleInstances = 50;
constexpr double kSimRatio = 0.95;
constexpr std::size_t kSimHits = 45;
constexpr double kEstRatio = 0.85;
constexpr std::size_t kEstHits = 40;
constexpr double kOracleSeconds = 180.0;
constexpr std::size_t kFuzzWorkloads = 100;
constexpr std::size_t kSimCalls = 10000;
constexpr double kUtilSlack = 1e-9;
constexpr double kScaleTol = 1e-9;
constexpr double kBoost = 1.5;
constexpr std::size_t kBoostHits = 4;
constexpr double kLatencySeconds = 60.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "pipeboost_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Cli {
  int code = -1;
  std::string out;
};

Cli cli(const std::string& args) {
  const std::string cmd = "'" PIPEBOOST_CLI "' " + args + " 2>>'" + path("stderr.txt") + "'";
  Cli r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

pb::Workload random_workload(pb::Rng& rng, std::size_t n_models, std::size_t max_size) {
  std::vector<std::size_t> pool(n_models);
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(pool);
  return pb::Workload(
      std::vector<std::size_t>(pool.begin(), pool.begin() + 1 + rng.below(max_size)));
}

bool valid(const pb::Mapping& m, const pb::Workload& w, const pb::DeviceProfile& p) {
  try {
    pb::validate(m, w, p);
  } catch (const pb::Error&) {
    return false;
  }
  return pb::within_stage_limit(m, 3);
}

Outcome c1_count() {
  const auto t0 = Clock::now();
  const auto r = cli("count --layers 84 --cuts 3");
  const double s = seconds_since(t0);
  return {r.code == 0 && r.out == "95284\n" && s < kCountSeconds,
          fmt("exit %d, output '%s', %.3f s", r.code, r.out.substr(0, r.out.find('\n')).c_str(), s)};
}

Outcome c2_parameters() {
  const pb::EstimatorNet net(pb::TensorDims{3, 11, 30});
  return {net.parameter_count() == 20003, fmt("%zu parameters", net.parameter_count())};
}

Outcome c3_gradient() {
  const auto t0 = Clock::now();
  const pb::TensorDims dims{3, 11, 30};
  pb::EstimatorNet net(dims);
  net.init(42);
  pb::Rng rng(43);
  std::vector<pb::EmbeddingTensor> inputs(2, pb::EmbeddingTensor(dims));
  for (auto& in : inputs) {
    for (auto& v : in.data()) v = rng.below(3) == 0 ? 0.0 : rng.uniform();
  }
  std::vector<const pb::EmbeddingTensor*> batch{&inputs[0], &inputs[1]};
  std::vector<pb::Prediction> targets(2);
  for (auto& t : targets) {
    for (auto& v : t) v = rng.uniform();
  }
  std::vector<double> grad(net.parameter_count(), 0.0);
  pb::l1_loss_and_gradient(net, batch, targets, grad);
  auto loss = [&] {
    std::vector<pb::Prediction> out;
    for (const auto* in : batch) out.push_back(net.forward(*in));
    return pb::l1_loss(out, targets);
  };

  // Distinct parameters, spread over every block.
  std::vector<std::size_t> order(net.parameter_count());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  auto params = net.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < kGradParams; ++i) {
    const std::size_t p = order[i];
    const double saved = params[p];
    params[p] = saved + kGradStep;
    const double up = loss();
    params[p] = saved - kGradStep;
    const double down = loss();
    params[p] = saved;
    const double numeric = (up - down) / (2.0 * kGradStep);
    worst = std::max(worst, std::abs(grad[p] - numeric) / std::max(1.0, std::abs(grad[p])));
  }
  const double s = seconds_since(t0);
  return {worst <= kGradTol && s < kGradSeconds,
          fmt("%zu params, worst relative error %.2e, %.1f s", kGradParams, worst, s)};
}

Outcome c4_training() {
  const auto t0 = Clock::now();
  const auto profile = pb::generate_profile(11, 42);
  pb::TrainHistory h;
  pb::testing::train_standard(profile, &h);
  const double s = seconds_since(t0);
  const double val = h.val_loss.back();
  const double first = h.train_loss.front(), last = h.train_loss.back();
  return {h.train_loss.size() == 100 && s < kTrainSeconds && val <= kValL1 && last < first,
          fmt("%.1f s, val L1 %.4f, train L1 epoch 1 %.4f -> epoch 100 %.4f", s, val, first, last)};
}

Outcome c5_oracle() {
  const auto t0 = Clock::now();
  pb::GeneratorConfig g;
  g.min_layers = 2;
  g.max_layers = 5;
  const auto profile = pb::generate_profile(12, 42, g);
  const auto estimator = pb::testing::train_standard(profile);
  const auto embedding = pb::build_embedding(profile);
  const pb::SimulatorEvaluator sim(profile);
  const pb::EstimatorEvaluator est(estimator, profile, embedding);
  std::size_t sim_hits = 0, est_hits = 0;
  for (std::size_t i = 0; i < kOracleInstances; ++i) {
    const auto w = pb::random_mixes(profile, 1, 2, pb::Rng::derive(42, i))[0];
    const double opt = pb::exhaustive_best(w, profile, 3).second.avg_throughput;
    pb::MctsConfig cfg;
    cfg.seed = pb::Rng::derive(43, i);
    const double a = pb::simulate(w, pb::schedule(w, profile, sim, cfg).mapping, profile).avg_throughput;
    const double b = pb::simulate(w, pb::schedule(w, profile, est, cfg).mapping, profile).avg_throughput;
    sim_hits += a >= kSimRatio * opt;
    est_hits += b >= kEstRatio * opt;
  }
  const double s = seconds_since(t0);
  return {sim_hits >= kSimHits && est_hits >= kEstHits && s < kOracleSeconds,
          fmt("simulator %zu/%zu within 95%% (need %zu), estimator %zu/%zu within 85%% (need %zu), %.1f s",
              sim_hits, kOracleInstances, kSimHits, est_hits, kOracleInstances, kEstHits, s)};
}

Outcome c6_validity() {
  const auto profile = pb::generate_profile(11, 42);
  const auto embedding = pb::build_embedding(profile);
  pb::EstimatorNet net(embedding.dims());
  net.init(5);
  const pb::Estimator estimator(net, pb::TargetStats{});
  const pb::EstimatorEvaluator est(estimator, profile, embedding);
  const pb::SimulatorEvaluator sim(profile);
  const auto lr = pb::LinRegModel::fit(profile);
  pb::Rng rng(66);
  std::size_t violations = 0, checked = 0;
  for (std::size_t i = 0; i < kFuzzWorkloads; ++i) {
    const auto w = random_workload(rng, profile.model_count(), 5);
    pb::MctsConfig mc;
    mc.seed = rng.next();
    pb::GaConfig gc;
    gc.seed = rng.next();
    for (const auto& m : {pb::schedule(w, profile, est, mc).mapping, pb::ga_schedule(w, profile, sim, gc),
                          pb::mosaic_schedule(w, profile, lr), pb::gpu_only(w, profile)}) {
      ++checked;
      violations += !valid(m, w, profile);
    }
  }
  return {violations == 0, fmt("%zu mappings, %zu violations", checked, violations)};
}

Outcome c7_simulator() {
  const auto profile = pb::generate_profile(11, 7);
  pb::Rng rng(77);
  std::size_t util = 0, mono = 0, scale = 0;
  for (std::size_t i = 0; i < kSimCalls; ++i) {
    std::vector<std::size_t> pool(profile.model_count());
    std::iota(pool.begin(), pool.end(), 0);
    rng.shuffle(pool);
    const std::size_t size = 1 + rng.below(4);
    const pb::Workload w(std::vector<std::size_t>(pool.begin(), pool.begin() + size));
    const auto m = pb::random_mapping(w, profile, 3, rng.next());
    const auto r = pb::simulate(w, m, profile);
    for (double u : r.unit_utilization) util += u > 1.0 + kUtilSlack;

    if (i % 3 == 0) {
      // Adding a model never speeds up the rest.
      auto grown = w.models();
      grown.push_back(pool[size]);
      auto gm = m;
      gm.assignments.push_back(
          pb::random_mapping(pb::Workload({pool[size]}), profile, 3, rng.next()).assignments[0]);
      const auto rg = pb::simulate(pb::Workload(grown), gm, profile);
      for (std::size_t k = 0; k < size; ++k) mono += rg.per_dnn_inf_s[k] > r.per_dnn_inf_s[k] * (1.0 + 1e-12);
    } else if (i % 3 == 1) {
      const double c = rng.uniform(0.1, 10.0);
      auto scaled = profile;
      scaled.transfer_ms *= c;
      for (std::size_t model : w.models()) {
        for (auto& l : scaled.models[model].layers) {
          for (auto& k : l.kernels) {
            for (auto& [u, t] : k.time_ms) t *= c;
          }
        }
      }
      const auto rs = pb::simulate(w, m, scaled);
      scale += std::abs(rs.avg_throughput * c - r.avg_throughput) > kScaleTol * r.avg_throughput;
    }
  }
  return {util == 0 && mono == 0 && scale == 0,
          fmt("%zu calls: %zu utilization, %zu monotonicity, %zu scale violations", kSimCalls, util,
              mono, scale)};
}

Outcome c8_direction() {
  const auto profile = pb::testing::saturating_profile();
  const auto estimator = pb::testing::train_standard(profile);
  const auto mixes = pb::random_mixes(profile, 5, 4, 42);
  // Demand on the GPU before contention scaling.
  double min_demand = 1e9;
  for (const auto& w : mixes) {
    const auto r = pb::simulate(w, pb::gpu_only(w, profile), profile);
    min_demand = std::min(min_demand, r.unit_utilization[0] / r.theta);
  }
  pb::CompareOptions o;
  o.methods = {pb::Method::Gpu, pb::Method::Ga, pb::Method::Mcts};
  o.estimator = &estimator;
  o.seed = 42;
  const auto report = pb::run_compare(profile, mixes, o);
  std::size_t hits = 0;
  double ga = 0.0, mcts = 0.0;
  std::string ratios;
  for (const auto& row : report.rows) {
    if (row.method == pb::Method::Ga) ga += row.normalized / mixes.size();
    if (row.method == pb::Method::Mcts) {
      mcts += row.normalized / mixes.size();
      hits += row.normalized >= kBoost;
      ratios += fmt("%s%.3f", ratios.empty() ? "" : " ", row.normalized);
    }
  }
  return {min_demand >= 2.0 && hits >= kBoostHits && mcts >= ga,
          fmt("gpu demand >= %.2f, mcts/gpu [%s], %zu/5 >= 1.5 (need %zu), mean mcts %.3f vs ga %.3f",
              min_demand, ratios.c_str(), hits, kBoostHits, mcts, ga)};
}

Outcome c9_motivation() {
  const auto profile = pb::testing::saturating_profile();
  const auto w = pb::random_mixes(profile, 1, 4, 42)[0];
  const double gpu = pb::simulate(w, pb::gpu_only(w, profile), profile).avg_throughput;
  const double best =
      pb::simulate(w, pb::random_best(w, profile, 200, 3, 42), profile).avg_throughput;
  return {best > gpu, fmt("random-best %.3f vs gpu %.3f inf/s (x%.3f)", best, gpu, best / gpu)};
}

Outcome c10_determinism() {
  bool ok = cli("genprofile --models 11 --seed 42 --out " + path("p.json")).code == 0 &&
            cli("dataset --profile " + path("p.json") + " --seed 7 --out " + path("d.json")).code == 0;
  for (const char* name : {"w1.bin", "w2.bin"}) {
    ok = ok && cli("train --profile " + path("p.json") + " --dataset " + path("d.json") +
                   " --epochs 10 --seed 42 --out " + path(name)).code == 0;
  }
  const bool weights = ok && slurp(path("w1.bin")) == slurp(path("w2.bin"));
  for (const char* name : {"s1.json", "s2.json"}) {
    ok = ok && cli("schedule --profile " + path("p.json") + " --weights " + path("w1.bin") +
                   " --mix dnn00,dnn03,dnn07 --seed 9 --out " + path(name)).code == 0;
  }
  const bool schedules = ok && slurp(path("s1.json")) == slurp(path("s2.json"));
  return {ok && weights && schedules,
          fmt("cli ok %d, weights identical %d, mapping files identical %d", ok, weights, schedules)};
}

Outcome c11_latency() {
  if (!fs::exists(path("w1.bin"))) return {false, "no weights from the determinism run"};
  const auto t0 = Clock::now();
  const auto r = cli("schedule --profile " + path("p.json") + " --weights " + path("w1.bin") +
                     " --mix dnn00,dnn02,dnn04,dnn06,dnn08 --budget 500 --depth 100 --seed 1 --out " + path("s5.json"));
  const double s = seconds_since(t0);
  return {r.code == 0 && s < kLatencySeconds, fmt("exit %d, %.2f s", r.code, s)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"combinatorics", c1_count},      {"parameter count", c2_parameters},
      {"gradient check", c3_gradient},  {"training", c4_training},
      {"oracle optimality", c5_oracle}, {"validity fuzz", c6_validity},
      {"simulator properties", c7_simulator}, {"saturating mixes", c8_direction},
      {"random mappings beat gpu", c9_motivation}, {"determinism", c10_determinism},
      {"decision latency", c11_latency}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
