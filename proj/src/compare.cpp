#include "pipeboost/compare.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "pipeboost/error.hpp"
#include "pipeboost/rng.hpp"

namespace pipeboost {

namespace {

constexpr Method kAllMethods[] = {Method::Gpu, Method::RandomBest, Method::Mosaic, Method::Ga,
                                  Method::Mcts};

}  // namespace

const char* to_string(Method method) {
  switch (method) {
    case Method::Gpu: return "gpu";
    case Method::RandomBest: return "random-best";
    case Method::Mosaic: return "mosaic";
    case Method::Ga: return "ga";
    case Method::Mcts: return "mcts";
  }
  return "?";
}

std::string valid_method_names() {
  std::string out;
  for (Method m : kAllMethods) {
    if (!out.empty()) out += ", ";
    out += to_string(m);
  }
  return out;
}

Method method_from_string(const std::string& name) {
  for (Method m : kAllMethods) {
    if (name == to_string(m)) return m;
  }
  throw Error(Errc::InvalidArgument,
              "unknown method '" + name + "'; valid methods: " + valid_method_names());
}

std::string CompareReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "mix_id,method,avg_throughput,normalized,decision_ms\n";
  for (const auto& r : rows) {
    out << r.mix_id << ',' << to_string(r.method) << ',' << r.avg_throughput << ','
        << r.normalized << ',' << r.decision_ms << '\n';
  }
  return out.str();
}

nlohmann::json CompareReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"mix_id", r.mix_id},
                   {"method", to_string(r.method)},
                   {"avg_throughput", r.avg_throughput},
                   {"normalized", r.normalized},
                   {"decision_ms", r.decision_ms},
                   {"assignments", r.mapping.assignments}});
  }
  return {{"rows", out}};
}

std::vector<Workload> random_mixes(const DeviceProfile& profile, std::size_t count,
                                   std::size_t mix_size, std::uint64_t seed) {
  if (mix_size < 1 || mix_size > kMaxMixSize || mix_size > profile.model_count()) {
    throw Error(Errc::InvalidArgument, "random_mixes: invalid mix size " +
                                           std::to_string(mix_size));
  }
  std::vector<Workload> mixes;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(Rng::derive(seed, i));
    std::vector<std::size_t> pool(profile.model_count());
    for (std::size_t m = 0; m < pool.size(); ++m) pool[m] = m;
    rng.shuffle(pool);
    pool.resize(mix_size);
    mixes.emplace_back(std::move(pool));
  }
  return mixes;
}

CompareReport run_compare(const DeviceProfile& profile, const std::vector<Workload>& mixes,
                          const CompareOptions& options) {
  for (Method m : options.methods) {
    const bool needs_estimator =
        m == Method::Mcts || (m == Method::Ga && !options.ga_uses_simulator);
    if (needs_estimator && (options.estimator == nullptr || !options.estimator->trained())) {
      throw Error(Errc::NotTrained,
                  std::string("method '") + to_string(m) + "' needs trained estimator weights");
    }
  }
  for (const auto& mix : mixes) {
    if (mix.empty()) throw Error(Errc::InvalidArgument, "run_compare: empty mix");
    validate(mix, profile);
  }

  const CostTable costs(profile);
  const EmbeddingTensor embedding = build_embedding(profile);
  const SimulatorEvaluator simulator_eval(profile);
  std::optional<EstimatorEvaluator> estimator_eval;
  if (options.estimator && options.estimator->trained()) {
    estimator_eval.emplace(*options.estimator, profile, embedding);
  }
  const LinRegModel linreg = LinRegModel::fit(profile);

  const std::size_t n_methods = options.methods.size();
  CompareReport report;
  report.rows.resize(mixes.size() * n_methods);
  std::vector<double> gpu_t(mixes.size());
  for (std::size_t i = 0; i < mixes.size(); ++i) {
    gpu_t[i] = simulate(mixes[i], gpu_only(mixes[i], profile), profile, costs).avg_throughput;
  }

  auto run_cell = [&](std::size_t cell) {
    const std::size_t mix = cell / n_methods;
    const Method method = options.methods[cell % n_methods];
    const Workload& workload = mixes[mix];
    const std::uint64_t seed =
        Rng::derive(options.seed, mix * 16 + static_cast<std::uint64_t>(method));
    const auto started = std::chrono::steady_clock::now();
    Mapping mapping;
    switch (method) {
      case Method::Gpu: mapping = gpu_only(workload, profile); break;
      case Method::RandomBest:
        mapping = random_best(workload, profile, options.random_n, options.stage_limit, seed);
        break;
      case Method::Mosaic:
        mapping = mosaic_schedule(workload, profile, linreg, options.stage_limit);
        break;
      case Method::Ga: {
        GaConfig cfg = options.ga;
        cfg.seed = seed;
        cfg.stage_limit = options.stage_limit;
        const Evaluator& eval = options.ga_uses_simulator
                                    ? static_cast<const Evaluator&>(simulator_eval)
                                    : *estimator_eval;
        mapping = ga_schedule(workload, profile, eval, cfg);
        break;
      }
      case Method::Mcts: {
        MctsConfig cfg = options.mcts;
        cfg.seed = seed;
        cfg.stage_limit = options.stage_limit;
        mapping = schedule(workload, profile, *estimator_eval, cfg).mapping;
        break;
      }
    }
    const double elapsed = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - started)
                               .count();
    CompareRow& row = report.rows[cell];
    row.mix_id = mix + 1;
    row.method = method;
    row.avg_throughput = simulate(workload, mapping, profile, costs).avg_throughput;
    row.normalized = method == Method::Gpu ? 1.0 : row.avg_throughput / gpu_t[mix];
    row.decision_ms = elapsed;
    row.mapping = std::move(mapping);
  };

  const std::size_t cells = report.rows.size();
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, cells));
  if (jobs == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
    return report;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) {
          try {
            run_cell(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return report;
}

}  // namespace pipeboost
