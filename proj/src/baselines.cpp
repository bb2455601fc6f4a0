#include "pipeboost/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "pipeboost/error.hpp"
#include "pipeboost/rng.hpp"

namespace pipeboost {

Mapping gpu_only(const Workload& workload, const DeviceProfile& profile) {
  const auto gpu = profile.gpu_unit();
  if (!gpu) throw Error(Errc::InvalidArgument, "gpu_only: profile has no gpu unit");
  validate(workload, profile);
  Mapping mapping;
  for (std::size_t m : workload.models()) {
    mapping.assignments.emplace_back(profile.models[m].layer_count(), *gpu);
  }
  return mapping;
}

namespace {

std::array<double, 4> feature_row(const LayerFeatures& f) {
  return {static_cast<double>(f.in_elems), static_cast<double>(f.out_elems),
          static_cast<double>(f.macs), 1.0};
}

}  // namespace

LinRegModel LinRegModel::fit(const DeviceProfile& profile) {
  std::size_t rows = 0;
  for (const auto& m : profile.models) rows += m.layer_count();
  Eigen::MatrixXd x(rows, 4);
  std::size_t r = 0;
  for (const auto& m : profile.models) {
    for (const auto& l : m.layers) {
      const auto f = feature_row(l.features);
      for (int c = 0; c < 4; ++c) x(static_cast<Eigen::Index>(r), c) = f[c];
      ++r;
    }
  }
  // Column scaling keeps the solve well conditioned (macs ~ 1e8, bias 1).
  Eigen::Vector4d scale = x.cwiseAbs().colwise().maxCoeff().transpose();
  for (int c = 0; c < 4; ++c) {
    if (scale(c) == 0.0) scale(c) = 1.0;
  }
  const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  const auto qr = xs.colPivHouseholderQr();

  LinRegModel model;
  for (std::size_t u = 0; u < profile.unit_count(); ++u) {
    Eigen::VectorXd y(rows);
    r = 0;
    for (const auto& m : profile.models) {
      for (const auto& l : m.layers) {
        y(static_cast<Eigen::Index>(r++)) = layer_cost(l, static_cast<UnitId>(u));
      }
    }
    const Eigen::Vector4d beta = qr.solve(y).cwiseQuotient(scale);
    Weights w{};
    for (int c = 0; c < 4; ++c) {
      if (!std::isfinite(beta(c))) throw Error(Errc::InvalidArgument, "linreg fit diverged");
      w[c] = beta(c);
    }
    model.weights_.push_back(w);
  }
  return model;
}

double LinRegModel::predict(const LayerFeatures& features, UnitId unit) const {
  if (!fitted()) throw Error(Errc::NotTrained, "linear model is not fitted");
  const auto& w = weights_.at(static_cast<std::size_t>(unit));
  const auto f = feature_row(features);
  double out = 0.0;
  for (int c = 0; c < 4; ++c) out += w[c] * f[c];
  return out;
}

Mapping mosaic_schedule(const Workload& workload, const DeviceProfile& profile,
                        const LinRegModel& linreg, std::size_t stage_limit) {
  if (!linreg.fitted()) throw Error(Errc::NotTrained, "mosaic_schedule: linreg not fitted");
  if (linreg.weights().size() != profile.unit_count()) {
    throw Error(Errc::InvalidArgument, "mosaic_schedule: linreg fitted for another device");
  }
  validate(workload, profile);
  Mapping mapping;
  for (std::size_t m : workload.models()) {
    const auto& model = profile.models[m];
    std::vector<std::vector<double>> predicted(model.layer_count(),
                                               std::vector<double>(profile.unit_count()));
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      for (std::size_t u = 0; u < profile.unit_count(); ++u) {
        predicted[l][u] = linreg.predict(model.layers[l].features, static_cast<UnitId>(u));
      }
    }
    const auto candidates =
        enumerate_assignments(model.layer_count(), profile.unit_count(), stage_limit);
    double best_cost = std::numeric_limits<double>::infinity();
    const std::vector<UnitId>* best = nullptr;
    std::vector<double> load(profile.unit_count());
    for (const auto& candidate : candidates) {
      std::fill(load.begin(), load.end(), 0.0);
      for (std::size_t l = 0; l < candidate.size(); ++l) {
        const auto u = static_cast<std::size_t>(candidate[l]);
        load[u] += predicted[l][u];
        if (l > 0 && candidate[l] != candidate[l - 1]) load[u] += profile.transfer_ms;
      }
      const double cost = *std::max_element(load.begin(), load.end());
      if (cost < best_cost) {
        best_cost = cost;
        best = &candidate;
      }
    }
    mapping.assignments.push_back(*best);
  }
  return mapping;
}

void merge_stages(std::vector<UnitId>& assignment, const LayerCostFn& cost,
                  std::size_t stage_limit) {
  if (stage_limit < 1) throw Error(Errc::InvalidArgument, "merge_stages: stage_limit < 1");
  struct Run {
    std::size_t first, last;
    UnitId unit;
    double cost;
  };
  while (true) {
    std::vector<Run> runs;
    for (std::size_t l = 0; l < assignment.size(); ++l) {
      if (runs.empty() || runs.back().unit != assignment[l]) {
        runs.push_back({l, l, assignment[l], 0.0});
      }
      runs.back().last = l;
      runs.back().cost += cost(l, assignment[l]);
    }
    if (runs.size() <= stage_limit) return;

    std::size_t victim = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
      if (runs[i].cost < runs[victim].cost) victim = i;
    }
    std::size_t target;
    if (victim == 0) {
      target = 1;
    } else if (victim + 1 == runs.size()) {
      target = victim - 1;
    } else {
      target = runs[victim + 1].cost < runs[victim - 1].cost ? victim + 1 : victim - 1;
    }
    for (std::size_t l = runs[victim].first; l <= runs[victim].last; ++l) {
      assignment[l] = runs[target].unit;
    }
  }
}

namespace {

using Chromosome = std::vector<UnitId>;

Chromosome flatten(const Mapping& mapping) {
  Chromosome out;
  for (const auto& row : mapping.assignments) out.insert(out.end(), row.begin(), row.end());
  return out;
}

Mapping unflatten(const Chromosome& genes, const std::vector<std::size_t>& lengths) {
  Mapping mapping;
  std::size_t offset = 0;
  for (std::size_t len : lengths) {
    mapping.assignments.emplace_back(genes.begin() + static_cast<std::ptrdiff_t>(offset),
                                     genes.begin() + static_cast<std::ptrdiff_t>(offset + len));
    offset += len;
  }
  return mapping;
}

}  // namespace

Mapping ga_schedule(const Workload& workload, const DeviceProfile& profile,
                    const Evaluator& evaluator, const GaConfig& config) {
  if (workload.empty()) throw Error(Errc::InvalidArgument, "ga_schedule: empty workload");
  if (config.population < 2 || config.tournament < 1 || config.stage_limit < 1 ||
      config.elitism > config.population || config.mutation_rate < 0.0 ||
      config.mutation_rate > 1.0) {
    throw Error(Errc::InvalidArgument, "ga_schedule: invalid configuration");
  }
  validate(workload, profile);
  const CostTable costs(profile);
  const std::size_t n_units = profile.unit_count();
  std::vector<std::size_t> lengths;
  for (std::size_t m : workload.models()) lengths.push_back(profile.models[m].layer_count());
  const std::size_t n_genes = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});

  Rng rng(config.seed);
  std::vector<Chromosome> population;
  for (const auto& seed_mapping : config.initial_population) {
    if (population.size() == config.population) break;
    validate(seed_mapping, workload, profile);
    population.push_back(flatten(seed_mapping));
  }
  while (population.size() < config.population) {
    Mapping mapping;
    for (std::size_t len : lengths) {
      mapping.assignments.push_back(random_assignment(len, n_units, config.stage_limit, rng));
    }
    population.push_back(flatten(mapping));
  }

  std::map<Chromosome, double> cache;
  auto fitness_of = [&](const Chromosome& c) {
    auto it = cache.find(c);
    if (it != cache.end()) return it->second;
    const double f = evaluator.score(workload, unflatten(c, lengths));
    cache.emplace(c, f);
    return f;
  };
  auto repair = [&](Chromosome& c) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      std::vector<UnitId> row(c.begin() + static_cast<std::ptrdiff_t>(offset),
                              c.begin() + static_cast<std::ptrdiff_t>(offset + lengths[i]));
      const std::size_t model = workload[i];
      merge_stages(row, [&](std::size_t l, UnitId u) { return costs(model, l, u); },
                   config.stage_limit);
      std::copy(row.begin(), row.end(), c.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += lengths[i];
    }
  };

  std::vector<double> fitness(population.size());
  std::vector<std::size_t> ranking(population.size());
  auto rank = [&] {
    for (std::size_t i = 0; i < population.size(); ++i) fitness[i] = fitness_of(population[i]);
    std::iota(ranking.begin(), ranking.end(), 0);
    std::stable_sort(ranking.begin(), ranking.end(),
                     [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  };
  auto tournament = [&]() -> const Chromosome& {
    std::size_t winner = rng.below(population.size());
    for (std::size_t k = 1; k < config.tournament; ++k) {
      const std::size_t challenger = rng.below(population.size());
      if (fitness[challenger] > fitness[winner]) winner = challenger;
    }
    return population[winner];
  };

  for (std::size_t gen = 0; gen < config.generations; ++gen) {
    rank();
    std::vector<Chromosome> next;
    next.reserve(config.population);
    for (std::size_t e = 0; e < config.elitism; ++e) next.push_back(population[ranking[e]]);
    while (next.size() < config.population) {
      const Chromosome& a = tournament();
      const Chromosome& b = tournament();
      Chromosome child = a;
      if (n_genes > 1) {
        const std::size_t point = 1 + rng.below(n_genes - 1);
        std::copy(b.begin() + static_cast<std::ptrdiff_t>(point), b.end(),
                  child.begin() + static_cast<std::ptrdiff_t>(point));
      }
      for (auto& gene : child) {
        if (n_units > 1 && rng.uniform() < config.mutation_rate) {
          auto pick = static_cast<UnitId>(rng.below(n_units - 1));
          if (pick >= gene) ++pick;
          gene = pick;
        }
      }
      repair(child);
      next.push_back(std::move(child));
    }
    population = std::move(next);
  }
  rank();
  return unflatten(population[ranking.front()], lengths);
}

Mapping random_best(const Workload& workload, const DeviceProfile& profile, std::size_t n,
                    std::size_t max_stages, std::uint64_t seed) {
  if (n < 1) throw Error(Errc::InvalidArgument, "random_best: n must be >= 1");
  const CostTable costs(profile);
  Mapping best;
  double best_t = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    Mapping candidate = random_mapping(workload, profile, max_stages, Rng::derive(seed, i));
    const double t = simulate(workload, candidate, profile, costs).avg_throughput;
    if (t > best_t) {
      best_t = t;
      best = std::move(candidate);
    }
  }
  return best;
}

}  // namespace pipeboost
