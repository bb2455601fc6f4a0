// Properties of a fully trained estimator and the search it drives.
#include <doctest.h>

#include "pipeboost/baselines.hpp"
#include "pipeboost/compare.hpp"
#include "pipeboost/evaluator.hpp"
#include "pipeboost/rng.hpp"
#include "pipeboost/simulator.hpp"
#include "test_support.hpp"

namespace pb = pipeboost;

namespace {

struct Trained {
  pb::DeviceProfile profile = pb::testing::saturating_profile();
  pb::EmbeddingTensor embedding = pb::build_embedding(profile);
  pb::Estimator estimator = pb::testing::train_standard(profile);
};

const Trained& trained() {
  static const Trained t;
  return t;
}

double predicted_mean(const Trained& t, const pb::Workload& w, const pb::Mapping& m) {
  const auto p = pb::predict_throughput(t.estimator, w, m, t.profile, t.embedding);
  return (p[0] + p[1] + p[2]) / 3.0;
}

}  // namespace

TEST_CASE("predicted mean ranks held-out mappings like simulated T") {
  const auto& t = trained();
  const auto samples = pb::generate_dataset(t.profile, 7);
  std::vector<double> predicted, simulated;
  for (std::size_t i = 400; i < samples.size(); ++i) {
    predicted.push_back(predicted_mean(t, samples[i].workload, samples[i].mapping));
    simulated.push_back(pb::simulate(samples[i].workload, samples[i].mapping, t.profile).avg_throughput);
  }
  const double rho = pb::testing::spearman(predicted, simulated);
  MESSAGE("held-out spearman " << rho);
  CHECK(rho >= 0.8);
}

TEST_CASE("single-layer flips change the prediction") {
  const auto& t = trained();
  pb::Rng rng(21);
  std::size_t changed = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::size_t> pool(t.profile.model_count());
    std::iota(pool.begin(), pool.end(), 0);
    rng.shuffle(pool);
    const pb::Workload w(std::vector<std::size_t>(pool.begin(), pool.begin() + 1 + rng.below(5)));
    const auto m = pb::random_mapping(w, t.profile, 3, rng.next());
    auto flipped = m;
    const std::size_t model = rng.below(w.size());
    auto& row = flipped.assignments[model];
    const std::size_t layer = rng.below(row.size());
    row[layer] = static_cast<pb::UnitId>((row[layer] + 1 + rng.below(2)) % 3);

    const auto before = pb::masked_input(t.embedding, pb::build_mask(w, m, t.profile));
    const auto after = pb::masked_input(t.embedding, pb::build_mask(w, flipped, t.profile));
    CHECK(before != after);
    const auto a = t.estimator.net().forward(before);
    const auto b = t.estimator.net().forward(after);
    if (a != b) ++changed;
  }
  CHECK(changed >= 95);
}

TEST_CASE("mcts beats the contention-blind linear baseline on saturating mixes") {
  const auto& t = trained();
  const auto mixes = pb::random_mixes(t.profile, 5, 4, 42);
  pb::CompareOptions o;
  o.methods = {pb::Method::Gpu, pb::Method::Mosaic, pb::Method::Mcts};
  o.estimator = &t.estimator;
  o.seed = 42;
  const auto report = pb::run_compare(t.profile, mixes, o);
  double mosaic = 0.0, mcts = 0.0;
  for (const auto& row : report.rows) {
    if (row.method == pb::Method::Mosaic) mosaic += row.normalized / 5.0;
    if (row.method == pb::Method::Mcts) mcts += row.normalized / 5.0;
  }
  MESSAGE("mean normalized T: mosaic " << mosaic << ", mcts " << mcts);
  CHECK(mcts > mosaic);
}
