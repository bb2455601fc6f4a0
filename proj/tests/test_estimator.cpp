#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pipeboost/dataset.hpp"
#include "pipeboost/embedding.hpp"
#include "pipeboost/error.hpp"
#include "pipeboost/estimator.hpp"
#include "pipeboost/rng.hpp"
#include "pipeboost/simulator.hpp"

namespace pb = pipeboost;

namespace {

pb::Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const pb::Error& e) {
    return e.code();
  }
  FAIL("expected a pipeboost::Error");
  return pb::Errc::Io;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "pipeboost_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

pb::DeviceProfile small_profile() {
  pb::GeneratorConfig cfg;
  cfg.min_layers = 2;
  cfg.max_layers = 5;
  return pb::generate_profile(6, 42, cfg);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("generate_dataset basics") {
  const auto profile = small_profile();
  pb::DatasetConfig cfg;
  cfg.count = 0;
  CHECK(pb::generate_dataset(profile, 7, cfg).empty());

  cfg.count = 60;
  const auto a = pb::generate_dataset(profile, 7, cfg);
  const auto b = pb::generate_dataset(profile, 7, cfg);
  REQUIRE(a.size() == 60);
  const auto embedding = pb::build_embedding(profile);
  std::vector<int> sizes(6, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].workload == b[i].workload);
    CHECK(a[i].mapping == b[i].mapping);
    CHECK(a[i].target_raw == b[i].target_raw);
    CHECK(a[i].workload.size() >= 1);
    CHECK(a[i].workload.size() <= 5);
    ++sizes[a[i].workload.size()];
    CHECK(pb::within_stage_limit(a[i].mapping, 3));
    const auto r = pb::simulate(a[i].workload, a[i].mapping, profile);
    for (std::size_t u = 0; u < 3; ++u) CHECK(a[i].target_raw[u] == r.per_unit_inf_s[u]);
    CHECK(a[i].input ==
          pb::masked_input(embedding, pb::build_mask(a[i].workload, a[i].mapping, profile)));
  }
  for (std::size_t s = 1; s <= 5; ++s) CHECK(sizes[s] > 0);

  CHECK(code_of([] { pb::generate_dataset(pb::generate_profile(4, 1), 1); }) ==
        pb::Errc::InvalidArgument);
}

TEST_CASE("preprocess_targets examples") {
  std::vector<pb::Sample> same(4);
  for (auto& s : same) s.target_raw = {5.0, 5.0, 5.0};
  const auto stats = pb::preprocess_targets(same, 4);
  for (const auto& s : same) CHECK(s.target == pb::Prediction{0.0, 0.0, 0.0});
  CHECK(stats.std == pb::Prediction{1.0, 1.0, 1.0});

  std::vector<pb::Sample> two(2);
  two[0].target_raw = {10.0, 10.0, 10.0};
  two[1].target_raw = {20.0, 20.0, 20.0};
  pb::preprocess_targets(two, 2);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(two[0].target[k] == doctest::Approx(0.0));
    CHECK(two[1].target[k] == doctest::Approx(1.0));
  }

  std::vector<pb::Sample> one(1);
  CHECK(code_of([&] { pb::preprocess_targets(one, 1); }) == pb::Errc::InvalidArgument);
}

TEST_CASE("preprocess_targets uses the training split only") {
  auto samples = pb::generate_dataset(small_profile(), 3, {50, 1, 5});
  const auto stats = pb::preprocess_targets(samples, 40);
  for (std::size_t i = 0; i < 40; ++i) {
    for (double v : samples[i].target) {
      CHECK(v >= -1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 40; ++i) mean += samples[i].target_raw[k];
    CHECK(stats.mean[k] == doctest::Approx(mean / 40.0));
  }
}

TEST_CASE("target transform round trip") {
  auto samples = pb::generate_dataset(small_profile(), 5, {50, 1, 5});
  const auto stats = pb::preprocess_targets(samples, 50);
  pb::Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    pb::Prediction raw;
    for (std::size_t k = 0; k < 3; ++k) raw[k] = rng.uniform(stats.min[k], stats.max[k]);
    const auto back = stats.inverse(stats.transform(raw));
    for (std::size_t k = 0; k < 3; ++k) CHECK(back[k] == doctest::Approx(raw[k]).epsilon(1e-9));
  }
}

TEST_CASE("dataset file round trip") {
  const auto profile = small_profile();
  const auto samples = pb::generate_dataset(profile, 9, {20, 1, 5});
  const auto path = temp_file("dataset.json");
  pb::save_dataset(profile, samples, path);
  const auto back = pb::load_dataset(profile, path);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].workload == samples[i].workload);
    CHECK(back[i].mapping == samples[i].mapping);
    CHECK(back[i].target_raw == samples[i].target_raw);
    CHECK(back[i].input == samples[i].input);
  }
}

TEST_CASE("training memorizes a single repeated sample") {
  const auto profile = small_profile();
  auto samples = pb::generate_dataset(profile, 1, {1, 2, 2});
  samples[0].target = {0.3, 0.6, 0.9};
  pb::Estimator est(samples[0].input.dims());
  est.net().init(4);
  pb::TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-4;
  cfg.train_count = 1;
  const auto history = pb::train(est, samples, pb::TargetStats{}, cfg);
  CHECK(history.train_loss.size() == 2000);
  CHECK(pb::evaluate_l1(est.net(), samples) < 1e-3);
}

TEST_CASE("training is deterministic and records history") {
  const auto profile = small_profile();
  auto samples = pb::generate_dataset(profile, 11, {80, 1, 5});
  const auto stats = pb::preprocess_targets(samples, 60);
  pb::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.train_count = 60;
  cfg.seed = 5;

  auto run = [&] {
    pb::Estimator est(samples[0].input.dims());
    est.net().init(cfg.seed);
    auto h = pb::train(est, samples, stats, cfg);
    return std::pair{est, h};
  };
  auto [a, ha] = run();
  auto [b, hb] = run();
  CHECK(std::equal(a.net().parameters().begin(), a.net().parameters().end(),
                   b.net().parameters().begin()));
  CHECK(ha.train_loss == hb.train_loss);
  CHECK(ha.val_loss.size() == 4);

  const auto csv = ha.to_csv();
  CHECK(csv.rfind("epoch,train_l1,val_l1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  const auto p1 = temp_file("w1.bin"), p2 = temp_file("w2.bin");
  a.save(p1);
  b.save(p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("train errors") {
  pb::Estimator est(pb::TensorDims{3, 2, 2});
  std::vector<pb::Sample> none;
  CHECK(code_of([&] { pb::train(est, none, pb::TargetStats{}, pb::TrainConfig{}); }) ==
        pb::Errc::InvalidArgument);
}

TEST_CASE("weights file round trip") {
  const auto profile = small_profile();
  auto samples = pb::generate_dataset(profile, 2, {30, 1, 5});
  const auto stats = pb::preprocess_targets(samples, 20);
  pb::Estimator est(samples[0].input.dims());
  est.net().init(3);
  pb::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.train_count = 20;
  pb::train(est, samples, stats, cfg);

  const auto path = temp_file("weights.bin");
  est.save(path);
  CHECK(std::filesystem::file_size(path) == 16 + 8 * 20003 + 8 * 12);
  const std::string bytes = file_bytes(path);
  CHECK(bytes.substr(0, 4) == "EST1");

  const auto back = pb::Estimator::load(path, samples[0].input.dims());
  CHECK(back.trained());
  CHECK(back.stats() == est.stats());
  CHECK(std::equal(back.net().parameters().begin(), back.net().parameters().end(),
                   est.net().parameters().begin()));

  const auto bad = temp_file("bad.bin");
  std::ofstream(bad, std::ios::binary) << "NOPE";
  CHECK(code_of([&] { pb::Estimator::load(bad, samples[0].input.dims()); }) == pb::Errc::Io);
  std::ofstream(bad, std::ios::binary) << bytes.substr(0, 100);
  CHECK(code_of([&] { pb::Estimator::load(bad, samples[0].input.dims()); }) == pb::Errc::Io);
}

TEST_CASE("predict_throughput") {
  const auto profile = small_profile();
  const auto embedding = pb::build_embedding(profile);
  const pb::Workload w({0, 3});
  const auto mapping = pb::random_mapping(w, profile, 3, 1);

  pb::Estimator untrained(embedding.dims());
  CHECK(code_of([&] { pb::predict_throughput(untrained, w, mapping, profile, embedding); }) ==
        pb::Errc::NotTrained);

  pb::EstimatorNet net(embedding.dims());
  net.init(8);
  const pb::Estimator est(net, pb::TargetStats{});
  const auto a = pb::predict_throughput(est, w, mapping, profile, embedding);
  CHECK(a == pb::predict_throughput(est, w, mapping, profile, embedding));

  // Large output biases exercise both ends of the clamp.
  auto params = net.parameters();
  params[params.size() - 3] = 50.0;
  params[params.size() - 2] = -50.0;
  params[params.size() - 1] = 0.5;
  const pb::Estimator biased(net, pb::TargetStats{});
  const auto b = pb::predict_throughput(biased, w, mapping, profile, embedding);
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 0.0);
  CHECK(b[2] >= 0.0);
  CHECK(b[2] <= 1.0);
}
