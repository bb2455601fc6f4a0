#include "pipeboost/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pipeboost/error.hpp"
#include "pipeboost/rng.hpp"

namespace pipeboost {

namespace {

constexpr char kWeightsMagic[4] = {'E', 'S', 'T', '1'};
constexpr std::uint32_t kWeightsVersion = 1;

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw Error(Errc::Io, "weights file is truncated");
    v |= static_cast<std::uint64_t>(c & 0xff) << (8 * i);
  }
  return v;
}

}  // namespace

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_l1,val_l1\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out << (e + 1) << ',' << train_loss[e] << ',' << (e < val_loss.size() ? val_loss[e] : 0.0)
        << '\n';
  }
  return out.str();
}

void Estimator::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  out.write(kWeightsMagic, 4);
  put_le(out, kWeightsVersion, 4);
  put_le(out, net_.parameter_count(), 8);
  for (double p : net_.parameters()) put_le(out, std::bit_cast<std::uint64_t>(p), 8);
  for (const auto* block : {&stats_.mean, &stats_.std, &stats_.min, &stats_.max}) {
    for (double v : *block) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  if (!out) throw Error(Errc::Io, "write to '" + path.string() + "' failed");
}

Estimator Estimator::load(const std::filesystem::path& path, TensorDims input_dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "' for reading");
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kWeightsMagic)) {
    throw Error(Errc::Io, "'" + path.string() + "' is not an EST1 weights file");
  }
  const auto version = get_le(in, 4);
  if (version != kWeightsVersion) {
    throw Error(Errc::Io, "'" + path.string() + "' has unsupported version " +
                              std::to_string(version));
  }
  EstimatorNet net(input_dims);
  const auto count = get_le(in, 8);
  if (count != net.parameter_count()) {
    throw Error(Errc::Io, "'" + path.string() + "' holds " + std::to_string(count) +
                              " parameters, expected " +
                              std::to_string(net.parameter_count()));
  }
  for (double& p : net.parameters()) p = std::bit_cast<double>(get_le(in, 8));
  TargetStats stats;
  for (auto* block : {&stats.mean, &stats.std, &stats.min, &stats.max}) {
    for (double& v : *block) v = std::bit_cast<double>(get_le(in, 8));
  }
  return Estimator(std::move(net), stats);
}

double evaluate_l1(const EstimatorNet& net, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  EstimatorNet::Trace trace;
  for (const auto& s : samples) {
    const Prediction out = net.forward(s.input, trace);
    for (std::size_t k = 0; k < 3; ++k) sum += std::abs(out[k] - s.target[k]);
  }
  return sum / static_cast<double>(3 * samples.size());
}

TrainHistory train(Estimator& estimator, std::span<const Sample> samples,
                   const TargetStats& stats, const TrainConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1) {
    throw Error(Errc::InvalidArgument, "train: epochs and batch_size must be >= 1");
  }
  const std::size_t n_train = std::min(config.train_count, samples.size());
  if (n_train == 0) throw Error(Errc::InvalidArgument, "train: empty training set");
  const auto train_set = samples.first(n_train);
  const auto val_set = samples.subspan(n_train);

  EstimatorNet& net = estimator.net();
  const std::size_t n_params = net.parameter_count();
  std::vector<double> grad(n_params), m1(n_params, 0.0), m2(n_params, 0.0);
  std::vector<std::size_t> order(n_train);
  std::vector<const EmbeddingTensor*> batch_inputs;
  std::vector<Prediction> batch_targets;
  std::uint64_t step = 0;

  TrainHistory history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(Rng::derive(config.seed, epoch));
    shuffler.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n_train; begin += config.batch_size) {
      const std::size_t end = std::min(n_train, begin + config.batch_size);
      batch_inputs.clear();
      batch_targets.clear();
      for (std::size_t i = begin; i < end; ++i) {
        batch_inputs.push_back(&train_set[order[i]].input);
        batch_targets.push_back(train_set[order[i]].target);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = l1_loss_and_gradient(net, batch_inputs, batch_targets, grad);
      epoch_loss += loss * static_cast<double>(end - begin);

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto params = net.parameters();
      for (std::size_t p = 0; p < n_params; ++p) {
        m1[p] = config.beta1 * m1[p] + (1.0 - config.beta1) * grad[p];
        m2[p] = config.beta2 * m2[p] + (1.0 - config.beta2) * grad[p] * grad[p];
        params[p] -= config.learning_rate * (m1[p] / c1) /
                     (std::sqrt(m2[p] / c2) + config.epsilon);
      }
    }
    history.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
    history.val_loss.push_back(val_set.empty() ? 0.0 : evaluate_l1(net, val_set));
  }
  estimator.set_trained(stats);
  return history;
}

Prediction predict_throughput(const Estimator& estimator, const Workload& workload,
                              const Mapping& mapping, const DeviceProfile& profile,
                              const EmbeddingTensor& embedding) {
  if (!estimator.trained()) {
    throw Error(Errc::NotTrained, "predict_throughput: estimator is not trained");
  }
  auto out = estimator.net().forward(
      masked_input(embedding, build_mask(workload, mapping, profile)));
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace pipeboost
