// pipeboost: profile generation, estimator training, scheduling and
// benchmark comparison from the command line.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pipeboost/baselines.hpp"
#include "pipeboost/compare.hpp"
#include "pipeboost/dataset.hpp"
#include "pipeboost/embedding.hpp"
#include "pipeboost/error.hpp"
#include "pipeboost/estimator.hpp"
#include "pipeboost/io.hpp"
#include "pipeboost/mcts.hpp"
#include "pipeboost/simulator.hpp"
#include "pipeboost/workload.hpp"

namespace pb = pipeboost;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --seed, falling back to $PIPEBOOST_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PIPEBOOST_SEED")) {
    try {
      std::size_t used = 0;
      const auto value = std::stoull(env, &used);
      if (used == std::string(env).size()) return value;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("PIPEBOOST_SEED is not an unsigned integer: '") + env + "'");
  }
  return 0;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    pb::write_text(text, out);
  }
}

void require_format(const std::string& format) {
  if (format != "json" && format != "csv") {
    throw UsageError("--format must be json or csv, got '" + format + "'");
  }
}

pb::Workload parse_mix(const pb::DeviceProfile& profile, const std::string& spec) {
  const auto names = split_csv(spec);
  if (names.empty()) throw UsageError("empty --mix");
  try {
    return pb::workload_from_names(profile, names);
  } catch (const pb::Error& e) {
    throw UsageError(std::string("--mix: ") + e.what());
  }
}

std::string report_csv(const pb::ThroughputReport& r) {
  std::ostringstream out;
  out.precision(12);
  out << "kind,index,inf_s,utilization\n";
  for (std::size_t i = 0; i < r.per_dnn_inf_s.size(); ++i) {
    out << "dnn," << i << ',' << r.per_dnn_inf_s[i] << ",\n";
  }
  for (std::size_t u = 0; u < r.per_unit_inf_s.size(); ++u) {
    out << "unit," << u << ',' << r.per_unit_inf_s[u] << ',' << r.unit_utilization[u] << '\n';
  }
  out << "avg,," << r.avg_throughput << ",\n";
  out << "theta,,," << r.theta << '\n';
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipeboost: multi-DNN layer scheduling for heterogeneous devices"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  std::optional<std::uint64_t> seed_flag;
  std::string out;
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "RNG seed (default: $PIPEBOOST_SEED or 0)");
    cmd->add_option("--out", out, "Output path ('-' or empty: stdout)");
  };

  // genprofile
  auto* genprofile = app.add_subcommand("genprofile", "Generate a synthetic device profile");
  std::size_t num_models = 11;
  pb::GeneratorConfig gen;
  std::vector<double> factors;
  bool no_jitter = false;
  genprofile->add_option("--models", num_models, "Number of DNN models")->capture_default_str();
  genprofile->add_option("--min-layers", gen.min_layers)->capture_default_str();
  genprofile->add_option("--max-layers", gen.max_layers)->capture_default_str();
  genprofile->add_option("--factors", factors, "gpu,big,little cost multipliers")
      ->delimiter(',')
      ->expected(3);
  genprofile->add_option("--transfer-ms", gen.transfer_ms)->capture_default_str();
  genprofile->add_flag("--no-jitter", no_jitter, "Disable per-layer unit affinity jitter");
  common(genprofile);

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Generate a labelled estimator dataset");
  std::string profile_path;
  pb::DatasetConfig dcfg;
  dataset->add_option("--profile", profile_path)->required();
  dataset->add_option("--count", dcfg.count)->capture_default_str();
  common(dataset);

  // train
  auto* train = app.add_subcommand("train", "Train the throughput estimator");
  std::string dataset_path, history_path;
  pb::TrainConfig tcfg;
  train->add_option("--profile", profile_path)->required();
  train->add_option("--dataset", dataset_path)->required();
  train->add_option("--epochs", tcfg.epochs)->capture_default_str();
  train->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
  train->add_option("--lr", tcfg.learning_rate)->capture_default_str();
  train->add_option("--train-count", tcfg.train_count, "Leading samples used for training")
      ->capture_default_str();
  train->add_option("--history", history_path, "Per-epoch loss CSV (default: <out>.history.csv)");
  common(train);

  // schedule
  auto* sched = app.add_subcommand("schedule", "Map a mix with MCTS");
  std::string weights_path, mix_spec, stats_path, evaluator_name = "estimator";
  pb::MctsConfig mcfg;
  bool per_mix = false;
  sched->add_option("--profile", profile_path)->required();
  sched->add_option("--weights", weights_path, "Estimator weights");
  sched->add_option("--mix", mix_spec, "Comma-separated model names")->required();
  sched->add_option("--budget", mcfg.budget)->capture_default_str();
  sched->add_option("--depth", mcfg.max_depth)->capture_default_str();
  sched->add_option("--stage-limit", mcfg.stage_limit)->capture_default_str();
  sched->add_option("--uct-c", mcfg.uct_c)->capture_default_str();
  sched->add_flag("--per-mix", per_mix, "Apply the stage limit to the whole mix");
  sched->add_option("--evaluator", evaluator_name, "estimator|simulator")->capture_default_str();
  sched->add_option("--stats", stats_path, "Search statistics JSON");
  common(sched);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Score a mapping file with the simulator");
  std::string mapping_path, format = "json";
  sim->add_option("--profile", profile_path)->required();
  sim->add_option("--mapping", mapping_path)->required();
  sim->add_option("--format", format, "json|csv")->capture_default_str();
  common(sim);

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare scheduling methods on mixes");
  std::vector<std::string> mix_specs;
  std::string methods_spec = "gpu,mosaic,ga,mcts", ga_evaluator = "estimator";
  std::size_t random_mixes = 0, mix_size = 4;
  pb::CompareOptions copts;
  cmp->add_option("--profile", profile_path)->required();
  cmp->add_option("--weights", weights_path);
  cmp->add_option("--mix", mix_specs, "Comma-separated model names (repeatable)");
  cmp->add_option("--random-mixes", random_mixes, "Number of random mixes");
  cmp->add_option("--mix-size", mix_size)->capture_default_str();
  cmp->add_option("--methods", methods_spec)->capture_default_str();
  cmp->add_option("--random-n", copts.random_n)->capture_default_str();
  cmp->add_option("--budget", copts.mcts.budget)->capture_default_str();
  cmp->add_option("--depth", copts.mcts.max_depth)->capture_default_str();
  cmp->add_option("--generations", copts.ga.generations)->capture_default_str();
  cmp->add_option("--population", copts.ga.population)->capture_default_str();
  cmp->add_option("--ga-evaluator", ga_evaluator, "estimator|simulator")->capture_default_str();
  cmp->add_option("--jobs", copts.jobs)->capture_default_str();
  cmp->add_option("--format", format, "json|csv")->capture_default_str();
  common(cmp);

  // count
  auto* count = app.add_subcommand("count", "Mapping-space combinatorics");
  std::uint64_t layers = 0, cuts = 0, units = 0, max_stages = 0;
  count->add_option("--layers", layers)->required();
  auto* cuts_opt = count->add_option("--cuts", cuts, "Print C(layers, cuts)");
  auto* units_opt = count->add_option("--units", units, "Count stage-bounded assignments");
  count->add_option("--max-stages", max_stages)->needs(units_opt);
  cuts_opt->excludes(units_opt);
  common(count);

  // embed
  auto* embed = app.add_subcommand("embed", "Dump the embedding tensor (EMB1 + JSON sidecar)");
  embed->add_option("--profile", profile_path)->required();
  common(embed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::uint64_t seed = resolve_seed(seed_flag);

    if (*genprofile) {
      if (!factors.empty()) std::copy(factors.begin(), factors.end(), gen.unit_factors.begin());
      if (no_jitter) gen.jitter_lo = gen.jitter_hi = 1.0;
      const auto profile = pb::generate_profile(num_models, seed, gen);
      emit(pb::profile_to_json(profile).dump(2) + "\n", out);
    } else if (*dataset) {
      const auto profile = pb::load_profile(profile_path);
      const auto samples = pb::generate_dataset(profile, seed, dcfg);
      if (out.empty()) throw UsageError("dataset: --out is required");
      pb::save_dataset(profile, samples, out);
    } else if (*train) {
      if (out.empty()) throw UsageError("train: --out is required");
      const auto profile = pb::load_profile(profile_path);
      auto samples = pb::load_dataset(profile, dataset_path);
      if (tcfg.train_count < 2 || tcfg.train_count > samples.size()) {
        throw UsageError("train: --train-count must be in [2, dataset size]");
      }
      const auto stats = pb::preprocess_targets(samples, tcfg.train_count);
      tcfg.seed = seed;
      const auto embedding = pb::build_embedding(profile);
      pb::Estimator estimator(embedding.dims());
      estimator.net().init(seed);
      const auto history = pb::train(estimator, samples, stats, tcfg);
      estimator.save(out);
      pb::write_text(history.to_csv(), history_path.empty() ? out + ".history.csv" : history_path);
      std::cerr << "final train L1 " << history.train_loss.back() << ", val L1 "
                << history.val_loss.back() << "\n";
    } else if (*sched) {
      const auto profile = pb::load_profile(profile_path);
      const auto workload = parse_mix(profile, mix_spec);
      mcfg.seed = seed;
      mcfg.scope = per_mix ? pb::StageScope::PerMix : pb::StageScope::PerDnn;
      const auto embedding = pb::build_embedding(profile);
      std::optional<pb::Estimator> estimator;
      std::unique_ptr<pb::Evaluator> evaluator;
      if (evaluator_name == "estimator") {
        if (weights_path.empty()) throw UsageError("schedule: --weights is required");
        estimator.emplace(pb::Estimator::load(weights_path, embedding.dims()));
        evaluator = std::make_unique<pb::EstimatorEvaluator>(*estimator, profile, embedding);
      } else if (evaluator_name == "simulator") {
        evaluator = std::make_unique<pb::SimulatorEvaluator>(profile);
      } else {
        throw UsageError("--evaluator must be estimator or simulator");
      }
      const auto result = pb::schedule(workload, profile, *evaluator, mcfg);
      emit(pb::mapping_to_json(profile, workload, result.mapping).dump(2) + "\n", out);
      if (!stats_path.empty()) pb::write_json(result.stats.to_json(), stats_path);
    } else if (*sim) {
      require_format(format);
      const auto profile = pb::load_profile(profile_path);
      const auto [workload, mapping] = pb::load_mapping(profile, mapping_path);
      const auto report = pb::simulate(workload, mapping, profile);
      emit(format == "json" ? pb::report_to_json(report).dump(2) + "\n" : report_csv(report), out);
    } else if (*cmp) {
      require_format(format);
      const auto profile = pb::load_profile(profile_path);
      copts.methods.clear();
      for (const auto& name : split_csv(methods_spec)) {
        try {
          copts.methods.push_back(pb::method_from_string(name));
        } catch (const pb::Error& e) {
          throw UsageError(e.what());
        }
      }
      if (copts.methods.empty()) throw UsageError("--methods is empty");
      if (ga_evaluator != "estimator" && ga_evaluator != "simulator") {
        throw UsageError("--ga-evaluator must be estimator or simulator");
      }
      copts.ga_uses_simulator = ga_evaluator == "simulator";
      copts.seed = seed;
      std::vector<pb::Workload> mixes;
      for (const auto& spec : mix_specs) mixes.push_back(parse_mix(profile, spec));
      if (random_mixes > 0) {
        auto extra = pb::random_mixes(profile, random_mixes, mix_size, seed);
        mixes.insert(mixes.end(), extra.begin(), extra.end());
      }
      if (mixes.empty()) throw UsageError("compare: give --mix or --random-mixes");
      std::optional<pb::Estimator> estimator;
      if (!weights_path.empty()) {
        estimator.emplace(pb::Estimator::load(weights_path, pb::build_embedding(profile).dims()));
        copts.estimator = &*estimator;
      }
      const auto report = pb::run_compare(profile, mixes, copts);
      emit(format == "csv" ? report.to_csv() : report.to_json().dump(2) + "\n", out);
    } else if (*count) {
      std::uint64_t value = 0;
      if (*cuts_opt) {
        value = pb::binomial(layers, cuts);
      } else if (*units_opt) {
        value = pb::count_assignments(layers, units, max_stages == 0 ? units : max_stages);
      } else {
        throw UsageError("count: give --cuts or --units");
      }
      emit(std::to_string(value) + "\n", out);
    } else if (*embed) {
      if (out.empty()) throw UsageError("embed: --out is required");
      const auto profile = pb::load_profile(profile_path);
      pb::dump_embedding(pb::build_embedding(profile), profile, out);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const pb::Error& e) {
    std::cerr << "error (" << pb::to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
