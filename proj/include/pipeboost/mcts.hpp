#pragma once

// Monte Carlo Tree Search over per-layer unit assignments. Models are
// scheduled in workload order, layers left to right; one action per
// compute unit. Exceeding the stage limit loses, assigning every layer
// within it wins.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pipeboost/evaluator.hpp"
#include "pipeboost/rng.hpp"
#include "pipeboost/simulator.hpp"

namespace pipeboost {

enum class SearchStatus { InProgress, Win, Lose };

/// Whether the stage limit bounds each model or the sum over the mix.
enum class StageScope { PerDnn, PerMix };

struct MctsConfig {
  std::size_t budget = 500;
  std::size_t max_depth = 100;
  std::size_t stage_limit = 3;
  double uct_c = std::sqrt(2.0);
  double win_bonus = 1.0;
  double lose_reward = 0.0;
  StageScope scope = StageScope::PerDnn;
  std::uint64_t seed = 0;
};

class SearchState {
 public:
  SearchState(const Workload& workload, const DeviceProfile& profile,
              std::size_t stage_limit, StageScope scope = StageScope::PerDnn);

  SearchStatus status() const { return status_; }
  bool terminal() const { return status_ != SearchStatus::InProgress; }

  /// Units that do not push the current model (or mix) over the stage
  /// limit, in unit-id order. Throws on a terminal state.
  std::vector<UnitId> actions() const;

  /// Assigns the next layer. Any in-range unit is accepted; one that
  /// breaks the stage limit yields a Lose state.
  SearchState apply(UnitId action) const;
  void advance(UnitId action);

  /// (model position, layer) of the next decision.
  std::pair<std::size_t, std::size_t> cursor() const { return {model_, layer_}; }
  /// Layers assigned so far.
  std::size_t depth() const { return depth_; }
  std::size_t stages(std::size_t model) const { return stage_counts_[model]; }

  const Workload& workload() const { return workload_; }
  /// Rows of models not reached yet are empty; a started model's row is
  /// pre-filled with its first unit and overwritten layer by layer.
  const std::vector<std::vector<UnitId>>& assignment() const { return assignment_; }
  Mapping mapping() const { return Mapping{assignment_}; }

  /// The unit that keeps the stage count unchanged where possible.
  UnitId continuation_unit() const;

 private:
  void refresh_status();

  Workload workload_;
  std::vector<std::size_t> layer_counts_;
  std::size_t n_units_;
  std::size_t stage_limit_;
  StageScope scope_;
  std::vector<std::vector<UnitId>> assignment_;
  std::vector<std::size_t> stage_counts_;
  std::size_t total_stages_ = 0;
  std::size_t model_ = 0;
  std::size_t layer_ = 0;
  std::size_t depth_ = 0;
  UnitId last_unit_ = 0;
  SearchStatus status_ = SearchStatus::InProgress;
};

struct Rollout {
  SearchState terminal;
  std::vector<UnitId> trajectory;
};

/// Uniformly random legal actions until a terminal state or max_depth
/// assigned layers; past the cap the remaining layers continue the
/// current unit.
Rollout rollout(const SearchState& start, Rng& rng, std::size_t max_depth);

/// lose_reward for Lose; win_bonus + evaluator score for Win.
double evaluate(const SearchState& terminal, const Evaluator& evaluator,
                const MctsConfig& config);

struct SearchStats {
  std::size_t iterations = 0;
  double best_reward = 0.0;
  std::size_t wins = 0;
  std::size_t losses = 0;
  double elapsed_ms = 0.0;
  std::size_t root_visits = 0;
  std::size_t tree_nodes = 0;
  std::vector<double> best_reward_trace;  // best-so-far after each iteration

  /// {iterations, best_reward, wins, losses, elapsed_ms}
  nlohmann::json to_json() const;
};

struct ScheduleResult {
  Mapping mapping;
  SearchStats stats;
};

/// Runs `budget` select/expand/rollout/evaluate/backpropagate iterations
/// and returns the best winning terminal seen (earliest on ties).
ScheduleResult schedule(const Workload& workload, const DeviceProfile& profile,
                        const Evaluator& evaluator, const MctsConfig& config = {});

}  // namespace pipeboost
