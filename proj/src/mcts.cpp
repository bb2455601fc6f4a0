#include "pipeboost/mcts.hpp"

#include <chrono>
#include <limits>

#include "pipeboost/error.hpp"

namespace pipeboost {

SearchState::SearchState(const Workload& workload, const DeviceProfile& profile,
                         std::size_t stage_limit, StageScope scope)
    : workload_(workload),
      n_units_(profile.unit_count()),
      stage_limit_(stage_limit),
      scope_(scope) {
  if (workload.empty()) throw Error(Errc::InvalidArgument, "search over an empty workload");
  if (stage_limit < 1) throw Error(Errc::InvalidArgument, "stage_limit must be >= 1");
  validate(workload, profile);
  for (std::size_t m : workload.models()) {
    layer_counts_.push_back(profile.models[m].layer_count());
  }
  assignment_.resize(workload.size());
  stage_counts_.assign(workload.size(), 0);
  refresh_status();
}

std::vector<UnitId> SearchState::actions() const {
  if (terminal()) throw Error(Errc::InvalidArgument, "actions() on a terminal state");
  std::vector<UnitId> out;
  for (std::size_t u = 0; u < n_units_; ++u) {
    const auto unit = static_cast<UnitId>(u);
    const std::size_t added = (layer_ == 0 || unit != last_unit_) ? 1 : 0;
    const std::size_t model_stages = (layer_ == 0 ? 0 : stage_counts_[model_]) + added;
    const std::size_t count =
        scope_ == StageScope::PerDnn ? model_stages : total_stages_ + added;
    if (count <= stage_limit_) out.push_back(unit);
  }
  return out;
}

SearchState SearchState::apply(UnitId action) const {
  SearchState next = *this;
  next.advance(action);
  return next;
}

void SearchState::advance(UnitId action) {
  if (terminal()) throw Error(Errc::InvalidArgument, "apply() on a terminal state");
  if (action < 0 || static_cast<std::size_t>(action) >= n_units_) {
    throw Error(Errc::InvalidArgument, "illegal action " + std::to_string(action));
  }
  auto& row = assignment_[model_];
  if (layer_ == 0) {
    // The first choice stands for the whole model until overwritten.
    row.assign(layer_counts_[model_], action);
    stage_counts_[model_] = 1;
    ++total_stages_;
  } else if (action != last_unit_) {
    ++stage_counts_[model_];
    ++total_stages_;
  }
  row[layer_] = action;
  last_unit_ = action;
  ++depth_;

  const bool over = scope_ == StageScope::PerDnn ? stage_counts_[model_] > stage_limit_
                                                 : total_stages_ > stage_limit_;
  if (++layer_ == layer_counts_[model_]) {
    ++model_;
    layer_ = 0;
  }
  if (over) {
    status_ = SearchStatus::Lose;
    return;
  }
  refresh_status();
}

void SearchState::refresh_status() {
  if (model_ == layer_counts_.size()) {
    status_ = SearchStatus::Win;
    return;
  }
  status_ = SearchStatus::InProgress;
  if (actions().empty()) status_ = SearchStatus::Lose;
}

UnitId SearchState::continuation_unit() const { return last_unit_; }

Rollout rollout(const SearchState& start, Rng& rng, std::size_t max_depth) {
  Rollout out{start, {}};
  SearchState& state = out.terminal;
  while (!state.terminal() && state.depth() < max_depth) {
    const auto legal = state.actions();
    const UnitId action = legal[rng.below(legal.size())];
    state.advance(action);
    out.trajectory.push_back(action);
  }
  while (!state.terminal()) {
    const UnitId action = state.continuation_unit();
    state.advance(action);
    out.trajectory.push_back(action);
  }
  return out;
}

double evaluate(const SearchState& terminal, const Evaluator& evaluator,
                const MctsConfig& config) {
  switch (terminal.status()) {
    case SearchStatus::Lose: return config.lose_reward;
    case SearchStatus::Win:
      return config.win_bonus + evaluator.score(terminal.workload(), terminal.mapping());
    case SearchStatus::InProgress: break;
  }
  throw Error(Errc::InvalidArgument, "evaluate() needs a terminal state");
}

nlohmann::json SearchStats::to_json() const {
  return {{"iterations", iterations},
          {"best_reward", best_reward},
          {"wins", wins},
          {"losses", losses},
          {"elapsed_ms", elapsed_ms}};
}

namespace {

struct Node {
  SearchState state;
  std::size_t parent;
  std::vector<UnitId> untried;
  std::vector<std::size_t> children;
  std::size_t visits = 0;
  double total = 0.0;
};

constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

}  // namespace

ScheduleResult schedule(const Workload& workload, const DeviceProfile& profile,
                        const Evaluator& evaluator, const MctsConfig& config) {
  if (workload.empty()) throw Error(Errc::InvalidArgument, "schedule: empty workload");
  if (config.budget < 1) throw Error(Errc::InvalidArgument, "schedule: budget must be >= 1");
  const auto started = std::chrono::steady_clock::now();

  std::vector<Node> tree;
  {
    SearchState root(workload, profile, config.stage_limit, config.scope);
    auto untried = root.terminal() ? std::vector<UnitId>{} : root.actions();
    tree.push_back(Node{std::move(root), kNoParent, std::move(untried), {}});
  }

  Rng rng(config.seed);
  ScheduleResult result;
  auto& stats = result.stats;
  bool found = false;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> path;

  for (std::size_t it = 0; it < config.budget; ++it) {
    path.assign(1, 0);
    std::size_t idx = 0;

    // Selection: descend through fully expanded nodes by UCT.
    while (!tree[idx].state.terminal() && tree[idx].untried.empty()) {
      const double log_n = std::log(static_cast<double>(tree[idx].visits));
      std::size_t chosen = tree[idx].children.front();
      double chosen_value = -std::numeric_limits<double>::infinity();
      for (std::size_t c : tree[idx].children) {
        const Node& child = tree[c];
        const auto n = static_cast<double>(child.visits);
        const double value = child.total / n + config.uct_c * std::sqrt(log_n / n);
        if (value > chosen_value) {
          chosen_value = value;
          chosen = c;
        }
      }
      idx = chosen;
      path.push_back(idx);
    }

    // Expansion: next untried action in unit-id order.
    if (!tree[idx].state.terminal()) {
      const UnitId action = tree[idx].untried.front();
      tree[idx].untried.erase(tree[idx].untried.begin());
      SearchState child_state = tree[idx].state.apply(action);
      auto untried = child_state.terminal() ? std::vector<UnitId>{} : child_state.actions();
      const std::size_t child = tree.size();
      tree.push_back(Node{std::move(child_state), idx, std::move(untried), {}});
      tree[idx].children.push_back(child);
      idx = child;
      path.push_back(idx);
    }

    const SearchState terminal = tree[idx].state.terminal()
                                     ? tree[idx].state
                                     : rollout(tree[idx].state, rng, config.max_depth).terminal;
    const double reward = evaluate(terminal, evaluator, config);
    if (terminal.status() == SearchStatus::Win) {
      ++stats.wins;
      if (reward > best) {
        best = reward;
        result.mapping = terminal.mapping();
        found = true;
      }
    } else {
      ++stats.losses;
    }
    stats.best_reward_trace.push_back(found ? best : config.lose_reward);

    for (std::size_t n : path) {
      tree[n].visits += 1;
      tree[n].total += reward;
    }
  }

  if (!found) {
    throw Error(Errc::InvalidArgument, "schedule: search found no winning mapping");
  }
  stats.iterations = config.budget;
  stats.best_reward = best;
  stats.root_visits = tree.front().visits;
  stats.tree_nodes = tree.size();
  stats.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
  return result;
}

}  // namespace pipeboost
