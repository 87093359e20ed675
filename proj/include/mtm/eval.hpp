#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "mtm/policy.hpp"
#include "mtm/tasks.hpp"
#include "mtm/trainer.hpp"

namespace mtm {

inline constexpr std::size_t kEvalSetSize = 100;

struct EvalDataset {
  TaskKind kind = TaskKind::Copy;
  int length = 0;
  std::uint64_t seed = 0;
  std::vector<TaskInstance> instances;
};

/// 100 instances at exactly `length`; instance i is generated from its own
/// seed derived from (seed, i).
EvalDataset build_eval_set(TaskKind kind, int length, std::uint64_t seed, std::size_t count = kEvalSetSize);

/// Header line `# mtm-evalset v1 kind=<k> length=<n> seed=<s> count=<c>`, then
/// one instance line per row.
void save_eval_set(const std::filesystem::path& path, const EvalDataset& dataset);
EvalDataset load_eval_set(const std::filesystem::path& path);

struct EvalReport {
  TaskKind kind = TaskKind::Copy;
  int length = 0;
  std::size_t passes = 0;
  std::size_t total = 0;
  double success_rate = 0;
  std::optional<double> best_so_far;
  std::vector<bool> passed;
  std::uint64_t version = 0;
  std::int64_t step = 0;
};

struct EvalOptions {
  double t_max_multiplier = 8.0;
  bool greedy = false;
  std::uint64_t seed = 0;  // policy sampling stream
  AblationFlags ablations;
};

/// Rolls out every instance; an instance passes iff the halting check fires.
template <typename T>
EvalReport evaluate(const PolicyParams<T>& params, const EvalDataset& dataset, const EvalOptions& options);

/// Evaluation with a hand-written controller; `make` builds one per episode.
using ScriptedPolicyFactory = std::function<ActionSource(const TaskInstance&)>;
EvalReport evaluate_scripted(const EvalDataset& dataset, const ScriptedPolicyFactory& make, double t_max_multiplier);

/// Exact ratio passes / total.
double success_rate(std::size_t passes, std::size_t total);

/// Running maximum of periodic evaluations.
class BestTracker {
 public:
  double add(double rate);
  std::optional<double> best() const { return best_; }

 private:
  std::optional<double> best_;
};

std::optional<double> track_best(std::span<const double> rates);

struct TrialSummary {
  std::vector<double> rates;
  double mean = 0;
  double stddev = 0;  // sample standard deviation; 0 for a single trial
  std::size_t perfect = 0;
  bool single_trial = false;
};

TrialSummary summarize_trials(std::span<const double> best_rates);

nlohmann::json report_to_json(const EvalReport& report);
nlohmann::json summary_to_json(const TrialSummary& summary);

}  // namespace mtm
