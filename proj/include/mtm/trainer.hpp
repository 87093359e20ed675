#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtm/checkpoint.hpp"
#include "mtm/context.hpp"
#include "mtm/machine.hpp"
#include "mtm/optim.hpp"
#include "mtm/policy.hpp"
#include "mtm/tasks.hpp"

namespace mtm {

enum class RewardScheme { Sparse, Dense };
enum class Precision { Float64, Float32 };

/// Training configuration. The JSON keys are the field names below; nested
/// objects: "ablations" {no_tape_values, no_action_history,
/// no_history_tape_values}, "curriculum" {c_min, c_max, ramp_start,
/// ramp_end}, "network" {conv_channels, queries, trunk, lstm_hidden}.
struct TrainConfig {
  TaskKind task = TaskKind::Copy;
  EncoderKind encoder = EncoderKind::Attention;
  AblationFlags ablations;
  double t_max_multiplier = 8.0;  // T_max = ceil(multiplier * L)
  RewardScheme reward = RewardScheme::Sparse;
  double step_cost = 0.01;
  double gamma = 0.99;
  double entropy_weight = 0.01;
  double value_weight = 0.5;
  double learning_rate = 1e-3;
  double max_grad_norm = 0.0;
  int batch_size = 16;         // episodes per update
  int actors = 0;              // 0 selects the synchronous single-context mode
  int queue_capacity = 64;     // episodes
  std::int64_t total_steps = 30'000'000;
  CurriculumSchedule curriculum;
  std::uint64_t seed = 0;
  Precision precision = Precision::Float64;
  std::int64_t checkpoint_interval = 1'000'000;  // environment steps; 0 writes only the final checkpoint
  std::string checkpoint_dir = "checkpoints";
  std::string log_path = "train_log.ndjson";  // empty disables the log file
  int log_interval = 10;                      // updates between log records
  std::int64_t eval_interval = 50'000;        // environment steps; 0 disables periodic evaluation
  std::vector<int> eval_lengths = {10, 20, 100};
  std::uint64_t eval_seed = 12345;
  bool eval_greedy = false;
  std::string eval_report_path = "eval_reports.ndjson";
  double stop_at_success = 0.0;  // stop once every eval length reaches this rate; 0 disables
  std::size_t conv_channels = 64;
  std::size_t queries = 8;
  std::size_t trunk = 128;
  std::size_t lstm_hidden = 64;
};

TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& c);
TrainConfig load_config(const std::filesystem::path& path);

PolicyDims dims_for_config(const TrainConfig& c);

std::size_t max_episode_steps(double multiplier, std::size_t tape_length);

struct StepRecord {
  FixedContext xi;
  ChannelMatrix sigma;
  Action action;
  double logprob = 0;
  double entropy = 0;
  double value = 0;
  double reward = 0;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  bool success = false;
  double episode_return = 0;
  int difficulty = 0;
  Tape final_tape;
  std::uint64_t version = 0;  // snapshot version that produced the trace
};

enum class ActionMode { Sample, Greedy };

/// Rolls out the policy until the halting check fires or T_max steps pass,
/// then fills the per-step rewards.
template <typename T>
EpisodeTrace run_episode(const PolicyParams<T>& params, const TaskInstance& instance, const TrainConfig& config,
                         Rng& rng, ActionMode mode = ActionMode::Sample);

/// Same loop driven by an arbitrary action source (oracles, random baselines).
using ActionSource = std::function<Action(const MachineState&)>;
EpisodeTrace run_scripted_episode(const TaskInstance& instance, const ActionSource& source, std::size_t t_max,
                                  const AblationFlags& flags = {});

/// Per-step rewards: step cost every step, plus a terminal reward of 1 on
/// success (sparse) or the fraction of correct target cells (dense).
std::vector<double> episode_reward(const EpisodeTrace& trace, const TaskInstance& instance, RewardScheme scheme,
                                   double step_cost = 0.01);

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct LossWeights {
  double gamma = 0.99;
  double value_weight = 0.5;
  double entropy_weight = 0.01;
};

struct UpdateStats {
  double mean_return = 0;
  double pg_loss = 0;
  double value_loss = 0;
  double entropy = 0;  // mean per step
  double total_loss = 0;
  std::size_t episodes = 0;
  std::size_t steps = 0;
  bool skipped = false;
  std::string diagnostic;
};

/// Accumulates the gradient of
///   sum_t [ -logprob_t * A_t + c_v (G_t - v_t)^2 - c_H H_t ] / episodes
/// into params.store. A_t = G_t - v_t with v_t held constant; when
/// `fixed_advantages` is given it supplies A_t instead. Returns the loss value.
template <typename T>
double accumulate_loss_gradients(PolicyParams<T>& params, std::span<const EpisodeTrace> batch, const LossWeights& w,
                                 const std::vector<std::vector<double>>* fixed_advantages = nullptr,
                                 UpdateStats* stats = nullptr);

/// Loss value only (no gradient), same definition as above.
template <typename T>
double batch_loss(const PolicyParams<T>& params, std::span<const EpisodeTrace> batch, const LossWeights& w,
                  const std::vector<std::vector<double>>& advantages);

/// One optimizer step on the batch. A non-finite loss or gradient skips the
/// update and reports it in the stats.
template <typename T>
UpdateStats policy_gradient_update(PolicyParams<T>& params, ad::Adam<T>& optimizer,
                                   std::span<const EpisodeTrace> batch, const LossWeights& w);

struct CheckpointMeta {
  TaskKind task = TaskKind::Copy;
  AblationFlags ablations;
  std::int64_t step = 0;
  std::uint64_t version = 0;
};

template <typename T>
void save_policy(const std::filesystem::path& path, const PolicyParams<T>& params, const CheckpointMeta& meta);

template <typename T>
struct LoadedPolicy {
  PolicyParams<T> params;
  CheckpointMeta meta;
};

template <typename T>
LoadedPolicy<T> load_policy(const std::filesystem::path& path);

struct EvalPoint {
  std::int64_t step = 0;
  std::uint64_t version = 0;
  int length = 0;
  double success_rate = 0;
  double best = 0;
};

struct LoopResult {
  std::int64_t steps = 0;
  std::uint64_t updates = 0;
  std::uint64_t episodes = 0;
  std::uint64_t dropped = 0;          // evicted from the full queue
  std::uint64_t stale_discarded = 0;  // older than the staleness bound
  std::uint64_t skipped_updates = 0;
  std::uint64_t max_staleness = 0;    // in snapshot versions
  std::uint64_t staleness_bound = 0;
  std::map<std::uint64_t, std::uint64_t> staleness_histogram;
  std::vector<int> levels;  // curriculum level after each update
  std::vector<std::filesystem::path> checkpoints;
  std::vector<EvalPoint> evals;
  std::map<int, double> best_success;  // per eval length
  std::vector<std::string> log_lines;
};

/// Actor/learner training. With config.actors == 0 everything runs in the
/// calling thread and a fixed seed reproduces the run bit for bit.
template <typename T>
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  LoopResult run();

  const PolicyParams<T>& params() const { return params_; }
  PolicyParams<T>& params() { return params_; }
  const TrainConfig& config() const { return config_; }

 private:
  TrainConfig config_;
  PolicyParams<T> params_;
  ad::Adam<T> optimizer_;
};

LoopResult actor_learner_loop(const TrainConfig& config);

}  // namespace mtm
