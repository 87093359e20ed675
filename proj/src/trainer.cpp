#include "mtm/trainer.hpp"

#include <atomic>
#include <cmath>
#include <deque>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "mtm/eval.hpp"
#include "mtm/trace_queue.hpp"

namespace mtm {

namespace {

std::string_view reward_name(RewardScheme s) { return s == RewardScheme::Sparse ? "sparse" : "dense"; }

RewardScheme parse_reward(const std::string& s) {
  if (s == "sparse") return RewardScheme::Sparse;
  if (s == "dense") return RewardScheme::Dense;
  throw std::invalid_argument("unknown reward scheme '" + s + "'");
}

std::string_view precision_name(Precision p) { return p == Precision::Float64 ? "float64" : "float32"; }

Precision parse_precision(const std::string& s) {
  if (s == "float64" || s == "f64" || s == "double") return Precision::Float64;
  if (s == "float32" || s == "f32" || s == "float") return Precision::Float32;
  throw std::invalid_argument("unknown precision '" + s + "'");
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw std::invalid_argument("unknown config key '" + where + it.key() + "'");
}

nlohmann::json ablations_to_json(const AblationFlags& f) {
  return {{"no_tape_values", f.no_tape_values},
          {"no_action_history", f.no_action_history},
          {"no_history_tape_values", f.no_history_tape_values}};
}

AblationFlags ablations_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"no_tape_values", "no_action_history", "no_history_tape_values"}, "ablations.");
  AblationFlags f;
  f.no_tape_values = j.value("no_tape_values", false);
  f.no_action_history = j.value("no_action_history", false);
  f.no_history_tape_values = j.value("no_history_tape_values", false);
  return f;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_positive(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("config: ") + what);
}

}  // namespace

TrainConfig config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"task", "encoder", "ablations", "t_max_multiplier", "reward", "step_cost", "gamma",
                       "entropy_weight", "value_weight", "learning_rate", "max_grad_norm", "batch_size", "actors",
                       "queue_capacity", "total_steps", "curriculum", "seed", "precision", "checkpoint_interval",
                       "checkpoint_dir", "log_path", "log_interval", "eval_interval", "eval_lengths", "eval_seed",
                       "eval_greedy", "eval_report_path", "stop_at_success", "network"},
                      "");
  TrainConfig c;
  if (j.contains("task")) c.task = parse_task_kind(j.at("task").get<std::string>());
  if (j.contains("encoder")) c.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
  if (j.contains("ablations")) c.ablations = ablations_from_json(j.at("ablations"));
  c.t_max_multiplier = j.value("t_max_multiplier", c.t_max_multiplier);
  if (j.contains("reward")) c.reward = parse_reward(j.at("reward").get<std::string>());
  c.step_cost = j.value("step_cost", c.step_cost);
  c.gamma = j.value("gamma", c.gamma);
  c.entropy_weight = j.value("entropy_weight", c.entropy_weight);
  c.value_weight = j.value("value_weight", c.value_weight);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.actors = j.value("actors", c.actors);
  c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
  c.total_steps = j.value("total_steps", c.total_steps);
  if (j.contains("curriculum")) {
    const auto& cj = j.at("curriculum");
    reject_unknown_keys(cj, {"c_min", "c_max", "ramp_start", "ramp_end"}, "curriculum.");
    c.curriculum.c_min = cj.value("c_min", c.curriculum.c_min);
    c.curriculum.c_max = cj.value("c_max", c.curriculum.c_max);
    c.curriculum.ramp_start = cj.value("ramp_start", c.curriculum.ramp_start);
    c.curriculum.ramp_end = cj.value("ramp_end", c.curriculum.ramp_end);
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);
  c.log_path = j.value("log_path", c.log_path);
  c.log_interval = j.value("log_interval", c.log_interval);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  if (j.contains("eval_lengths")) c.eval_lengths = j.at("eval_lengths").get<std::vector<int>>();
  c.eval_seed = j.value("eval_seed", c.eval_seed);
  c.eval_greedy = j.value("eval_greedy", c.eval_greedy);
  c.eval_report_path = j.value("eval_report_path", c.eval_report_path);
  c.stop_at_success = j.value("stop_at_success", c.stop_at_success);
  if (j.contains("network")) {
    const auto& nj = j.at("network");
    reject_unknown_keys(nj, {"conv_channels", "queries", "trunk", "lstm_hidden"}, "network.");
    c.conv_channels = nj.value("conv_channels", c.conv_channels);
    c.queries = nj.value("queries", c.queries);
    c.trunk = nj.value("trunk", c.trunk);
    c.lstm_hidden = nj.value("lstm_hidden", c.lstm_hidden);
  }

  check_positive(c.t_max_multiplier > 0, "t_max_multiplier must be positive");
  check_positive(c.gamma > 0 && c.gamma <= 1, "gamma must be in (0, 1]");
  check_positive(c.learning_rate > 0, "learning_rate must be positive");
  check_positive(c.batch_size > 0, "batch_size must be positive");
  check_positive(c.actors >= 0, "actors must be >= 0");
  check_positive(c.queue_capacity > 0, "queue_capacity must be positive");
  check_positive(c.total_steps > 0, "total_steps must be positive");
  check_positive(c.curriculum.c_min >= 1 && c.curriculum.c_max >= c.curriculum.c_min, "curriculum needs 1 <= c_min <= c_max");
  check_positive(c.log_interval > 0, "log_interval must be positive");
  for (int len : c.eval_lengths) check_positive(len >= 1, "eval lengths must be >= 1");
  check_positive(c.conv_channels > 0 && c.queries > 0 && c.trunk > 0 && c.lstm_hidden > 0, "network sizes must be positive");
  return c;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"task", task_name(c.task)},
          {"encoder", encoder_name(c.encoder)},
          {"ablations", ablations_to_json(c.ablations)},
          {"t_max_multiplier", c.t_max_multiplier},
          {"reward", reward_name(c.reward)},
          {"step_cost", c.step_cost},
          {"gamma", c.gamma},
          {"entropy_weight", c.entropy_weight},
          {"value_weight", c.value_weight},
          {"learning_rate", c.learning_rate},
          {"max_grad_norm", c.max_grad_norm},
          {"batch_size", c.batch_size},
          {"actors", c.actors},
          {"queue_capacity", c.queue_capacity},
          {"total_steps", c.total_steps},
          {"curriculum",
           {{"c_min", c.curriculum.c_min},
            {"c_max", c.curriculum.c_max},
            {"ramp_start", c.curriculum.ramp_start},
            {"ramp_end", c.curriculum.ramp_end}}},
          {"seed", c.seed},
          {"precision", precision_name(c.precision)},
          {"checkpoint_interval", c.checkpoint_interval},
          {"checkpoint_dir", c.checkpoint_dir},
          {"log_path", c.log_path},
          {"log_interval", c.log_interval},
          {"eval_interval", c.eval_interval},
          {"eval_lengths", c.eval_lengths},
          {"eval_seed", c.eval_seed},
          {"eval_greedy", c.eval_greedy},
          {"eval_report_path", c.eval_report_path},
          {"stop_at_success", c.stop_at_success},
          {"network",
           {{"conv_channels", c.conv_channels}, {"queries", c.queries}, {"trunk", c.trunk}, {"lstm_hidden", c.lstm_hidden}}}};
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return config_from_json(nlohmann::json::parse(in));
}

PolicyDims dims_for_config(const TrainConfig& c) {
  PolicyDims d = dims_for_task(c.task, c.encoder);
  d.conv_channels = c.conv_channels;
  d.queries = c.queries;
  d.trunk = c.trunk;
  d.lstm_hidden = c.lstm_hidden;
  return d;
}

std::size_t max_episode_steps(double multiplier, std::size_t tape_length) {
  return static_cast<std::size_t>(std::ceil(multiplier * static_cast<double>(tape_length)));
}

// ---------------------------------------------------------------------------
// Episodes

namespace {

HeadConfig head_config(const PolicyDims& dims) { return {dims.reads, dims.heads() - dims.reads}; }

void finish_trace(EpisodeTrace& trace, const MachineState& state, const TaskInstance& instance, RewardScheme scheme,
                  double step_cost) {
  trace.success = check_halt(state, instance);
  trace.final_tape = state.tape;
  trace.difficulty = instance.difficulty;
  const std::vector<double> rewards = episode_reward(trace, instance, scheme, step_cost);
  trace.episode_return = 0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    trace.steps[t].reward = rewards[t];
    trace.episode_return += rewards[t];
  }
}

}  // namespace

template <typename T>
EpisodeTrace run_episode(const PolicyParams<T>& params, const TaskInstance& instance, const TrainConfig& config,
                         Rng& rng, ActionMode mode) {
  const Vocabulary vocab = task_vocabulary(instance.kind);
  const ModulePool pool = pool_for_task(instance.kind);
  const ContextLayout& layout = params.dims.layout;
  if (layout != layout_for_task(instance.kind, head_config(params.dims)))
    throw ad::ShapeError("policy was built for a different task layout than " + std::string(task_name(instance.kind)));

  MachineState state = init_machine(instance, head_config(params.dims));
  const std::size_t t_max = max_episode_steps(config.t_max_multiplier, state.length());
  EpisodeTrace trace;
  while (!check_halt(state, instance) && state.step < t_max) {
    StepRecord rec;
    rec.xi = encode_xi(state, vocab, layout, config.ablations);
    rec.sigma = encode_sigma(state, vocab, layout, config.ablations);
    const PolicyOutput out = evaluate_policy(params, rec.xi, rec.sigma);
    auto [action, logprob] = mode == ActionMode::Sample ? sample_action(out, rng) : greedy_action(out);
    rec.logprob = logprob;
    rec.entropy = policy_entropy(out);
    rec.value = out.value;
    auto next = apply_action(state, action, pool);
    if (!next) break;  // rejected action ends the episode as a failure
    rec.action = std::move(action);
    trace.steps.push_back(std::move(rec));
    state = std::move(*next);
  }
  finish_trace(trace, state, instance, config.reward, config.step_cost);
  return trace;
}

EpisodeTrace run_scripted_episode(const TaskInstance& instance, const ActionSource& source, std::size_t t_max,
                                  const AblationFlags& flags) {
  const Vocabulary vocab = task_vocabulary(instance.kind);
  const ModulePool pool = pool_for_task(instance.kind);
  const ContextLayout layout = layout_for_task(instance.kind);
  MachineState state = init_machine(instance);
  EpisodeTrace trace;
  while (!check_halt(state, instance) && state.step < t_max) {
    StepRecord rec;
    rec.xi = encode_xi(state, vocab, layout, flags);
    rec.sigma = encode_sigma(state, vocab, layout, flags);
    Action action = source(state);
    auto next = apply_action(state, action, pool);
    if (!next) break;
    rec.action = std::move(action);
    trace.steps.push_back(std::move(rec));
    state = std::move(*next);
  }
  finish_trace(trace, state, instance, RewardScheme::Sparse, 0.01);
  return trace;
}

std::vector<double> episode_reward(const EpisodeTrace& trace, const TaskInstance& instance, RewardScheme scheme,
                                   double step_cost) {
  std::vector<double> rewards(trace.steps.size(), -step_cost);
  if (rewards.empty()) return rewards;
  double terminal = 0;
  if (scheme == RewardScheme::Sparse) {
    terminal = trace.success ? 1.0 : 0.0;
  } else {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < instance.target_positions.size(); ++i) {
      const std::size_t p = instance.target_positions[i];
      if (p < trace.final_tape.size() && trace.final_tape[p] == instance.expected[i]) ++correct;
    }
    terminal = instance.target_positions.empty() ? 1.0
                                                 : static_cast<double>(correct) / instance.target_positions.size();
  }
  rewards.back() += terminal;
  return rewards;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double g = 0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    g = rewards[t] + gamma * g;
    out[t] = g;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

namespace {

template <typename T, typename Params>
double loss_pass(ad::Graph<T>* shared, Params& params, std::span<const EpisodeTrace> batch, const LossWeights& w,
                 const std::vector<std::vector<double>>* fixed_advantages, UpdateStats* stats, bool backward) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  (void)shared;
  const double inv_episodes = 1.0 / static_cast<double>(batch.size());
  double total = 0, pg = 0, vl = 0, ent = 0, ret = 0;
  std::size_t steps = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const EpisodeTrace& trace = batch[e];
    std::vector<double> rewards(trace.steps.size());
    for (std::size_t t = 0; t < rewards.size(); ++t) rewards[t] = trace.steps[t].reward;
    const std::vector<double> returns = discounted_returns(rewards, w.gamma);
    ret += trace.episode_return;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      const StepRecord& s = trace.steps[t];
      ad::Graph<T> g(backward);
      const PolicyVars vars = forward(g, params, s.xi, s.sigma);
      ad::Var lp = action_logprob(g, vars, s.action, params.dims.reads);
      ad::Var h = policy_entropy(g, vars);
      const double v = static_cast<double>(g.scalar(vars.value));
      const double adv = fixed_advantages ? (*fixed_advantages).at(e).at(t) : returns[t] - v;

      ad::Var pg_term = ad::scale(g, lp, static_cast<T>(-adv * inv_episodes));
      ad::Var err = ad::sub(g, g.constant(ad::Tensor<T>(ad::Shape{1}, static_cast<T>(returns[t]))), vars.value);
      ad::Var v_term = ad::scale(g, ad::sum(g, ad::square(g, err)), static_cast<T>(w.value_weight * inv_episodes));
      ad::Var h_term = ad::scale(g, h, static_cast<T>(-w.entropy_weight * inv_episodes));
      ad::Var loss = ad::add(g, ad::add(g, pg_term, v_term), h_term);

      if (backward) g.backward(loss);
      total += static_cast<double>(g.scalar(loss));
      pg += -static_cast<double>(g.scalar(lp)) * adv * inv_episodes;
      vl += (returns[t] - v) * (returns[t] - v) * inv_episodes;
      ent += static_cast<double>(g.scalar(h));
      ++steps;
    }
  }
  if (!std::isfinite(total)) throw ad::NumericError("non-finite loss");
  if (stats) {
    stats->episodes = batch.size();
    stats->steps = steps;
    stats->mean_return = ret * inv_episodes;
    stats->pg_loss = pg;
    stats->value_loss = vl;
    stats->entropy = steps ? ent / static_cast<double>(steps) : 0.0;
    stats->total_loss = total;
  }
  return total;
}

}  // namespace

template <typename T>
double accumulate_loss_gradients(PolicyParams<T>& params, std::span<const EpisodeTrace> batch, const LossWeights& w,
                                 const std::vector<std::vector<double>>* fixed_advantages, UpdateStats* stats) {
  return loss_pass<T>(nullptr, params, batch, w, fixed_advantages, stats, true);
}

template <typename T>
double batch_loss(const PolicyParams<T>& params, std::span<const EpisodeTrace> batch, const LossWeights& w,
                  const std::vector<std::vector<double>>& advantages) {
  return loss_pass<T>(nullptr, params, batch, w, &advantages, nullptr, false);
}

template <typename T>
UpdateStats policy_gradient_update(PolicyParams<T>& params, ad::Adam<T>& optimizer,
                                   std::span<const EpisodeTrace> batch, const LossWeights& w) {
  UpdateStats stats;
  params.store.zero_grad();
  try {
    accumulate_loss_gradients(params, batch, w, nullptr, &stats);
    if (stats.steps > 0) optimizer.step(params.store);
  } catch (const ad::NumericError& e) {
    params.store.zero_grad();
    stats.skipped = true;
    stats.diagnostic = e.what();
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Checkpoints

template <typename T>
void save_policy(const std::filesystem::path& path, const PolicyParams<T>& params, const CheckpointMeta& meta) {
  Archive a;
  a.header = {{"format", "mtm-policy"},
              {"dims", dims_to_json(params.dims)},
              {"task", task_name(meta.task)},
              {"encoder", encoder_name(params.dims.encoder)},
              {"ablations", ablations_to_json(meta.ablations)},
              {"step", meta.step},
              {"snapshot_version", meta.version}};
  a.tensors = tensors_from_store(params.store);
  write_archive(path, a);
}

template <typename T>
LoadedPolicy<T> load_policy(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  if (a.header.value("format", "") != "mtm-policy") throw std::runtime_error(path.string() + " is not a policy checkpoint");
  LoadedPolicy<T> out;
  out.params.dims = dims_from_json(a.header.at("dims"));
  Rng rng(0);
  out.params = init_params<T>(out.params.dims, rng);
  load_into_store(a, out.params.store);
  out.meta.task = parse_task_kind(a.header.at("task").get<std::string>());
  out.meta.ablations = ablations_from_json(a.header.at("ablations"));
  out.meta.step = a.header.value("step", std::int64_t{0});
  out.meta.version = a.header.value("snapshot_version", std::uint64_t{0});
  return out;
}

// ---------------------------------------------------------------------------
// Actor / learner loop

namespace {

template <typename T>
struct Snapshot {
  PolicyParams<T> params;
  std::uint64_t version = 0;
};

/// Shared state of one run that both modes use for bookkeeping.
template <typename T>
class RunBook {
 public:
  RunBook(const TrainConfig& config, LoopResult& result) : config_(config), result_(result) {
    if (!config.log_path.empty()) {
      if (std::filesystem::path(config.log_path).has_parent_path())
        std::filesystem::create_directories(std::filesystem::path(config.log_path).parent_path());
      log_.open(config.log_path, std::ios::trunc);
      if (!log_) throw std::runtime_error("cannot open log " + config.log_path);
    }
    if (!config.eval_report_path.empty() && !config.eval_lengths.empty()) {
      if (std::filesystem::path(config.eval_report_path).has_parent_path())
        std::filesystem::create_directories(std::filesystem::path(config.eval_report_path).parent_path());
      eval_log_.open(config.eval_report_path, std::ios::trunc);
    }
    for (int len : config.eval_lengths) eval_sets_.push_back(build_eval_set(config.task, len, config.eval_seed));
    next_checkpoint_ = config.checkpoint_interval > 0 ? config.checkpoint_interval : -1;
    next_eval_ = config.eval_interval > 0 ? config.eval_interval : -1;
  }

  void record_episode(const EpisodeTrace& trace) {
    recent_success_.push_back(trace.success);
    if (recent_success_.size() > 100) recent_success_.pop_front();
    ++result_.episodes;
  }

  void record_update(const UpdateStats& stats, std::int64_t steps, std::uint64_t version) {
    ++result_.updates;
    if (stats.skipped) ++result_.skipped_updates;
    const int level = curriculum_level(steps, config_.curriculum);
    result_.levels.push_back(level);
    if (result_.updates % static_cast<std::uint64_t>(config_.log_interval) != 0 && !stats.skipped) return;
    const double window_success =
        recent_success_.empty()
            ? 0.0
            : static_cast<double>(std::count(recent_success_.begin(), recent_success_.end(), true)) /
                  static_cast<double>(recent_success_.size());
    nlohmann::json rec = {{"step", steps},
                          {"update", result_.updates},
                          {"level", level},
                          {"mean_return", stats.mean_return},
                          {"success_rate", window_success},
                          {"pg_loss", stats.pg_loss},
                          {"value_loss", stats.value_loss},
                          {"entropy", stats.entropy},
                          {"version", version},
                          {"dropped", result_.dropped},
                          {"stale_discarded", result_.stale_discarded}};
    if (stats.skipped) rec["skipped"] = stats.diagnostic;
    write_log(rec.dump());
  }

  void write_log(const std::string& line) {
    result_.log_lines.push_back(line);
    if (log_) log_ << line << '\n' << std::flush;
  }

  bool checkpoint_due(std::int64_t steps) const { return next_checkpoint_ > 0 && steps >= next_checkpoint_; }
  void checkpoint(const PolicyParams<T>& params, std::int64_t steps, std::uint64_t version, bool final) {
    const auto dir = std::filesystem::path(config_.checkpoint_dir);
    const auto path = final ? dir / "final.ckpt" : dir / ("step_" + std::to_string(steps) + ".ckpt");
    save_policy(path, params, CheckpointMeta{config_.task, config_.ablations, steps, version});
    result_.checkpoints.push_back(path);
    while (next_checkpoint_ > 0 && steps >= next_checkpoint_) next_checkpoint_ += config_.checkpoint_interval;
  }

  bool eval_due(std::int64_t steps) const { return next_eval_ > 0 && steps >= next_eval_; }
  void advance_eval(std::int64_t steps) {
    while (next_eval_ > 0 && steps >= next_eval_) next_eval_ += config_.eval_interval;
  }

  /// Evaluates a snapshot on every eval set; returns true once the stop
  /// threshold is met on all of them.
  bool evaluate_snapshot(const PolicyParams<T>& params, std::int64_t steps, std::uint64_t version) {
    bool all_reached = !eval_sets_.empty();
    for (const EvalDataset& ds : eval_sets_) {
      EvalOptions opts{config_.t_max_multiplier, config_.eval_greedy, mix_seed(config_.eval_seed, version),
                       config_.ablations};
      const EvalReport r = evaluate(params, ds, opts);
      std::lock_guard lock(eval_mutex_);
      double& best = result_.best_success[ds.length];
      best = std::max(best, r.success_rate);
      result_.evals.push_back({steps, version, ds.length, r.success_rate, best});
      if (eval_log_) {
        nlohmann::json rec = report_to_json(r);
        rec["step"] = steps;
        rec["version"] = version;
        rec["best_so_far"] = best;
        rec.erase("passed");
        eval_log_ << rec.dump() << '\n' << std::flush;
      }
      if (config_.stop_at_success <= 0 || r.success_rate < config_.stop_at_success) all_reached = false;
    }
    return config_.stop_at_success > 0 && all_reached;
  }

  bool has_eval_sets() const { return !eval_sets_.empty(); }

 private:
  const TrainConfig& config_;
  LoopResult& result_;
  std::ofstream log_;
  std::ofstream eval_log_;
  std::mutex eval_mutex_;
  std::vector<EvalDataset> eval_sets_;
  std::deque<bool> recent_success_;
  std::int64_t next_checkpoint_ = -1;
  std::int64_t next_eval_ = -1;
};

}  // namespace

template <typename T>
Trainer<T>::Trainer(TrainConfig config)
    : config_(std::move(config)),
      params_([&] {
        Rng rng(mix_seed(config_.seed, 0));
        return init_params<T>(dims_for_config(config_), rng);
      }()),
      optimizer_(ad::AdamConfig{config_.learning_rate, 0.9, 0.999, 1e-8, config_.max_grad_norm}) {}

template <typename T>
LoopResult Trainer<T>::run() {
  LoopResult result;
  RunBook<T> book(config_, result);
  const LossWeights weights{config_.gamma, config_.value_weight, config_.entropy_weight};
  const std::size_t batch_size = static_cast<std::size_t>(config_.batch_size);
  std::int64_t steps = 0;
  std::uint64_t version = 0;
  bool stop_early = false;

  if (config_.actors == 0) {
    Rng rng(mix_seed(config_.seed, 1));
    std::vector<EpisodeTrace> batch;
    while (steps < config_.total_steps && !stop_early) {
      batch.clear();
      while (batch.size() < batch_size) {
        const int level = curriculum_level(steps, config_.curriculum);
        const TaskInstance inst = generate(config_.task, sample_difficulty(level, rng), rng);
        EpisodeTrace trace = run_episode(params_, inst, config_, rng);
        trace.version = version;
        steps += static_cast<std::int64_t>(trace.steps.size());
        book.record_episode(trace);
        batch.push_back(std::move(trace));
      }
      result.staleness_histogram[0] += batch.size();
      const UpdateStats stats = policy_gradient_update(params_, optimizer_, std::span<const EpisodeTrace>(batch), weights);
      ++version;
      book.record_update(stats, steps, version);
      if (book.checkpoint_due(steps)) book.checkpoint(params_, steps, version, false);
      if (book.eval_due(steps)) {
        book.advance_eval(steps);
        stop_early = book.evaluate_snapshot(params_, steps, version);
      }
    }
  } else {
    // Traces older than this many snapshot versions are discarded; with
    // queue capacity Q and batch size B this is ceil((Q + B) / B).
    const std::uint64_t bound =
        (static_cast<std::uint64_t>(config_.queue_capacity) + batch_size + batch_size - 1) / batch_size;
    result.staleness_bound = bound;
    BoundedQueue<EpisodeTrace> queue(static_cast<std::size_t>(config_.queue_capacity));
    std::mutex snap_mutex;
    auto snapshot = std::make_shared<const Snapshot<T>>(Snapshot<T>{params_, 0});
    std::atomic<std::int64_t> consumed_steps{0};
    std::atomic<bool> stop{false};

    std::vector<std::thread> actors;
    for (int a = 0; a < config_.actors; ++a) {
      actors.emplace_back([&, a] {
        Rng rng(mix_seed(config_.seed, 100 + static_cast<std::uint64_t>(a)));
        while (!stop.load()) {
          std::shared_ptr<const Snapshot<T>> snap;
          {
            std::lock_guard lock(snap_mutex);
            snap = snapshot;
          }
          const int level = curriculum_level(consumed_steps.load(), config_.curriculum);
          const TaskInstance inst = generate(config_.task, sample_difficulty(level, rng), rng);
          EpisodeTrace trace = run_episode(snap->params, inst, config_, rng);
          trace.version = snap->version;
          queue.push(std::move(trace));
        }
      });
    }

    // Evaluation runs in its own thread against published snapshots.
    std::mutex eval_job_mutex;
    std::condition_variable eval_job_ready;
    std::shared_ptr<const Snapshot<T>> eval_job;
    std::int64_t eval_job_steps = 0;
    bool eval_closed = false;
    std::atomic<bool> eval_reached{false};
    std::thread evaluator([&] {
      while (true) {
        std::shared_ptr<const Snapshot<T>> job;
        std::int64_t job_steps = 0;
        {
          std::unique_lock lock(eval_job_mutex);
          eval_job_ready.wait(lock, [&] { return eval_job || eval_closed; });
          if (!eval_job && eval_closed) return;
          job = std::move(eval_job);
          eval_job.reset();
          job_steps = eval_job_steps;
        }
        if (book.evaluate_snapshot(job->params, job_steps, job->version)) eval_reached.store(true);
      }
    });

    std::vector<EpisodeTrace> batch;
    while (steps < config_.total_steps && !eval_reached.load()) {
      for (EpisodeTrace& trace : queue.pop_up_to(batch_size - batch.size(), std::chrono::milliseconds(100))) {
        const std::uint64_t staleness = version - trace.version;
        if (staleness > bound) {
          ++result.stale_discarded;
          continue;
        }
        ++result.staleness_histogram[staleness];
        result.max_staleness = std::max(result.max_staleness, staleness);
        book.record_episode(trace);
        batch.push_back(std::move(trace));
      }
      if (batch.size() < batch_size) continue;
      for (const auto& tr : batch) steps += static_cast<std::int64_t>(tr.steps.size());
      const UpdateStats stats = policy_gradient_update(params_, optimizer_, std::span<const EpisodeTrace>(batch), weights);
      batch.clear();
      ++version;
      consumed_steps.store(steps);
      auto published = std::make_shared<const Snapshot<T>>(Snapshot<T>{params_, version});
      {
        std::lock_guard lock(snap_mutex);
        snapshot = published;
      }
      result.dropped = queue.dropped();
      book.record_update(stats, steps, version);
      if (book.checkpoint_due(steps)) book.checkpoint(params_, steps, version, false);
      if (book.eval_due(steps)) {
        book.advance_eval(steps);
        std::lock_guard lock(eval_job_mutex);
        eval_job = published;
        eval_job_steps = steps;
        eval_job_ready.notify_one();
      }
    }
    stop.store(true);
    queue.close();
    for (auto& t : actors) t.join();
    {
      std::lock_guard lock(eval_job_mutex);
      eval_closed = true;
    }
    eval_job_ready.notify_one();
    evaluator.join();
    result.dropped = queue.dropped();
    stop_early = eval_reached.load();
  }

  result.steps = steps;
  book.checkpoint(params_, steps, version, true);
  if (book.has_eval_sets() && !stop_early) book.evaluate_snapshot(params_, steps, version);
  return result;
}

LoopResult actor_learner_loop(const TrainConfig& config) {
  if (config.precision == Precision::Float32) return Trainer<float>(config).run();
  return Trainer<double>(config).run();
}

#define MTM_INSTANTIATE_TRAINER(T)                                                                                   \
  template EpisodeTrace run_episode<T>(const PolicyParams<T>&, const TaskInstance&, const TrainConfig&, Rng&,        \
                                       ActionMode);                                                                  \
  template double accumulate_loss_gradients<T>(PolicyParams<T>&, std::span<const EpisodeTrace>, const LossWeights&, \
                                               const std::vector<std::vector<double>>*, UpdateStats*);               \
  template double batch_loss<T>(const PolicyParams<T>&, std::span<const EpisodeTrace>, const LossWeights&,          \
                                const std::vector<std::vector<double>>&);                                            \
  template UpdateStats policy_gradient_update<T>(PolicyParams<T>&, ad::Adam<T>&, std::span<const EpisodeTrace>,     \
                                                 const LossWeights&);                                                \
  template void save_policy<T>(const std::filesystem::path&, const PolicyParams<T>&, const CheckpointMeta&);        \
  template LoadedPolicy<T> load_policy<T>(const std::filesystem::path&);                                             \
  template class Trainer<T>;

MTM_INSTANTIATE_TRAINER(float)
MTM_INSTANTIATE_TRAINER(double)

#undef MTM_INSTANTIATE_TRAINER

}  // namespace mtm
