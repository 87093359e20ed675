#include "mtm/eval.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtm {

namespace {

std::uint64_t instance_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

EvalReport empty_report(const EvalDataset& dataset) {
  EvalReport r;
  r.kind = dataset.kind;
  r.length = dataset.length;
  r.total = dataset.instances.size();
  r.passed.reserve(r.total);
  return r;
}

void finish(EvalReport& r) {
  r.passes = static_cast<std::size_t>(std::count(r.passed.begin(), r.passed.end(), true));
  r.success_rate = success_rate(r.passes, r.total);
}

}  // namespace

EvalDataset build_eval_set(TaskKind kind, int length, std::uint64_t seed, std::size_t count) {
  if (length < 1) throw std::invalid_argument("eval length must be >= 1");
  EvalDataset ds{kind, length, seed, {}};
  ds.instances.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ds.instances.push_back(generate_seeded(kind, length, instance_seed(seed, i)));
  return ds;
}

void save_eval_set(const std::filesystem::path& path, const EvalDataset& dataset) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# mtm-evalset v1 kind=" << task_name(dataset.kind) << " length=" << dataset.length
      << " seed=" << dataset.seed << " count=" << dataset.instances.size() << '\n';
  for (const TaskInstance& inst : dataset.instances) out << format_instance_line(inst) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EvalDataset load_eval_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open eval set " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# mtm-evalset v1", 0) != 0)
    throw std::runtime_error(path.string() + ": missing eval-set header");

  EvalDataset ds;
  std::size_t count = 0;
  bool have_kind = false;
  std::istringstream header(line.substr(16));
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "kind") {
      ds.kind = parse_task_kind(value);
      have_kind = true;
    } else if (key == "length") {
      ds.length = std::stoi(value);
    } else if (key == "seed") {
      ds.seed = std::stoull(value);
    } else if (key == "count") {
      count = std::stoull(value);
    }
  }
  if (!have_kind) throw std::runtime_error(path.string() + ": header lacks kind=");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    TaskInstance inst;
    try {
      inst = parse_instance_line(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (inst.kind != ds.kind || inst.difficulty != ds.length)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": instance does not match header");
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.size() != count)
    throw std::runtime_error(path.string() + ": header says " + std::to_string(count) + " instances, found " +
                             std::to_string(ds.instances.size()));
  return ds;
}

template <typename T>
EvalReport evaluate(const PolicyParams<T>& params, const EvalDataset& dataset, const EvalOptions& options) {
  TrainConfig cfg;
  cfg.task = dataset.kind;
  cfg.t_max_multiplier = options.t_max_multiplier;
  cfg.ablations = options.ablations;
  EvalReport r = empty_report(dataset);
  Rng rng(options.seed);
  const ActionMode mode = options.greedy ? ActionMode::Greedy : ActionMode::Sample;
  for (const TaskInstance& inst : dataset.instances) r.passed.push_back(run_episode(params, inst, cfg, rng, mode).success);
  finish(r);
  return r;
}

EvalReport evaluate_scripted(const EvalDataset& dataset, const ScriptedPolicyFactory& make, double t_max_multiplier) {
  EvalReport r = empty_report(dataset);
  for (const TaskInstance& inst : dataset.instances) {
    const std::size_t t_max = max_episode_steps(t_max_multiplier, inst.initial_tape.size());
    r.passed.push_back(run_scripted_episode(inst, make(inst), t_max).success);
  }
  finish(r);
  return r;
}

double success_rate(std::size_t passes, std::size_t total) {
  if (passes > total) throw std::invalid_argument("passes exceed total");
  return total == 0 ? 0.0 : static_cast<double>(passes) / static_cast<double>(total);
}

double BestTracker::add(double rate) {
  best_ = best_ ? std::max(*best_, rate) : rate;
  return *best_;
}

std::optional<double> track_best(std::span<const double> rates) {
  BestTracker t;
  for (double r : rates) t.add(r);
  return t.best();
}

TrialSummary summarize_trials(std::span<const double> best_rates) {
  TrialSummary s;
  s.rates.assign(best_rates.begin(), best_rates.end());
  if (s.rates.empty()) return s;
  double sum = 0;
  for (double r : s.rates) {
    sum += r;
    if (r >= 1.0) ++s.perfect;
  }
  s.mean = sum / static_cast<double>(s.rates.size());
  s.single_trial = s.rates.size() == 1;
  if (!s.single_trial) {
    double ss = 0;
    for (double r : s.rates) ss += (r - s.mean) * (r - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.rates.size() - 1));
  }
  return s;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j = {{"task", task_name(r.kind)}, {"length", r.length},         {"passes", r.passes},
                      {"total", r.total},          {"success_rate", r.success_rate}, {"step", r.step},
                      {"version", r.version}};
  if (r.best_so_far) j["best_so_far"] = *r.best_so_far;
  j["passed"] = r.passed;
  return j;
}

nlohmann::json summary_to_json(const TrialSummary& s) {
  nlohmann::json j = {{"rates", s.rates}, {"mean", s.mean}, {"perfect", s.perfect}, {"trials", s.rates.size()}};
  if (s.single_trial)
    j["stddev"] = nullptr;  // undefined for one trial
  else
    j["stddev"] = s.stddev;
  return j;
}

template EvalReport evaluate<float>(const PolicyParams<float>&, const EvalDataset&, const EvalOptions&);
template EvalReport evaluate<double>(const PolicyParams<double>&, const EvalDataset&, const EvalOptions&);

}  // namespace mtm
