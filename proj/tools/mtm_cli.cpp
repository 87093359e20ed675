// Command line front end: train, evaluate, generate eval sets, validate the
// environment with the oracles, dump traces, run the gradient suite.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mtm/eval.hpp"
#include "mtm/gradcheck.hpp"
#include "mtm/oracle.hpp"
#include "mtm/trainer.hpp"

namespace {

using namespace mtm;

int fail(const std::string& msg) {
  std::cerr << "error: " << msg << '\n';
  return 1;
}

std::string layout_string(const ContextLayout& l) {
  return "sigma " + std::to_string(l.sigma_channels()) + " channels, xi width " + std::to_string(l.xi_width()) +
         ", " + std::to_string(l.modules) + " modules";
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::int64_t> steps,
              const std::string& out_dir) {
  TrainConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (steps) cfg.total_steps = *steps;
  if (!out_dir.empty()) {
    cfg.checkpoint_dir = (std::filesystem::path(out_dir) / "checkpoints").string();
    cfg.log_path = (std::filesystem::path(out_dir) / "train_log.ndjson").string();
    cfg.eval_report_path = (std::filesystem::path(out_dir) / "eval_reports.ndjson").string();
  }
  const auto t0 = std::chrono::steady_clock::now();
  const LoopResult r = actor_learner_loop(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "trained " << task_name(cfg.task) << ": " << r.steps << " steps, " << r.updates << " updates, "
            << r.episodes << " episodes in " << secs << " s\n";
  std::cout << "dropped " << r.dropped << ", stale discarded " << r.stale_discarded << ", skipped updates "
            << r.skipped_updates << '\n';
  for (const auto& [len, best] : r.best_success) std::cout << "best success n=" << len << ": " << best << '\n';
  if (!r.checkpoints.empty()) std::cout << "final checkpoint " << r.checkpoints.back().string() << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& dataset_path, bool greedy, std::uint64_t seed,
             double t_max_multiplier, const std::string& report_path) {
  const LoadedPolicy<double> policy = load_policy<double>(ckpt);
  const EvalDataset ds = load_eval_set(dataset_path);
  const ContextLayout want = layout_for_task(ds.kind, HeadConfig{policy.params.dims.reads,
                                                                 policy.params.dims.heads() - policy.params.dims.reads});
  if (policy.params.dims.layout != want)
    return fail("shape mismatch: checkpoint expects " + layout_string(policy.params.dims.layout) + " (task " +
                std::string(task_name(policy.meta.task)) + ") but dataset task " + std::string(task_name(ds.kind)) +
                " needs " + layout_string(want));
  if (policy.meta.task != ds.kind)
    return fail("task mismatch: checkpoint trained on " + std::string(task_name(policy.meta.task)) +
                ", dataset is " + std::string(task_name(ds.kind)) + " (shapes agree: " + layout_string(want) + ")");
  EvalOptions opts{t_max_multiplier, greedy, seed, policy.meta.ablations};
  EvalReport r = evaluate(policy.params, ds, opts);
  r.step = policy.meta.step;
  r.version = policy.meta.version;
  std::cout << task_name(ds.kind) << " n=" << ds.length << ": " << r.passes << "/" << r.total << " ("
            << r.success_rate << ")\n";
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::app);
    if (!out) return fail("cannot write " + report_path);
    out << report_to_json(r).dump() << '\n';
  }
  return 0;
}

int cmd_gen(const std::string& task, int length, std::uint64_t seed, std::size_t count, const std::string& out) {
  const EvalDataset ds = build_eval_set(parse_task_kind(task), length, seed, count);
  save_eval_set(out, ds);
  std::cout << "wrote " << ds.instances.size() << " " << task_name(ds.kind) << " instances of length " << length
            << " to " << out << '\n';
  return 0;
}

int cmd_oracle(const std::string& task, int max_len, std::uint64_t seed) {
  std::vector<TaskKind> kinds;
  if (task == "all")
    kinds.assign(std::begin(kAllTasks), std::end(kAllTasks));
  else
    kinds.push_back(parse_task_kind(task));
  bool ok = true;
  for (TaskKind k : kinds) {
    const VerifyReport r = verify_environment(k, max_len, seed);
    std::size_t passed = 0;
    for (const auto& l : r.lengths) passed += l.ok;
    std::cout << task_name(k) << ": " << passed << "/" << max_len << " lengths " << (r.ok ? "OK" : "FAILED")
              << " (max steps " << r.max_steps << ")\n";
    if (!r.ok) {
      ok = false;
      std::cerr << r.failure << '\n' << r.failure_trace << '\n';
    }
  }
  return ok ? 0 : 1;
}

int cmd_trace(const std::string& ckpt, const std::string& task, int n, std::uint64_t seed, bool greedy) {
  const LoadedPolicy<double> policy = load_policy<double>(ckpt);
  const TaskKind kind = parse_task_kind(task);
  const HeadConfig heads{policy.params.dims.reads, policy.params.dims.heads() - policy.params.dims.reads};
  if (policy.params.dims.layout != layout_for_task(kind, heads))
    return fail("shape mismatch: checkpoint expects " + layout_string(policy.params.dims.layout) + ", task " +
                std::string(task_name(kind)) + " needs " + layout_string(layout_for_task(kind, heads)));
  Rng rng(seed);
  const TaskInstance inst = generate(kind, n, rng);
  TrainConfig cfg;
  cfg.task = kind;
  cfg.ablations = policy.meta.ablations;
  const EpisodeTrace trace = run_episode(policy.params, inst, cfg, rng, greedy ? ActionMode::Greedy : ActionMode::Sample);

  // Replay the recorded actions to render every intermediate state.
  MachineState state = init_machine(inst, heads);
  const ModulePool pool = pool_for_task(kind);
  std::cout << render_trace(state, kind) << '\n';
  for (const StepRecord& s : trace.steps) {
    state = *apply_action(state, s.action, pool);
    std::cout << "module " << module_name(pool[s.action.module].kind) << " p=" << std::exp(s.logprob) << '\n'
              << render_trace(state, kind) << '\n';
  }
  std::cout << (trace.success ? "success" : "failure") << " after " << trace.steps.size() << " steps\n";
  return 0;
}

int cmd_gradcheck(std::size_t cases, std::uint64_t seed) {
  GradCheckOptions opt;
  opt.cases_per_op = cases;
  opt.seed = seed;
  const auto rows = run_gradcheck_suite(opt);
  std::printf("%-24s %6s %12s %12s %8s  %s\n", "op", "cases", "max_err_f64", "max_err_f32", "skipped", "status");
  bool ok = true;
  for (const auto& r : rows) {
    std::printf("%-24s %6zu %12.3e %12.3e %8zu  %s\n", r.op.c_str(), r.cases, r.max_error64, r.max_error32,
                r.skipped_coordinates, r.ok ? "ok" : "FAIL");
    ok = ok && r.ok;
  }
  std::printf("tolerances: %.0e (64-bit), %.0e (32-bit)\n", opt.tol64, opt.tol32);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular tape-machine algorithm induction"};
  app.require_subcommand(1);

  std::string config_path, ckpt, dataset, task, out, report, out_dir;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::int64_t> train_steps;
  int length = 10, max_len = 100, n = 5;
  std::uint64_t seed = 0;
  std::size_t count = kEvalSetSize, cases = 20;
  bool greedy = false;
  double t_mult = 8.0;

  auto* train = app.add_subcommand("train", "Train a controller from a JSON config");
  train->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--total-steps", train_steps, "override the step budget");
  train->add_option("--out", out_dir, "directory for checkpoints and logs");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on an eval set");
  eval->add_option("checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("dataset", dataset)->required()->check(CLI::ExistingFile);
  eval->add_flag("--greedy", greedy, "act greedily instead of sampling");
  eval->add_option("--seed", seed, "sampling seed");
  eval->add_option("--t-max-multiplier", t_mult, "episode cap as a multiple of L");
  eval->add_option("--report", report, "append the report record to this file");

  auto* gen = app.add_subcommand("gen-eval-set", "Write a fixed eval set");
  gen->add_option("--task", task)->required();
  gen->add_option("--length", length)->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed);
  gen->add_option("--count", count);
  gen->add_option("--out", out)->required();

  auto* oracle = app.add_subcommand("oracle-check", "Drive the hand-written controllers over all lengths");
  oracle->add_option("task", task, "task name or 'all'")->required();
  oracle->add_option("--max-len", max_len)->check(CLI::PositiveNumber);
  oracle->add_option("--seed", seed);

  auto* trace = app.add_subcommand("trace", "Render one episode of a checkpoint");
  trace->add_option("checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  trace->add_option("task", task)->required();
  trace->add_option("-n", n, "instance length")->check(CLI::PositiveNumber);
  trace->add_option("--seed", seed);
  trace->add_flag("--greedy", greedy);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every kernel op and the loss");
  grad->add_option("--cases", cases, "random shapes per op")->check(CLI::PositiveNumber);
  grad->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(config_path, train_seed, train_steps, out_dir);
    if (*eval) return cmd_eval(ckpt, dataset, greedy, seed, t_mult, report);
    if (*gen) return cmd_gen(task, length, seed, count, out);
    if (*oracle) return cmd_oracle(task, max_len, seed == 0 ? 1 : seed);
    if (*trace) return cmd_trace(ckpt, task, n, seed, greedy);
    if (*grad) return cmd_gradcheck(cases, seed == 0 ? GradCheckOptions{}.seed : seed);
  } catch (const ad::ShapeError& e) {
    return fail(std::string("shape mismatch: ") + e.what());
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  return 2;
}
