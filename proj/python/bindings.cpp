// Thin Python layer over the core library. Structured results cross the
// boundary as JSON text and are decoded on the Python side.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>
#include <vector>

#include "mtm/eval.hpp"
#include "mtm/gradcheck.hpp"
#include "mtm/oracle.hpp"
#include "mtm/trainer.hpp"

namespace py = pybind11;
using namespace mtm;
using nlohmann::json;

namespace {

json action_json(const Action& a) { return {{"module", a.module}, {"reads", a.reads}, {"writes", a.writes}}; }

json instance_json(const TaskInstance& inst) {
  std::string expected;
  for (Token t : inst.expected) expected += t.to_char();
  return {{"task", task_name(inst.kind)},
          {"n", inst.difficulty},
          {"input", tape_to_string(inst.input)},
          {"tape", tape_to_string(inst.initial_tape)},
          {"landmarks", inst.landmarks},
          {"target_positions", inst.target_positions},
          {"expected", expected}};
}

Tape parse_input(TaskKind kind, const std::string& digits) { return tape_from_string(digits, task_base(kind)); }

std::vector<std::string> task_names() {
  std::vector<std::string> out;
  for (TaskKind k : kAllTasks) out.emplace_back(task_name(k));
  return out;
}

std::vector<std::string> module_names(const std::string& task) {
  std::vector<std::string> out;
  for (const ModuleSpec& m : pool_for_task(parse_task_kind(task))) out.emplace_back(module_name(m.kind));
  return out;
}

std::string apply_module(const std::string& task, std::size_t index, char x, char y) {
  const TaskKind kind = parse_task_kind(task);
  const ModulePool pool = pool_for_task(kind);
  if (index >= pool.size()) throw py::index_error("module index out of range");
  const auto tx = Token::from_char(x, task_base(kind)), ty = Token::from_char(y, task_base(kind));
  if (!tx || !ty) throw py::value_error("token outside the task alphabet");
  return std::string(1, eval_module(pool[index], *tx, *ty).to_char());
}

std::string make_instance_py(const std::string& task, const std::string& digits) {
  const TaskKind kind = parse_task_kind(task);
  return instance_json(make_instance(kind, parse_input(kind, digits))).dump();
}

std::string generate_py(const std::string& task, int n, std::uint64_t seed) {
  return instance_json(generate_seeded(parse_task_kind(task), n, seed)).dump();
}

// Runs the hand-written controller on explicit input until the halting check fires.
std::string oracle_rollout(const std::string& task, const std::string& digits) {
  const TaskKind kind = parse_task_kind(task);
  const TaskInstance inst = make_instance(kind, parse_input(kind, digits));
  const ModulePool pool = pool_for_task(kind);
  OraclePolicy oracle(kind);
  MachineState s = init_machine(inst);
  json actions = json::array(), trace = json::array();
  trace.push_back(render_trace(s, kind));
  const std::size_t limit = 3 * s.length();
  while (!check_halt(s, inst) && s.step < limit) {
    const Action a = oracle.next_action(s);
    auto next = apply_action(s, a, pool);
    if (!next) throw std::runtime_error("oracle produced an illegal action");
    s = std::move(*next);
    actions.push_back(action_json(a));
    trace.push_back(render_trace(s, kind));
  }
  return json{{"success", check_halt(s, inst)},
              {"steps", s.step},
              {"final_tape", tape_to_string(s.tape)},
              {"actions", actions},
              {"trace", trace}}
      .dump();
}

std::string verify_py(const std::string& task, int max_len, std::uint64_t seed) {
  const VerifyReport r = verify_environment(parse_task_kind(task), max_len, seed);
  return json{{"ok", r.ok}, {"lengths", r.lengths.size()}, {"max_steps", r.max_steps}, {"failure", r.failure}}.dump();
}

std::vector<std::string> eval_set_lines(const std::string& task, int length, std::uint64_t seed, std::size_t count) {
  std::vector<std::string> out;
  for (const auto& inst : build_eval_set(parse_task_kind(task), length, seed, count).instances)
    out.push_back(format_instance_line(inst));
  return out;
}

void save_eval_set_py(const std::string& path, const std::string& task, int length, std::uint64_t seed,
                      std::size_t count) {
  save_eval_set(path, build_eval_set(parse_task_kind(task), length, seed, count));
}

std::string load_eval_set_py(const std::string& path) {
  const EvalDataset ds = load_eval_set(path);
  json lines = json::array();
  for (const auto& inst : ds.instances) lines.push_back(format_instance_line(inst));
  return json{{"task", task_name(ds.kind)}, {"length", ds.length}, {"seed", ds.seed}, {"instances", lines}}.dump();
}

std::string train_py(const std::string& config_json, const std::string& out_dir) {
  TrainConfig cfg = config_from_json(json::parse(config_json));
  if (!out_dir.empty()) {
    const std::filesystem::path out(out_dir);
    cfg.checkpoint_dir = (out / "checkpoints").string();
    cfg.log_path = (out / "train_log.ndjson").string();
    cfg.eval_report_path = (out / "eval_reports.ndjson").string();
  }
  LoopResult r;
  {
    py::gil_scoped_release release;
    r = actor_learner_loop(cfg);
  }
  json best = json::object();
  for (const auto& [len, rate] : r.best_success) best[std::to_string(len)] = rate;
  json ckpts = json::array();
  for (const auto& p : r.checkpoints) ckpts.push_back(p.string());
  return json{{"steps", r.steps},
              {"updates", r.updates},
              {"episodes", r.episodes},
              {"dropped", r.dropped},
              {"stale_discarded", r.stale_discarded},
              {"skipped_updates", r.skipped_updates},
              {"best_success", best},
              {"checkpoints", ckpts}}
      .dump();
}

std::string evaluate_py(const std::string& checkpoint, const std::string& dataset, bool greedy, std::uint64_t seed,
                        double t_max_multiplier) {
  const LoadedPolicy<double> policy = load_policy<double>(checkpoint);
  const EvalDataset ds = load_eval_set(dataset);
  if (policy.meta.task != ds.kind)
    throw py::value_error("checkpoint trained on " + std::string(task_name(policy.meta.task)) + ", dataset is " +
                          std::string(task_name(ds.kind)));
  EvalReport r;
  {
    py::gil_scoped_release release;
    r = evaluate(policy.params, ds, EvalOptions{t_max_multiplier, greedy, seed, policy.meta.ablations});
  }
  r.step = policy.meta.step;
  r.version = policy.meta.version;
  return report_to_json(r).dump();
}

std::string gradcheck_py(std::size_t cases, std::uint64_t seed) {
  GradCheckOptions opt;
  opt.cases_per_op = cases;
  opt.seed = seed;
  std::vector<GradCheckRow> rows;
  {
    py::gil_scoped_release release;
    rows = run_gradcheck_suite(opt);
  }
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"op", r.op},
                   {"cases", r.cases},
                   {"max_error64", r.max_error64},
                   {"max_error32", r.max_error32},
                   {"ok", r.ok}});
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_mtm, m) {
  m.doc() = "Modular tape machine core";

  py::register_exception<ad::ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def("tasks", &task_names);
  m.def("module_names", &module_names, py::arg("task"));
  m.def("apply_module", &apply_module, py::arg("task"), py::arg("index"), py::arg("x"), py::arg("y"));
  m.def("make_instance", &make_instance_py, py::arg("task"), py::arg("digits"));
  m.def("generate", &generate_py, py::arg("task"), py::arg("n"), py::arg("seed"));
  m.def("oracle_rollout", &oracle_rollout, py::arg("task"), py::arg("digits"));
  m.def("verify", &verify_py, py::arg("task"), py::arg("max_len") = 100, py::arg("seed") = 1);
  m.def("eval_set_lines", &eval_set_lines, py::arg("task"), py::arg("length"), py::arg("seed"),
        py::arg("count") = kEvalSetSize);
  m.def("save_eval_set", &save_eval_set_py, py::arg("path"), py::arg("task"), py::arg("length"), py::arg("seed"),
        py::arg("count") = kEvalSetSize);
  m.def("load_eval_set", &load_eval_set_py, py::arg("path"));
  m.def("train", &train_py, py::arg("config_json"), py::arg("out_dir") = "");
  m.def("evaluate", &evaluate_py, py::arg("checkpoint"), py::arg("dataset"), py::arg("greedy") = false,
        py::arg("seed") = 0, py::arg("t_max_multiplier") = 8.0);
  m.def("gradcheck", &gradcheck_py, py::arg("cases") = 20, py::arg("seed") = 20240601);
}
