#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cgl/config.hpp"
#include "cgl/error.hpp"
#include "cgl/grpo.hpp"
#include "cgl/hybrid.hpp"
#include "cgl/metrics.hpp"
#include "cgl/protocol.hpp"
#include "cgl/suite_io.hpp"
#include "cgl/synthgui.hpp"
#include "cgl/theory.hpp"

namespace py = pybind11;
using namespace cgl;

namespace {

using Table = std::vector<std::vector<std::optional<double>>>;

Table matrix_rows(const AccuracyMatrix& m) {
  Table t(static_cast<std::size_t>(m.size()));
  for (int n = 0; n < m.size(); ++n)
    for (int k = 0; k <= n; ++k) t[static_cast<std::size_t>(n)].push_back(m.get(n, k));
  return t;
}

AccuracyMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
  AccuracyMatrix m(static_cast<int>(rows.size()), MetricKind::Step);
  for (std::size_t n = 0; n < rows.size(); ++n) {
    if (rows[n].size() < n + 1) throw InputError("row " + std::to_string(n) + " needs " + std::to_string(n + 1) + " entries");
    for (std::size_t k = 0; k <= n; ++k) m.set(static_cast<int>(n), static_cast<int>(k), rows[n][k]);
  }
  return m;
}

py::dict telemetry_row(const TelemetryRow& r) {
  py::dict d;
  d["global_step"] = r.global_step;
  d["stage"] = r.stage;
  d["task_id"] = r.task_id;
  d["step_in_task"] = r.step_in_task;
  d["update"] = r.update;
  d["mean_entropy"] = r.mean_entropy;
  d["lambda"] = r.lambda;
  d["routed_fraction"] = r.routed_fraction;
  d["cos_alpha"] = r.cos_alpha;
  d["conflict"] = r.conflict;
  d["loss"] = r.loss;
  d["mean_reward"] = r.mean_reward;
  return d;
}

py::dict check_dict(const CheckReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["passed"] = r.passed;
  d["trials"] = r.trials;
  d["successes"] = r.successes;
  d["failure"] = r.failure;
  py::dict metrics;
  for (const auto& [k, v] : r.metrics) metrics[py::str(k)] = v;
  d["metrics"] = metrics;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the continual GUI-agent learning lab";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConfigMismatch>(m, "ConfigMismatch", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  py::class_<SuiteFile>(m, "Suite")
      .def_property_readonly("config_json", [](const SuiteFile& s) { return suite_config_to_json(s.config); })
      .def_property_readonly("num_actions", [](const SuiteFile& s) { return s.config.action_space().size(); })
      .def_property_readonly("task_names", [](const SuiteFile& s) {
        std::vector<std::string> names;
        for (const TaskDataset& t : s.tasks) names.push_back(t.name);
        return names;
      })
      .def_property_readonly("sizes", [](const SuiteFile& s) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const TaskDataset& t : s.tasks) out.emplace_back(t.train.size(), t.test.size());
        return out;
      }, "(train, test) trajectory counts per task")
      .def("save", [](const SuiteFile& s, const std::filesystem::path& p) { save_suite(p, s.config, s.tasks); })
      .def("digest", [](const SuiteFile& s) {
        std::ostringstream out;
        write_suite(out, s.config, s.tasks);
        return hex_digest(fnv1a64(out.str()));
      });

  m.def("generate_suite", [](const std::string& config_json) {
    const SuiteConfig c = config_json.empty() ? SuiteConfig{} : suite_config_from_json(config_json);
    c.validate();
    return SuiteFile{c, generate_suite(c)};
  }, py::arg("config_json") = "", "Generate a suite from a suite-config JSON string (defaults when empty)");
  m.def("load_suite", &load_suite, py::arg("path"));

  m.def("default_run_config_json", [] { return run_config_to_json(RunConfig{}); });
  m.def("default_suite_config_json", [] { return suite_config_to_json(SuiteConfig{}); });

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("order", &RunResult::order)
      .def_readonly("task_names", &RunResult::task_names)
      .def_readonly("fm_step", &RunResult::fm_step)
      .def_readonly("fm_traj", &RunResult::fm_traj)
      .def_readonly("avg_step", &RunResult::avg_step)
      .def_readonly("avg_traj", &RunResult::avg_traj)
      .def_property_readonly("step_matrix", [](const RunResult& r) { return matrix_rows(r.step_matrix); })
      .def_property_readonly("traj_matrix", [](const RunResult& r) { return matrix_rows(r.traj_matrix); })
      .def_property_readonly("telemetry", [](const RunResult& r) {
        py::list rows;
        for (const TelemetryRow& t : r.telemetry) rows.append(telemetry_row(t));
        return rows;
      })
      .def_property_readonly("final_params", [](const RunResult& r) { return r.final_model.params().values; });

  m.def("run_continual", [](const SuiteFile& suite, const std::string& config_json) {
    const RunConfig c = run_config_from_json(config_json);
    py::gil_scoped_release release;
    return run_continual(c, suite);
  }, py::arg("suite"), py::arg("config_json"));
  m.def("write_run_outputs", [](const std::filesystem::path& dir, const std::string& config_json, const RunResult& r) {
    write_run_outputs(dir, run_config_from_json(config_json), r);
  }, py::arg("dir"), py::arg("config_json"), py::arg("result"));

  m.def("forgetting_measure", [](const std::vector<std::vector<double>>& rows) {
    return forgetting_measure(matrix_from(rows));
  }, py::arg("rows"), "Lower-triangular accuracy rows (row n has n + 1 entries)");
  m.def("average_accuracy", [](const std::vector<std::vector<double>>& rows) {
    return average_accuracy(matrix_from(rows));
  }, py::arg("rows"));

  py::class_<SchedulerConfig>(m, "SchedulerConfig")
      .def(py::init<>())
      .def_readwrite("lambda_max", &SchedulerConfig::lambda_max)
      .def_readwrite("lambda_min", &SchedulerConfig::lambda_min)
      .def_readwrite("step_w", &SchedulerConfig::step_w)
      .def_readwrite("gamma", &SchedulerConfig::gamma)
      .def_readwrite("k", &SchedulerConfig::k)
      .def_readwrite("h_max", &SchedulerConfig::h_max)
      .def_readwrite("normalize_entropy", &SchedulerConfig::normalize_entropy)
      .def_readwrite("clamp_entropy", &SchedulerConfig::clamp_entropy);
  m.def("lambda_value", [](double mean_entropy, int step_in_task, const SchedulerConfig& cfg, int num_actions) {
    cfg.validate();
    SchedulerState s{cfg, num_actions, step_in_task};
    return lambda_value(s, mean_entropy);
  }, py::arg("mean_entropy"), py::arg("step_in_task"), py::arg("config") = SchedulerConfig{},
        py::arg("num_actions") = 573);

  m.def("surgery", [](const std::vector<double>& g_sft, const std::vector<double>& g_grpo) {
    if (g_sft.size() != g_grpo.size()) throw InputError("surgery: length mismatch");
    const SurgeryResult r = surgery_detailed(g_sft, g_grpo);
    return py::make_tuple(r.gradient, r.conflict, r.cos_alpha);
  }, py::arg("g_sft"), py::arg("g_grpo"), "Returns (gradient, conflict, cos_alpha)");

  m.def("normalized_advantages", [](const std::vector<double>& rewards, double eps) {
    return normalized_advantages(rewards, eps);
  }, py::arg("rewards"), py::arg("eps") = kDefaultAdvantageEps);

  m.def("entropy_change", [](const std::vector<double>& logits, const std::vector<double>& dz, double eta) {
    if (logits.size() != dz.size()) throw InputError("entropy_change: length mismatch");
    const ActionDistribution d = ActionDistribution::from_logits(logits);
    return py::make_tuple(exact_entropy_change(d, dz, eta), predicted_entropy_change(d, dz, eta));
  }, py::arg("logits"), py::arg("delta_z"), py::arg("eta"), "Returns (exact, first-order prediction)");

  m.def("verify", [](int trials, std::uint64_t seed, bool flip) {
    TheoryOptions o;
    o.trials = trials;
    o.seed = seed;
    o.flip_covariance_sign = flip;
    o.validate();
    py::list out;
    for (const CheckReport& r : run_all_checks(o)) out.append(check_dict(r));
    return out;
  }, py::arg("trials") = 100, py::arg("seed") = 0, py::arg("flip_covariance_sign") = false);
}
