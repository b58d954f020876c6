// cgl: suite generation, training runs, reports and theory checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cgl/config.hpp"
#include "cgl/error.hpp"
#include "cgl/metrics.hpp"
#include "cgl/protocol.hpp"
#include "cgl/suite_io.hpp"
#include "cgl/synthgui.hpp"
#include "cgl/theory.hpp"

using namespace cgl;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitMismatch = 3;
constexpr int kExitInternal = 4;

void print_suite_table(const SuiteFile& suite, const std::string& digest) {
  fmt::print("{:<4} {:<18} {:>5} {:>7} {:>6} {:>7}\n", "id", "task", "apps", "train", "test", "steps");
  int apps = 0, train = 0, test = 0, steps = 0;
  for (const TaskDataset& t : suite.tasks) {
    int s = 0;
    for (const Trajectory& tr : t.train) s += static_cast<int>(tr.steps.size());
    for (const Trajectory& tr : t.test) s += static_cast<int>(tr.steps.size());
    fmt::print("{:<4} {:<18} {:>5} {:>7} {:>6} {:>7}\n", t.task_id, t.name, t.app_ids.size(), t.train.size(),
               t.test.size(), s);
    apps += static_cast<int>(t.app_ids.size());
    train += static_cast<int>(t.train.size());
    test += static_cast<int>(t.test.size());
    steps += s;
  }
  fmt::print("{:<4} {:<18} {:>5} {:>7} {:>6} {:>7}\n", "", "total", apps, train, test, steps);
  fmt::print("digest {}\n", digest);
}

int cmd_generate(const std::string& config_path, const std::string& out) {
  const SuiteConfig config = config_path.empty() ? SuiteConfig{} : load_suite_config(config_path);
  config.validate();
  const std::vector<TaskDataset> tasks = generate_suite(config);
  save_suite(out, config, tasks);
  print_suite_table({config, tasks}, hex_digest(fnv1a64(read_file(out))));
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& suite_override, const std::string& out,
              std::optional<int> workers) {
  RunConfig config = load_run_config(config_path);
  if (!suite_override.empty()) config.suite_path = suite_override;
  if (workers) config.workers = *workers;
  if (config.suite_path.empty()) throw InputError("train: no suite given (config suite_path or --suite)");
  fs::path suite_path = config.suite_path;
  // Relative suite paths in a config file are relative to that file.
  if (suite_override.empty() && suite_path.is_relative()) suite_path = fs::path(config_path).parent_path() / suite_path;
  config.validate();
  const SuiteFile suite = load_suite(suite_path);
  const RunResult r = run_continual(config, suite);
  write_run_outputs(out, config, r);
  fmt::print("method {}  seed {}  order {}\n", config.method.label(), config.seed, fmt::join(r.order, ","));
  fmt::print("avg step acc {:.4f}  avg traj acc {:.4f}", r.avg_step, r.avg_traj);
  if (r.fm_step) fmt::print("  FM step {:+.4f}  FM traj {:+.4f}", *r.fm_step, *r.fm_traj);
  fmt::print("\nresults in {}\n", out);
  return kExitOk;
}

struct ReportRow {
  std::string dir;
  std::string method;
  double avg_step = 0, avg_traj = 0;
  std::optional<double> fm_step, fm_traj;
};

std::optional<double> opt_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// (step, entropy, lambda, cos_alpha) per optimizer step.
std::string series_csv(const std::string& telemetry) {
  std::istringstream in(telemetry);
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty telemetry.csv");
  const std::vector<std::string> header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InputError("telemetry.csv lacks column " + name);
  };
  const std::size_t c_step = col("global_step"), c_h = col("mean_entropy"), c_l = col("lambda"), c_cos = col("cos_alpha"),
                    c_task = col("task_id");
  std::string out = "step,task_id,entropy,lambda,cos_alpha\n";
  while (std::getline(in, line)) {
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) throw InputError("telemetry.csv: ragged row");
    out += cells[c_step] + "," + cells[c_task] + "," + cells[c_h] + "," + cells[c_l] + "," + cells[c_cos] + "\n";
  }
  return out;
}

std::string fmt_opt(const std::optional<double>& v, const char* spec) {
  return v ? fmt::format(fmt::runtime(spec), *v) : std::string("-");
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, std::string>> series;
  for (const std::string& d : dirs) {
    try {
      const nlohmann::json s = nlohmann::json::parse(read_file(fs::path(d) / "summary.json"));
      ReportRow r{d, s.at("method").get<std::string>(), s.at("avg_step_acc").get<double>(),
                  s.at("avg_traj_acc").get<double>(), opt_number(s, "fm_step"), opt_number(s, "fm_traj")};
      series.emplace_back(fmt::format("series_{:02d}_{}.csv", rows.size(), r.method),
                          series_csv(read_file(fs::path(d) / "telemetry.csv")));
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      spdlog::warn("skipping {}: {}", d, e.what());
    }
  }
  if (rows.empty()) throw InputError("report: no valid results directory");

  fmt::print("{:<28} {:<24} {:>9} {:>9} {:>9}\n", "dir", "method", "Avg-Step", "Avg-Traj", "FM");
  std::string table = "dir,method,avg_step_acc,avg_traj_acc,fm_step,fm_traj\n";
  for (const ReportRow& r : rows) {
    fmt::print("{:<28} {:<24} {:>9.4f} {:>9.4f} {:>9}\n", fs::path(r.dir).filename().string(), r.method, r.avg_step,
               r.avg_traj, fmt_opt(r.fm_step, "{:+.4f}"));
    table += fmt::format("{},{},{},{},{},{}\n", r.dir, r.method, format_real(r.avg_step), format_real(r.avg_traj),
                         r.fm_step ? format_real(*r.fm_step) : "", r.fm_traj ? format_real(*r.fm_traj) : "");
  }

  // Method means when several runs share a method.
  std::map<std::string, std::vector<const ReportRow*>> by_method;
  for (const ReportRow& r : rows) by_method[r.method].push_back(&r);
  if (by_method.size() < rows.size()) {
    fmt::print("\n{:<24} {:>4} {:>9} {:>9} {:>9}\n", "method (mean)", "runs", "Avg-Step", "Avg-Traj", "FM");
    for (const auto& [method, rs] : by_method) {
      double s = 0, t = 0, f = 0;
      int nf = 0;
      for (const ReportRow* r : rs) {
        s += r->avg_step;
        t += r->avg_traj;
        if (r->fm_step) {
          f += *r->fm_step;
          ++nf;
        }
      }
      const double n = static_cast<double>(rs.size());
      fmt::print("{:<24} {:>4} {:>9.4f} {:>9.4f} {:>9}\n", method, rs.size(), s / n, t / n,
                 nf ? fmt::format("{:+.4f}", f / nf) : std::string("-"));
    }
  }

  fs::create_directories(out);
  write_file(fs::path(out) / "summary.csv", table);
  for (const auto& [name, csv] : series) write_file(fs::path(out) / name, csv);
  fmt::print("\nwrote {} and {} series files to {}\n", "summary.csv", series.size(), out);
  return kExitOk;
}

int cmd_verify(const TheoryOptions& options, const std::string& json_out) {
  options.validate();
  const std::vector<CheckReport> reports = run_all_checks(options);
  bool ok = true;
  for (const CheckReport& r : reports) {
    fmt::print("{}  {:<22} {}/{} trials (required rate {:.2f})\n", r.passed ? "PASS" : "FAIL", r.name, r.successes,
               r.trials, r.required_rate);
    if (!r.passed) {
      ok = false;
      fmt::print("      failing check {}: {}\n", r.name, r.failure);
    }
  }
  if (!json_out.empty()) write_file(json_out, reports_to_json(reports));
  return ok ? kExitOk : kExitVerifyFailed;
}

int cmd_eval(const std::string& suite_path, const std::string& checkpoint) {
  const SuiteFile suite = load_suite(suite_path);
  const PolicyModel model = load_checkpoint(checkpoint);
  const ActionSpace space = suite.config.action_space();
  if (model.num_actions() != space.size() || model.input_dim() != suite.config.input_dim())
    throw ConfigMismatch(fmt::format("checkpoint is {}x{}, suite needs {}x{}", model.num_actions(), model.input_dim(),
                                     space.size(), suite.config.input_dim()));
  fmt::print("{:<4} {:<18} {:>9} {:>9}\n", "id", "task", "step acc", "traj acc");
  for (const TaskDataset& t : suite.tasks) {
    const TaskAccuracy a = eval_task(model, space, t.test);
    fmt::print("{:<4} {:<18} {:>9.4f} {:>9.4f}\n", t.task_id, t.name, a.step_acc, a.traj_acc);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual GUI-agent learning lab: generate suites, train, report, verify"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "spdlog level (trace, debug, info, warn, error, off)");

  std::string gen_config, gen_out;
  CLI::App* gen = app.add_subcommand("generate", "Generate a synthetic GUI suite file");
  gen->add_option("--config", gen_config, "suite config JSON (defaults when omitted)");
  gen->add_option("--out,-o", gen_out, "suite file to write")->required();

  std::string train_config, train_suite, train_out;
  std::optional<int> train_workers;
  CLI::App* train = app.add_subcommand("train", "Run one continual-learning sequence");
  train->add_option("--config", train_config, "run config JSON")->required();
  train->add_option("--suite", train_suite, "suite file (overrides the config's suite_path)");
  train->add_option("--out,-o", train_out, "results directory")->required();
  train->add_option("--workers", train_workers, "rollout worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  CLI::App* report = app.add_subcommand("report", "Summarize results directories and emit per-step series");
  report->add_option("dirs", report_dirs, "results directories written by train")->required();
  report->add_option("--out,-o", report_out, "directory for summary.csv and series files")->capture_default_str();

  TheoryOptions theory;
  std::string verify_json;
  CLI::App* verify = app.add_subcommand("verify", "Run the entropy-dynamics checks; exit 1 on any failure");
  verify->add_option("--trials", theory.trials, "random trials per check")->capture_default_str();
  verify->add_option("--seed", theory.seed, "seed of the trial generator")->capture_default_str();
  verify->add_option("--eta", theory.eta, "largest step size")->capture_default_str();
  verify->add_flag("--flip-covariance-sign", theory.flip_covariance_sign,
                   "mutation test: negate every covariance (the checks must then fail)");
  verify->add_option("--json", verify_json, "also write the reports as JSON");

  std::string defaults_kind;
  CLI::App* defaults = app.add_subcommand("defaults", "Print a default config file");
  defaults->add_option("kind", defaults_kind, "suite or run")->required()->check(CLI::IsMember({"suite", "run"}));

  std::string eval_suite, eval_ckpt;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on every task's test split");
  eval->add_option("--suite", eval_suite, "suite file")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*gen) return cmd_generate(gen_config, gen_out);
    if (*train) return cmd_train(train_config, train_suite, train_out, train_workers);
    if (*report) return cmd_report(report_dirs, report_out);
    if (*verify) return cmd_verify(theory, verify_json);
    if (*eval) return cmd_eval(eval_suite, eval_ckpt);
    if (*defaults) {
      fmt::print("{}\n", defaults_kind == "suite" ? suite_config_to_json(SuiteConfig{}) : run_config_to_json(RunConfig{}));
      return kExitOk;
    }
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const ConfigMismatch& e) {
    spdlog::error("config mismatch: {}", e.what());
    return kExitMismatch;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInternal;
  }
  return kExitInput;
}
