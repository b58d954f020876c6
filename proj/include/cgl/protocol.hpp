#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgl/grpo.hpp"
#include "cgl/hybrid.hpp"
#include "cgl/metrics.hpp"
#include "cgl/policy.hpp"
#include "cgl/suite_io.hpp"

namespace cgl {

enum class MethodKind { SFT, SFT_KL, SFT_Replay, GRPO, CGL, Joint };

std::string_view to_string(MethodKind kind);
std::optional<MethodKind> parse_method_kind(std::string_view name);

struct MethodSpec {
  MethodKind kind = MethodKind::CGL;
  // CGL ablation toggles; ignored by the other methods.
  bool use_routing = true;
  bool use_dynamic_lambda = true;
  bool use_surgery = true;
  double static_lambda = 1.0;
  // SFT_Replay only: fraction of each finished task's training trajectories kept.
  double replay_fraction = 0.05;
  // SFT_Replay only: buffer queries appended to every batch once the buffer is non-empty.
  int replay_batch = 4;

  void validate() const;
  std::string label() const;  // e.g. "cgl", "cgl[-routing]"
};

struct RunConfig {
  std::string suite_path;
  std::vector<int> order;  // task ids in training order
  MethodSpec method;
  int steps_per_task = 200;
  int batch_size = 16;
  int group_size = 8;
  int box_samples = 8;
  double learning_rate = 1.0;      // SFT-family updates (and every method's first task)
  double rl_learning_rate = 0.1;   // GRPO and CGL updates
  double beta = 0.01;
  double clip_eps = kDefaultClipEps;
  double adv_eps = kDefaultAdvantageEps;
  SchedulerConfig scheduler{.normalize_entropy = true};
  int hidden = 0;
  std::string init_checkpoint;  // optional starting parameters
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;                                 // InputError
  void check_against(const SuiteConfig& suite) const;    // ConfigMismatch
};

struct TelemetryRow {
  int global_step = 0;
  int stage = 0;
  int task_id = 0;
  int step_in_task = 0;
  std::string update;  // sft | sft_kl | grpo | cgl
  double mean_entropy = 0.0;
  double lambda = 0.0;
  double routed_fraction = 0.0;
  std::optional<double> cos_alpha;
  bool conflict = false;
  double grad_norm_grpo = 0.0;
  double grad_norm_sft_raw = 0.0;
  double grad_norm_sft_final = 0.0;
  double loss = 0.0;
  double mean_reward = 0.0;
};

// Hooks for instrumentation (data isolation and inheritance checks).
struct RunObserver {
  std::function<void(int stage, std::span<const Query> batch)> on_batch;
  std::function<void(int stage, const PolicyModel& model)> on_stage_begin;
  std::function<void(int stage, const PolicyModel& model)> on_stage_end;
};

struct RunResult {
  std::vector<int> order;
  std::vector<std::string> task_names;  // in training order
  AccuracyMatrix step_matrix{1, MetricKind::Step};
  AccuracyMatrix traj_matrix{1, MetricKind::Trajectory};
  std::optional<double> fm_step;  // absent for single-task runs
  std::optional<double> fm_traj;
  double avg_step = 0.0;
  double avg_traj = 0.0;
  std::vector<TelemetryRow> telemetry;
  PolicyModel final_model{1, 1};
};

// Sequential training over config.order. Every method trains its first task
// with plain SFT, then applies its own rule; after each stage the model is
// evaluated on the test sets of all tasks seen so far.
RunResult run_continual(const RunConfig& config, const SuiteFile& suite,
                        const RunObserver* observer = nullptr);

struct SftStepReport {
  double loss = 0.0;
  double mean_entropy = 0.0;
  double grad_norm = 0.0;
};

// Plain supervised step: batch-mean NLL (box-augmented for spatial targets)
// plus beta * KL(pi || pi_ref) when beta > 0.
SftStepReport sft_step(PolicyModel& model, const PolicyModel& model_ref, const ActionSpace& space,
                       std::span<const Query> batch, double learning_rate, double beta,
                       int box_samples, const RngStream& step_rng);

// Method-specific update used from the second task on. `stage_kind` is the
// effective method (SFT for the first task).
struct BaselineStepResult {
  TelemetryRow row;
};
BaselineStepResult baseline_step(MethodKind stage_kind, const RunConfig& config, PolicyModel& model,
                                 const PolicyModel& model_ref, const ActionSpace& space,
                                 std::span<const Query> batch, SchedulerState& scheduler,
                                 const RngStream& step_rng);

// Writes config.json, step_matrix.csv, traj_matrix.csv, summary.json,
// telemetry.csv and checkpoint.txt into `dir` (created if needed).
void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config,
                       const RunResult& result);

std::string telemetry_csv(std::span<const TelemetryRow> rows);

}  // namespace cgl
