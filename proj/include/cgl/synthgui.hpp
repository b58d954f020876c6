#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgl/core.hpp"

namespace cgl {

// Procedural suite of GUI task domains. Each task owns a disjoint block of
// app ids, its own feature embedding, its own screen widgets and its own
// ground-truth rule; the domain_shift knob interpolates all of them between a
// shared template (0) and fully independent per-task draws (1).
struct SuiteConfig {
  int n_tasks = 7;
  int apps_per_task = 3;
  int trajs_per_app = 40;
  int steps_min = 3;
  int steps_max = 7;
  int obs_dim = 64;    // D; feature 0 is a constant 1 (bias input)
  int instr_dim = 16;  // D_I
  int grid = 16;       // R
  int vocab = 32;      // V
  int apps = 21;       // M; must cover n_tasks * apps_per_task
  int layout_dim = 6;  // latent layout dimensions per step
  int intent_dim = 4;  // latent intent dimensions per trajectory
  int widgets = 6;     // clickable widgets per task screen
  double domain_shift = 0.1;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const;  // throws InputError
  ActionSpace action_space() const { return ActionSpace(grid, vocab, apps); }
  int input_dim() const { return obs_dim + instr_dim; }
  int trajectories_per_task() const { return apps_per_task * trajs_per_app; }
  int test_trajectories_per_task() const;

  friend bool operator==(const SuiteConfig&, const SuiteConfig&) = default;
};

// Latent variables behind one generated step; kept so tests can query the
// ground-truth rule directly.
struct StepLatent {
  int app_id = 0;
  int step_index = 0;
  int num_steps = 1;
  std::vector<double> intent;
  std::vector<double> layout;
};

struct GroundTruth {
  GuiAction action;
  std::optional<BoundingBox> bbox;
};

// Per-task generative parameters.
struct DomainSpec {
  int task_id = 0;
  std::vector<int> app_ids;
  std::vector<std::vector<double>> app_codes;  // one code per app
  std::vector<double> obs_basis;               // (obs_dim - 1) x (2 + layout_dim), row-major
  std::vector<double> obs_center;              // obs_dim - 1
  std::vector<double> instr_basis;             // instr_dim x (app_code_dim + intent_dim)
  // Unit score vectors over [layout; intent]: one per non-final kind, widget,
  // text token and scroll direction. Each choice is the argmax of its scores.
  std::vector<std::vector<double>> rule;
  std::vector<BoundingBox> widgets;            // click targets, each side in [1/R, 4/R]
  std::vector<int> token_table;                // text tokens used by this task

  // Pure map from latents to the ground-truth action (and box for spatial kinds).
  GroundTruth gt_rule(const SuiteConfig& cfg, const StepLatent& latent) const;
  std::vector<double> observation(const SuiteConfig& cfg, const StepLatent& latent,
                                  std::span<const double> noise) const;
  std::vector<double> instruction(const SuiteConfig& cfg, const StepLatent& latent) const;
};

inline constexpr int kAppCodeDim = 3;
inline constexpr int kTokensPerTask = 4;

std::vector<DomainSpec> make_domains(const SuiteConfig& config);

std::vector<TaskDataset> generate_suite(const SuiteConfig& config);

// Same as generate_suite, also returning the latent of every step, indexed
// [task][trajectory-in-train-then-test order][step].
struct SuiteWithLatents {
  std::vector<TaskDataset> tasks;
  std::vector<DomainSpec> domains;
  std::vector<std::vector<std::vector<StepLatent>>> latents;
};
SuiteWithLatents generate_suite_with_latents(const SuiteConfig& config);

std::string default_task_name(int task_id);

// Named task orders over the seven default tasks.
std::vector<int> task_order_preset(int preset, int n_tasks);

// Kind mix of non-final steps (Finish always closes a trajectory).
struct KindFrequency {
  ActionKind kind;
  double frequency;
};
const std::vector<KindFrequency>& non_final_kind_mix();

}  // namespace cgl
