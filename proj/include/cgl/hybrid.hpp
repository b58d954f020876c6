#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "cgl/grpo.hpp"
#include "cgl/policy.hpp"
#include "cgl/rng.hpp"

namespace cgl {

// Entropy-regulated SFT weight schedule.
//   warmup (step_in_task < step_w): lambda_min + (lambda_max - lambda_min) * (step + 1) / step_w
//   decay: (lambda_max - lambda_min) * min(1, k * exp(gamma * H)) + lambda_min
struct SchedulerConfig {
  double lambda_max = 1.0;
  double lambda_min = 0.0;
  int step_w = 5;
  double gamma = 20.0;
  double k = std::exp(-10.0);
  double h_max = 0.45;
  // Divide H by ln K before the decay formula.
  bool normalize_entropy = false;
  // Clamp the (possibly normalized) H to h_max before the decay formula.
  bool clamp_entropy = false;

  void validate() const;
};

struct SchedulerState {
  SchedulerConfig config;
  int num_actions = 1;   // K, used by normalize_entropy
  int step_in_task = 0;  // reset at each task boundary

  bool in_warmup() const { return step_in_task < config.step_w; }
};

double lambda_value(const SchedulerState& state, double mean_entropy);

// True iff no rollout in the group reached the ground-truth class ceiling.
bool should_route_to_sft(const RolloutGroup& group);

inline constexpr double kSurgeryNormFloor = 1e-12;

struct SurgeryResult {
  std::vector<double> gradient;
  std::optional<double> cos_alpha;  // absent when either input is (near) zero
  bool conflict = false;
};

// Conditional projection: when cos(g_sft, g_grpo) < 0 the component of g_sft
// along g_grpo is removed; otherwise g_sft is returned untouched. g_grpo is
// never modified.
SurgeryResult surgery_detailed(std::span<const double> g_sft, std::span<const double> g_grpo);
std::vector<double> surgery(std::span<const double> g_sft, std::span<const double> g_grpo);

struct HybridConfig {
  int group_size = 8;
  int box_samples = 8;
  double learning_rate = 1e-2;
  double beta = 0.01;
  double clip_eps = kDefaultClipEps;
  double adv_eps = kDefaultAdvantageEps;
  bool use_routing = true;          // D-SFT; off = SFT on every query
  bool use_dynamic_lambda = true;   // D-lambda; off = static_lambda
  bool use_surgery = true;          // G-Surg
  double static_lambda = 1.0;
  int workers = 1;
};

struct HybridStepReport {
  double lambda_used = 0.0;
  int routed_queries = 0;
  int batch_size = 0;
  double mean_entropy = 0.0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double grpo_loss = 0.0;
  double sft_loss = 0.0;
  bool conflict_detected = false;
  std::optional<double> cos_alpha;
  double grad_norm_grpo = 0.0;
  double grad_norm_sft_raw = 0.0;
  double grad_norm_sft_final = 0.0;
};

// One optimizer step of L = L_GRPO + lambda * L_SFT on a batch of queries:
// rollouts from model_old, batch-mean GRPO gradient, SFT gradient on routed
// queries (divided by the batch size), entropy-driven lambda, conditional
// surgery, then theta <- theta - lr * (g_grpo + lambda * g_sft_final).
// Per-query randomness comes from children of `step_rng`, so results do not
// depend on `workers`.
HybridStepReport hybrid_step(PolicyModel& model, const PolicyModel& model_old,
                             const PolicyModel& model_ref, const ActionSpace& space,
                             std::span<const Query> batch, SchedulerState& state,
                             const HybridConfig& config, const RngStream& step_rng);

double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace cgl
