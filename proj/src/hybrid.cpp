#include "cgl/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cgl/error.hpp"
#include "cgl/sft.hpp"
#include "parallel.hpp"

namespace cgl {

void SchedulerConfig::validate() const {
  if (!(lambda_min <= lambda_max)) throw InputError("scheduler: lambda_min must be <= lambda_max");
  if (step_w < 1) throw InputError("scheduler: step_w must be >= 1");
  if (!(k > 0.0)) throw InputError("scheduler: k must be > 0");
  if (!(gamma > 0.0)) throw InputError("scheduler: gamma must be > 0");
  if (!(h_max > 0.0)) throw InputError("scheduler: h_max must be > 0");
}

double lambda_value(const SchedulerState& state, double mean_entropy) {
  const SchedulerConfig& c = state.config;
  const double span = c.lambda_max - c.lambda_min;
  double lambda = 0.0;
  if (state.in_warmup()) {
    lambda = c.lambda_min + span * static_cast<double>(state.step_in_task + 1) / c.step_w;
  } else {
    double h = std::max(mean_entropy, 0.0);
    if (c.normalize_entropy && state.num_actions > 1) h /= std::log(static_cast<double>(state.num_actions));
    if (c.clamp_entropy) h = std::min(h, c.h_max);
    lambda = span * std::min(1.0, c.k * std::exp(c.gamma * h)) + c.lambda_min;
  }
  return std::clamp(lambda, c.lambda_min, c.lambda_max);
}

bool should_route_to_sft(const RolloutGroup& group) { return group.max_reward() < group.r_max; }

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

SurgeryResult surgery_detailed(std::span<const double> g_sft, std::span<const double> g_grpo) {
  if (g_sft.size() != g_grpo.size()) throw InputError("surgery(): gradient sizes differ");
  for (std::size_t i = 0; i < g_sft.size(); ++i) {
    if (!std::isfinite(g_sft[i]) || !std::isfinite(g_grpo[i])) {
      throw NumericError("surgery(): non-finite gradient entry");
    }
  }
  SurgeryResult out;
  out.gradient.assign(g_sft.begin(), g_sft.end());
  const double n_sft = l2_norm(g_sft);
  const double n_grpo = l2_norm(g_grpo);
  if (n_sft < kSurgeryNormFloor || n_grpo < kSurgeryNormFloor) return out;

  const double d = dot(g_sft, g_grpo);
  out.cos_alpha = d / (n_sft * n_grpo);
  if (*out.cos_alpha >= 0.0) return out;

  out.conflict = true;
  const double coef = d / (n_grpo * n_grpo);
  for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] -= coef * g_grpo[i];
  return out;
}

std::vector<double> surgery(std::span<const double> g_sft, std::span<const double> g_grpo) {
  return surgery_detailed(g_sft, g_grpo).gradient;
}

namespace {

struct QueryWork {
  std::vector<double> grpo_dlogits;
  std::vector<double> sft_dlogits;
  double entropy = 0.0;
  double grpo_loss = 0.0;
  double sft_loss = 0.0;
  double kl = 0.0;
  double mean_reward = 0.0;
  bool routed = false;
};

}  // namespace

HybridStepReport hybrid_step(PolicyModel& model, const PolicyModel& model_old,
                             const PolicyModel& model_ref, const ActionSpace& space,
                             std::span<const Query> batch, SchedulerState& state,
                             const HybridConfig& config, const RngStream& step_rng) {
  if (batch.empty()) throw InputError("hybrid_step(): empty batch");
  const std::size_t B = batch.size();
  std::vector<QueryWork> work(B);

  // Rollouts, GRPO terms and entropies. The SFT weight is only known after the
  // batch entropy is, so SFT targets are computed in a second pass.
  std::vector<ActionDistribution> current(B);
  detail::parallel_for(B, config.workers, [&](std::size_t i) {
    const Query& q = batch[i];
    RngStream rollout_rng = step_rng.split(2 * i);
    const RolloutGroup group = rollout(model_old, space, q, config.group_size, rollout_rng, config.adv_eps);
    current[i] = forward(model, q.features);
    const ActionDistribution reference = forward(model_ref, q.features);
    LogitLoss g = grpo_logit_loss(current[i], reference, group, config.clip_eps, config.beta);
    QueryWork& w = work[i];
    w.grpo_dlogits = std::move(g.dlogits);
    w.grpo_loss = g.loss;
    w.kl = g.kl;
    w.entropy = entropy(current[i]);
    w.routed = config.use_routing ? should_route_to_sft(group) : true;
    double total = 0.0;
    for (const auto& s : group.samples) total += s.reward;
    w.mean_reward = total / static_cast<double>(group.samples.size());
  });

  HybridStepReport report;
  report.batch_size = static_cast<int>(B);
  for (const auto& w : work) {
    report.mean_entropy += w.entropy;
    report.grpo_loss += w.grpo_loss;
    report.mean_kl += w.kl;
    report.mean_reward += w.mean_reward;
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  report.mean_entropy *= inv_b;
  report.grpo_loss *= inv_b;
  report.mean_kl *= inv_b;
  report.mean_reward *= inv_b;

  const double lambda =
      config.use_dynamic_lambda ? lambda_value(state, report.mean_entropy) : config.static_lambda;
  report.lambda_used = lambda;
  const bool sft_active = lambda != 0.0;

  if (sft_active) {
    detail::parallel_for(B, config.workers, [&](std::size_t i) {
      QueryWork& w = work[i];
      if (!w.routed) return;
      RngStream box_rng = step_rng.split(2 * i + 1);
      const std::vector<int> targets = sft_targets(space, batch[i], box_rng, config.box_samples);
      LogitLoss s = sft_logit_loss(current[i], targets);
      w.sft_dlogits = std::move(s.dlogits);
      w.sft_loss = s.loss;
    });
  }

  // Sequential reduction in query order keeps the result independent of `workers`.
  std::vector<double> g_grpo(model.num_params(), 0.0);
  std::vector<double> g_sft(model.num_params(), 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    const QueryWork& w = work[i];
    model.accumulate_grad(batch[i].features, w.grpo_dlogits, inv_b, g_grpo);
    if (sft_active && w.routed) {
      model.accumulate_grad(batch[i].features, w.sft_dlogits, inv_b, g_sft);
      report.sft_loss += w.sft_loss * inv_b;
      ++report.routed_queries;
    }
  }

  report.grad_norm_grpo = l2_norm(g_grpo);
  report.grad_norm_sft_raw = l2_norm(g_sft);
  std::vector<double> g_sft_final;
  if (sft_active) {
    SurgeryResult s = surgery_detailed(g_sft, g_grpo);
    report.cos_alpha = s.cos_alpha;
    report.conflict_detected = s.conflict;
    g_sft_final = config.use_surgery ? std::move(s.gradient) : std::move(g_sft);
    report.grad_norm_sft_final = l2_norm(g_sft_final);
  }

  std::vector<double>& theta = model.params().values;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    double g = g_grpo[j];
    if (sft_active) g += lambda * g_sft_final[j];
    theta[j] -= config.learning_rate * g;
  }
  if (!model.params().all_finite()) throw NumericError("hybrid_step(): parameters became non-finite");
  ++state.step_in_task;
  return report;
}

}  // namespace cgl
