#include "cgl/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "cgl/error.hpp"
#include "cgl/reward.hpp"

namespace cgl {

Query make_query(const Trajectory& traj, const Step& step, int task_id) {
  Query q;
  q.features = combined_features(step.observation, traj.instruction);
  q.gt_action = step.gt_action;
  q.gt_bbox = step.gt_bbox;
  q.task_id = task_id;
  q.trajectory_uid = traj.uid;
  return q;
}

int RolloutGroup::max_reward() const {
  int best = 0;
  for (const auto& s : samples) best = std::max(best, s.reward);
  return best;
}

std::vector<double> normalized_advantages(std::span<const double> rewards, double eps,
                                          double* mean_out, double* std_out) {
  const auto n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  if (mean_out) *mean_out = mean;
  if (std_out) *std_out = sd;

  std::vector<double> adv(rewards.size(), 0.0);
  if (sd == 0.0) return adv;
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = (rewards[i] - mean) / (sd + eps);
  return adv;
}

RolloutGroup make_group(const Query& query, std::span<const RolloutSample> samples, double adv_eps) {
  if (samples.size() < 2) throw InputError("rollout group needs G >= 2");
  RolloutGroup g;
  g.query = &query;
  g.r_max = reward_ceiling(query.gt_action.kind);
  g.samples.assign(samples.begin(), samples.end());
  std::vector<double> rewards;
  rewards.reserve(samples.size());
  for (const auto& s : samples) rewards.push_back(static_cast<double>(s.reward));
  g.advantages = normalized_advantages(rewards, adv_eps, &g.group_mean, &g.group_std);
  return g;
}

RolloutGroup rollout(const PolicyModel& model_old, const ActionSpace& space, const Query& query,
                     int group_size, RngStream& rng, double adv_eps) {
  if (group_size < 2) throw InputError("rollout(): G must be >= 2");
  const ActionDistribution dist = forward(model_old, query.features);
  std::vector<RolloutSample> samples;
  samples.reserve(static_cast<std::size_t>(group_size));
  for (int i = 0; i < group_size; ++i) {
    RolloutSample s;
    s.action = sample(dist, rng);
    s.reward = score(space.decode(s.action), query.gt_action, query.gt_bbox).value;
    s.old_logprob = dist.log_probs[static_cast<std::size_t>(s.action)];
    samples.push_back(s);
  }
  return make_group(query, samples, adv_eps);
}

double kl_exact(const ActionDistribution& p, const ActionDistribution& q) {
  if (p.size() != q.size()) throw InputError("kl_exact(): distributions differ in size");
  double kl = 0.0;
  for (std::size_t a = 0; a < p.probs.size(); ++a) {
    if (p.probs[a] > 0.0) kl += p.probs[a] * (p.log_probs[a] - q.log_probs[a]);
  }
  return std::max(kl, 0.0);
}

std::vector<double> kl_logit_grad(const ActionDistribution& p, const ActionDistribution& q) {
  if (p.size() != q.size()) throw InputError("kl_logit_grad(): distributions differ in size");
  double kl = 0.0;
  for (std::size_t a = 0; a < p.probs.size(); ++a) kl += p.probs[a] * (p.log_probs[a] - q.log_probs[a]);
  std::vector<double> g(p.probs.size());
  for (std::size_t a = 0; a < g.size(); ++a) {
    g[a] = p.probs[a] * (p.log_probs[a] - q.log_probs[a] - kl);
  }
  return g;
}

LogitLoss grpo_logit_loss(const ActionDistribution& current, const ActionDistribution& reference,
                          const RolloutGroup& group, double clip_eps, double beta) {
  const auto G = static_cast<double>(group.samples.size());
  LogitLoss out;
  out.dlogits.assign(current.probs.size(), 0.0);
  double surrogate = 0.0;
  for (std::size_t i = 0; i < group.samples.size(); ++i) {
    const auto& s = group.samples[i];
    const double adv = group.advantages[i];
    if (!std::isfinite(s.old_logprob)) throw NumericError("grpo: non-finite old log-probability");
    const double ratio = std::exp(current.log_probs[static_cast<std::size_t>(s.action)] - s.old_logprob);
    if (!std::isfinite(ratio)) throw NumericError("grpo: non-finite importance ratio");
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    const double unclipped_term = ratio * adv;
    const double clipped_term = clipped * adv;
    if (unclipped_term <= clipped_term) {
      surrogate += unclipped_term;
      // d(-rho A / G)/dz = -(A rho / G) (e_a - pi)
      const double c = -adv * ratio / G;
      if (c != 0.0) {
        for (std::size_t a = 0; a < out.dlogits.size(); ++a) out.dlogits[a] -= c * current.probs[a];
        out.dlogits[static_cast<std::size_t>(s.action)] += c;
      }
    } else {
      surrogate += clipped_term;  // constant in theta
    }
  }
  out.kl = kl_exact(current, reference);
  out.loss = -surrogate / G + beta * out.kl;
  if (beta != 0.0) {
    const std::vector<double> gkl = kl_logit_grad(current, reference);
    for (std::size_t a = 0; a < out.dlogits.size(); ++a) out.dlogits[a] += beta * gkl[a];
  }
  return out;
}

LossAndGrad grpo_loss_and_grad(const PolicyModel& model, const PolicyModel& model_ref,
                               const RolloutGroup& group, double clip_eps, double beta) {
  if (!group.query) throw ContractError("grpo_loss_and_grad(): group has no query");
  const ActionDistribution current = forward(model, group.query->features);
  const ActionDistribution reference = forward(model_ref, group.query->features);
  LogitLoss l = grpo_logit_loss(current, reference, group, clip_eps, beta);
  LossAndGrad out;
  out.loss = l.loss;
  out.grad.assign(model.num_params(), 0.0);
  model.accumulate_grad(group.query->features, l.dlogits, 1.0, out.grad);
  return out;
}

}  // namespace cgl
