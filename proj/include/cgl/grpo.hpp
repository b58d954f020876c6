#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cgl/core.hpp"
#include "cgl/policy.hpp"
#include "cgl/rng.hpp"

namespace cgl {

inline constexpr double kDefaultAdvantageEps = 1e-4;
inline constexpr double kDefaultClipEps = 0.2;

// One training query: the combined instruction+observation features of a step
// (history is folded into the observation) with its ground truth.
struct Query {
  std::vector<double> features;
  GuiAction gt_action;
  std::optional<BoundingBox> gt_bbox;
  int task_id = -1;
  std::uint64_t trajectory_uid = 0;
};

Query make_query(const Trajectory& traj, const Step& step, int task_id);

struct RolloutSample {
  int action = 0;
  int reward = 0;
  double old_logprob = 0.0;
};

struct RolloutGroup {
  const Query* query = nullptr;  // not owned
  int r_max = 1;
  std::vector<RolloutSample> samples;
  std::vector<double> advantages;
  double group_mean = 0.0;
  double group_std = 0.0;  // population standard deviation

  int max_reward() const;
};

// (r_i - mean) / (std + eps) with the population std; all zeros when std == 0.
std::vector<double> normalized_advantages(std::span<const double> rewards, double eps,
                                          double* mean_out = nullptr, double* std_out = nullptr);

// Draws G actions from the old policy at the query, scores them and fills the
// normalized advantages. G >= 2.
RolloutGroup rollout(const PolicyModel& model_old, const ActionSpace& space, const Query& query,
                     int group_size, RngStream& rng, double adv_eps = kDefaultAdvantageEps);

// Builds a group from explicit samples (used by tests and the theory harness).
RolloutGroup make_group(const Query& query, std::span<const RolloutSample> samples,
                        double adv_eps = kDefaultAdvantageEps);

// KL(p || q) = sum_a p_a log(p_a / q_a), exact over the discrete action space.
double kl_exact(const ActionDistribution& p, const ActionDistribution& q);
// d KL(softmax(z) || q) / dz.
std::vector<double> kl_logit_grad(const ActionDistribution& p, const ActionDistribution& q);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

struct LogitLoss {
  double loss = 0.0;
  double kl = 0.0;
  std::vector<double> dlogits;
};

// Loss = -(1/G) sum_i min(rho_i A_i, clip(rho_i, 1-c, 1+c) A_i) + beta KL(pi || pi_ref)
// with rho_i = pi(a_i) / pi_old(a_i). Returns the logit-space gradient.
LogitLoss grpo_logit_loss(const ActionDistribution& current, const ActionDistribution& reference,
                          const RolloutGroup& group, double clip_eps, double beta);

LossAndGrad grpo_loss_and_grad(const PolicyModel& model, const PolicyModel& model_ref,
                               const RolloutGroup& group, double clip_eps, double beta);

}  // namespace cgl
