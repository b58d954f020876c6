#pragma once

#include <span>
#include <vector>

#include "cgl/grpo.hpp"
#include "cgl/policy.hpp"
#include "cgl/rng.hpp"

namespace cgl {

inline constexpr int kDefaultBoxSamples = 8;

// Target logit indices for the supervised loss. Non-spatial ground truth
// yields its single index. Spatial ground truth yields `box_samples` cells
// drawn uniformly (with replacement) among cells whose centers lie inside the
// box; a box containing no cell center falls back to the cell holding the
// box center.
std::vector<int> sft_targets(const ActionSpace& space, const Query& query, RngStream& rng,
                             int box_samples = kDefaultBoxSamples);

// Cells whose centers lie inside the box (closed), row-major.
std::vector<Cell> cells_inside(const ActionSpace& space, const BoundingBox& box);

// Mean negative log-likelihood of the targets and its logit gradient.
LogitLoss sft_logit_loss(const ActionDistribution& dist, std::span<const int> targets);

LossAndGrad sft_loss_and_grad(const PolicyModel& model, const ActionSpace& space,
                              const Query& query, RngStream& rng,
                              int box_samples = kDefaultBoxSamples);

// eta * pi(a*) * (1[a = a*] - pi(a)): the logit update from ascending the
// target probability directly. Used by the entropy-dynamics checks, not by
// training (training follows the NLL gradient, which differs only by the
// positive factor pi(a*)).
std::vector<double> sft_logit_update(const ActionDistribution& dist, int target, double eta);

}  // namespace cgl
