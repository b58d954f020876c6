#pragma once

#include <optional>

#include "cgl/core.hpp"

namespace cgl {

struct RewardOutcome {
  int value = 0;
  int r_max = 1;
  bool type_matched = false;
  bool arg_matched = false;
};

// Reward ceiling of the ground-truth kind: 1 for navigation/state actions,
// 2 for parameterized and spatial ones.
int reward_ceiling(ActionKind gt_kind);

// Three-class GUI reward. +1 for a kind match; parameterized and spatial
// ground truths add +1 for an exact argument match or for a predicted point
// inside the (closed) ground-truth box. Throws ContractError when a spatial
// ground truth comes without a box.
RewardOutcome score(const GuiAction& pred, const GuiAction& gt,
                    const std::optional<BoundingBox>& gt_bbox);

// A step counts as correct only at full reward.
inline bool is_step_correct(const RewardOutcome& outcome) { return outcome.value == outcome.r_max; }

}  // namespace cgl
