#include "cgl/reward.hpp"

#include "cgl/error.hpp"

namespace cgl {

int reward_ceiling(ActionKind gt_kind) {
  return action_class(gt_kind) == ActionClass::NavState ? 1 : 2;
}

RewardOutcome score(const GuiAction& pred, const GuiAction& gt,
                    const std::optional<BoundingBox>& gt_bbox) {
  const ActionClass cls = action_class(gt.kind);
  if (cls == ActionClass::Spatial && !gt_bbox) {
    throw ContractError("score(): spatial ground truth " + gt.describe() + " has no bounding box");
  }

  RewardOutcome out;
  out.r_max = reward_ceiling(gt.kind);
  out.type_matched = pred.kind == gt.kind;
  if (!out.type_matched) return out;

  switch (cls) {
    case ActionClass::NavState:
      out.arg_matched = true;
      break;
    case ActionClass::Parameterized:
      out.arg_matched = pred.text == gt.text && pred.direction == gt.direction && pred.app == gt.app;
      break;
    case ActionClass::Spatial:
      out.arg_matched = pred.coord.has_value() && gt_bbox->contains(*pred.coord);
      break;
  }
  out.value = 1 + (cls != ActionClass::NavState && out.arg_matched ? 1 : 0);
  return out;
}

}  // namespace cgl
