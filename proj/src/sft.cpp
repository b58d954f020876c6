#include "cgl/sft.hpp"

#include <spdlog/spdlog.h>

#include "cgl/error.hpp"

namespace cgl {

std::vector<Cell> cells_inside(const ActionSpace& space, const BoundingBox& box) {
  std::vector<int> cols, rows;
  for (int i = 0; i < space.grid(); ++i) {
    const Point c = space.cell_center({i, i});
    if (c.x >= box.x_min && c.x <= box.x_max) cols.push_back(i);
    if (c.y >= box.y_min && c.y <= box.y_max) rows.push_back(i);
  }
  std::vector<Cell> cells;
  for (int r : rows) {
    for (int c : cols) cells.push_back({c, r});
  }
  return cells;
}

std::vector<int> sft_targets(const ActionSpace& space, const Query& query, RngStream& rng,
                             int box_samples) {
  const GuiAction& gt = query.gt_action;
  if (action_class(gt.kind) != ActionClass::Spatial) return {space.encode(gt)};
  if (!query.gt_bbox) throw ContractError("sft_targets(): spatial ground truth without a box");
  if (box_samples < 1) throw InputError("sft_targets(): box_samples must be >= 1");

  const BoundingBox& box = *query.gt_bbox;
  const std::vector<Cell> cells = cells_inside(space, box);
  if (cells.empty()) {
    spdlog::warn("bounding box [{}, {}]x[{}, {}] contains no cell center; using the center cell",
                 box.x_min, box.x_max, box.y_min, box.y_max);
    return {space.spatial_index(gt.kind, space.discretize(box.center()))};
  }
  std::vector<int> targets;
  targets.reserve(static_cast<std::size_t>(box_samples));
  for (int j = 0; j < box_samples; ++j) {
    targets.push_back(space.spatial_index(gt.kind, cells[rng.uniform_index(cells.size())]));
  }
  return targets;
}

LogitLoss sft_logit_loss(const ActionDistribution& dist, std::span<const int> targets) {
  if (targets.empty()) throw InputError("sft_logit_loss(): no targets");
  const double w = 1.0 / static_cast<double>(targets.size());
  LogitLoss out;
  out.dlogits = dist.probs;  // d(-log p_t)/dz = p - e_t, averaged over targets
  for (int t : targets) {
    if (t < 0 || t >= dist.size()) throw InputError("sft_logit_loss(): target out of range");
    out.loss -= w * dist.log_probs[static_cast<std::size_t>(t)];
    out.dlogits[static_cast<std::size_t>(t)] -= w;
  }
  return out;
}

LossAndGrad sft_loss_and_grad(const PolicyModel& model, const ActionSpace& space,
                              const Query& query, RngStream& rng, int box_samples) {
  const std::vector<int> targets = sft_targets(space, query, rng, box_samples);
  const ActionDistribution dist = forward(model, query.features);
  LogitLoss l = sft_logit_loss(dist, targets);
  LossAndGrad out;
  out.loss = l.loss;
  out.grad.assign(model.num_params(), 0.0);
  model.accumulate_grad(query.features, l.dlogits, 1.0, out.grad);
  return out;
}

std::vector<double> sft_logit_update(const ActionDistribution& dist, int target, double eta) {
  if (target < 0 || target >= dist.size()) throw InputError("sft_logit_update(): bad target");
  const double scale = eta * dist.probs[static_cast<std::size_t>(target)];
  std::vector<double> dz(dist.probs.size());
  for (std::size_t a = 0; a < dz.size(); ++a) dz[a] = -scale * dist.probs[a];
  dz[static_cast<std::size_t>(target)] += scale;
  return dz;
}

}  // namespace cgl
