#include "cgl/metrics.hpp"

#include <cstdio>

#include "cgl/error.hpp"
#include "cgl/reward.hpp"

namespace cgl {

AccuracyMatrix::AccuracyMatrix(int num_tasks, MetricKind kind)
    : n_(num_tasks), kind_(kind), cells_(static_cast<std::size_t>(num_tasks * num_tasks)) {
  if (num_tasks < 1) throw InputError("accuracy matrix needs at least one task");
}

std::size_t AccuracyMatrix::index(int stage, int task) const {
  if (stage < 0 || stage >= n_ || task < 0 || task > stage) {
    throw InputError("accuracy matrix index (" + std::to_string(stage) + ", " + std::to_string(task) +
                     ") outside the lower triangle");
  }
  return static_cast<std::size_t>(stage * n_ + task);
}

void AccuracyMatrix::set(int stage, int task, double accuracy) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw InputError("accuracy must lie in [0,1]");
  cells_[index(stage, task)] = accuracy;
}

std::optional<double> AccuracyMatrix::get(int stage, int task) const { return cells_[index(stage, task)]; }

double AccuracyMatrix::at(int stage, int task) const {
  const auto v = get(stage, task);
  if (!v) {
    throw InputError("accuracy matrix entry (" + std::to_string(stage) + ", " + std::to_string(task) +
                     ") is missing");
  }
  return *v;
}

bool AccuracyMatrix::row_complete(int stage) const {
  for (int k = 0; k <= stage; ++k) {
    if (!get(stage, k)) return false;
  }
  return true;
}

std::string AccuracyMatrix::to_csv(std::span<const std::string> task_names) const {
  if (task_names.size() != static_cast<std::size_t>(n_)) throw InputError("to_csv(): wrong number of task names");
  std::string out = "stage";
  for (const auto& name : task_names) out += "," + name;
  out += "\n";
  char buf[32];
  for (int n = 0; n < n_; ++n) {
    out += task_names[static_cast<std::size_t>(n)];
    for (int k = 0; k < n_; ++k) {
      out += ",";
      if (k <= n) {
        if (const auto v = get(n, k)) {
          std::snprintf(buf, sizeof buf, "%.17g", *v);
          out += buf;
        }
      }
    }
    out += "\n";
  }
  return out;
}

TaskAccuracy eval_task(const PolicyModel& model, const ActionSpace& space,
                       std::span<const Trajectory> test) {
  if (test.empty()) throw InputError("eval_task(): empty test set");
  TaskAccuracy acc;
  int correct_steps = 0;
  int correct_trajs = 0;
  for (const Trajectory& traj : test) {
    bool all_correct = true;
    for (const Step& step : traj.steps) {
      const std::vector<double> features = combined_features(step.observation, traj.instruction);
      const std::vector<double> z = model.logits(features);
      int best = 0;
      for (int a = 1; a < static_cast<int>(z.size()); ++a) {
        if (z[static_cast<std::size_t>(a)] > z[static_cast<std::size_t>(best)]) best = a;
      }
      const bool ok = is_step_correct(score(space.decode(best), step.gt_action, step.gt_bbox));
      correct_steps += ok ? 1 : 0;
      all_correct = all_correct && ok;
      ++acc.steps;
    }
    correct_trajs += all_correct ? 1 : 0;
    ++acc.trajectories;
  }
  acc.step_acc = static_cast<double>(correct_steps) / acc.steps;
  acc.traj_acc = static_cast<double>(correct_trajs) / acc.trajectories;
  return acc;
}

double forgetting_measure(const AccuracyMatrix& m) {
  const int N = m.size();
  if (N < 2) throw InputError("forgetting measure is undefined for fewer than two tasks");
  double total = 0.0;
  for (int k = 0; k < N - 1; ++k) total += m.at(N - 1, k) - m.at(k, k);
  return total / (N - 1);
}

double average_accuracy(const AccuracyMatrix& m) {
  const int last = m.size() - 1;
  double total = 0.0;
  for (int k = 0; k <= last; ++k) total += m.at(last, k);
  return total / (last + 1);
}

}  // namespace cgl
