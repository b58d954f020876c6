#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgl/core.hpp"
#include "cgl/policy.hpp"

namespace cgl {

enum class MetricKind { Step, Trajectory };

// Lower-triangular accuracy table: entry (n, k), k <= n, is the accuracy on
// the k-th trained task after training stage n (both 0-based here).
class AccuracyMatrix {
 public:
  AccuracyMatrix(int num_tasks, MetricKind kind);

  int size() const { return n_; }
  MetricKind kind() const { return kind_; }

  void set(int stage, int task, double accuracy);
  std::optional<double> get(int stage, int task) const;
  double at(int stage, int task) const;  // throws InputError if unset
  bool row_complete(int stage) const;

  // Rows = stages, columns = tasks in training order; upper triangle blank.
  std::string to_csv(std::span<const std::string> task_names) const;

 private:
  std::size_t index(int stage, int task) const;

  int n_;
  MetricKind kind_;
  std::vector<std::optional<double>> cells_;
};

struct TaskAccuracy {
  double step_acc = 0.0;
  double traj_acc = 0.0;
  int steps = 0;
  int trajectories = 0;
};

// Greedy (argmax) decoding per step under teacher forcing.
TaskAccuracy eval_task(const PolicyModel& model, const ActionSpace& space,
                       std::span<const Trajectory> test);

// (1/(N-1)) * sum_{k<N-1} (A[N-1][k] - A[k][k]). Negative means forgetting.
// Throws InputError when N < 2 or a needed entry is missing.
double forgetting_measure(const AccuracyMatrix& matrix);

// Mean of the last row.
double average_accuracy(const AccuracyMatrix& matrix);

}  // namespace cgl
