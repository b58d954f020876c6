#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cgl/policy.hpp"

namespace cgl {

// Numerical checks of the logit-space entropy dynamics used to motivate the
// entropy-regulated SFT weight.

// H(softmax(z + eta * dz)) - H(softmax(z)), computed exactly.
double exact_entropy_change(const ActionDistribution& dist, std::span<const double> delta_z, double eta);
// First-order prediction -eta * Cov_{a~pi}(log pi(a), dz_a).
double predicted_entropy_change(const ActionDistribution& dist, std::span<const double> delta_z, double eta);

struct EntropyCovariancePoint {
  double eta = 0.0;
  double exact = 0.0;
  double predicted = 0.0;
  double error = 0.0;  // |exact - predicted|
};

struct EntropyCovarianceReport {
  std::vector<EntropyCovariancePoint> points;
  // e(eta_{j+1}) <= ratio * e(eta_j) for each of the last kDecayPairs
  // consecutive steps (the small-eta end of the list) whose larger error is
  // above the round-off floor.
  bool second_order_decay = false;
};

inline constexpr double kDecayRatio = 0.35;
inline constexpr double kErrorFloor = 1e-12;
inline constexpr std::size_t kDecayPairs = 3;

EntropyCovarianceReport check_entropy_covariance(const ActionDistribution& dist,
                                                 std::span<const double> delta_z,
                                                 std::span<const double> eta_list,
                                                 bool flip_covariance_sign = false);

struct TheoryOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  int min_actions = 2;
  int max_actions = 32;
  double eta = 1e-2;
  double required_rate = 0.99;
  // Mutation hook: negate every covariance so the harness can prove it bites.
  bool flip_covariance_sign = false;

  void validate() const;
};

struct CheckReport {
  std::string name;
  bool passed = false;
  int trials = 0;
  int successes = 0;
  double required_rate = 0.0;
  std::vector<std::pair<std::string, double>> metrics;
  std::string failure;  // first failing trial, if any

  double success_rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / trials; }
};

// Random logits and updates; passes iff every trial shows second-order decay.
CheckReport check_lemma_entropy_covariance(const TheoryOptions& options);
// Delta z = eta * pi * A with A rank-aligned (or anti-aligned) with pi.
CheckReport check_matthew_effect(const TheoryOptions& options, bool aligned = true);
// sft_logit_update on distributions with pi(a*) < 1/K.
CheckReport check_sft_injection(const TheoryOptions& options);

std::vector<CheckReport> run_all_checks(const TheoryOptions& options);
std::string reports_to_json(std::span<const CheckReport> reports);

}  // namespace cgl
