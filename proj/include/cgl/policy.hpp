#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cgl/core.hpp"
#include "cgl/rng.hpp"

namespace cgl {

// Softmax policy over the discrete action index space.
//
// Linear variant (hidden == 0): logits = W * phi, W is K x input_dim stored
// row-major in the flat parameter vector.
// Hidden variant (hidden == H > 0): h = tanh(W1 * phi + b1), logits = W2 * h;
// flat layout [W1 (H x input_dim) | b1 (H) | W2 (K x H)].
class PolicyModel {
 public:
  // Linear models start at W = 0 (uniform policy). Hidden models draw W1 from
  // the init stream and start with W2 = 0, so they are uniform as well.
  PolicyModel(int num_actions, int input_dim, int hidden = 0, std::uint64_t init_seed = 0);
  PolicyModel(int num_actions, int input_dim, int hidden, PolicyParams params);

  int num_actions() const { return num_actions_; }
  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }
  std::size_t num_params() const { return params_.size(); }

  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }

  std::vector<double> logits(std::span<const double> features) const;

  // out += scale * d(logits . dlogits)/d(theta): backpropagates a logit-space
  // gradient to the flat parameter gradient.
  void accumulate_grad(std::span<const double> features, std::span<const double> dlogits,
                       double scale, std::span<double> out) const;

 private:
  void check_features(std::span<const double> features) const;

  int num_actions_;
  int input_dim_;
  int hidden_;
  PolicyParams params_;
};

struct ActionDistribution {
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<double> log_probs;

  static ActionDistribution from_logits(std::vector<double> logits);
  int size() const { return static_cast<int>(probs.size()); }
  // Ties resolve to the lowest index.
  int argmax() const;
};

ActionDistribution forward(const PolicyModel& model, std::span<const double> features);

// Shannon entropy in nats; 0 * log 0 counts as 0.
double entropy(const ActionDistribution& dist);

int sample(const ActionDistribution& dist, RngStream& rng);

// Logit-space gradients. Parameter-space versions below chain these through
// PolicyModel::accumulate_grad.
std::vector<double> logprob_logit_grad(const ActionDistribution& dist, int index);
std::vector<double> entropy_logit_grad(const ActionDistribution& dist);

std::vector<double> logprob_grad(const PolicyModel& model, std::span<const double> features,
                                 int index);
std::vector<double> entropy_grad(const PolicyModel& model, std::span<const double> features);

// Population covariance Cov_{a~p}(x_a, y_a).
double covariance_under(std::span<const double> probs, std::span<const double> x,
                        std::span<const double> y);

}  // namespace cgl
