#include "cgl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cgl/error.hpp"

namespace cgl {
namespace {

std::size_t param_count(int k, int in, int hidden) {
  const auto K = static_cast<std::size_t>(k);
  const auto D = static_cast<std::size_t>(in);
  if (hidden == 0) return K * D;
  const auto H = static_cast<std::size_t>(hidden);
  return H * D + H + K * H;
}

void check_shape(int k, int in, int hidden) {
  if (k < 1 || in < 1 || hidden < 0) {
    throw InputError("policy needs num_actions >= 1, input_dim >= 1, hidden >= 0");
  }
}

}  // namespace

PolicyModel::PolicyModel(int num_actions, int input_dim, int hidden, std::uint64_t init_seed)
    : num_actions_(num_actions), input_dim_(input_dim), hidden_(hidden) {
  check_shape(num_actions, input_dim, hidden);
  params_.values.assign(param_count(num_actions, input_dim, hidden), 0.0);
  if (hidden_ > 0) {
    RngStream rng(init_seed, streams::kModelInit);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim_));
    const std::size_t w1 = static_cast<std::size_t>(hidden_) * input_dim_;
    for (std::size_t i = 0; i < w1; ++i) params_.values[i] = scale * rng.normal();
  }
}

PolicyModel::PolicyModel(int num_actions, int input_dim, int hidden, PolicyParams params)
    : num_actions_(num_actions), input_dim_(input_dim), hidden_(hidden), params_(std::move(params)) {
  check_shape(num_actions, input_dim, hidden);
  if (params_.size() != param_count(num_actions, input_dim, hidden)) {
    throw InputError("policy parameter vector has length " + std::to_string(params_.size()) +
                     ", expected " + std::to_string(param_count(num_actions, input_dim, hidden)));
  }
  if (!params_.all_finite()) throw NumericError("policy parameters contain non-finite values");
}

void PolicyModel::check_features(std::span<const double> features) const {
  if (features.size() != static_cast<std::size_t>(input_dim_)) {
    throw InputError("feature length " + std::to_string(features.size()) +
                     " does not match policy input_dim " + std::to_string(input_dim_));
  }
}

std::vector<double> PolicyModel::logits(std::span<const double> features) const {
  check_features(features);
  const double* theta = params_.values.data();
  const auto D = static_cast<std::size_t>(input_dim_);
  std::vector<double> z(static_cast<std::size_t>(num_actions_), 0.0);
  if (hidden_ == 0) {
    for (std::size_t a = 0; a < z.size(); ++a) {
      const double* row = theta + a * D;
      double acc = 0.0;
      for (std::size_t j = 0; j < D; ++j) acc += row[j] * features[j];
      z[a] = acc;
    }
    return z;
  }
  const auto H = static_cast<std::size_t>(hidden_);
  const double* w1 = theta;
  const double* b1 = theta + H * D;
  const double* w2 = b1 + H;
  std::vector<double> h(H);
  for (std::size_t i = 0; i < H; ++i) {
    double acc = b1[i];
    for (std::size_t j = 0; j < D; ++j) acc += w1[i * D + j] * features[j];
    h[i] = std::tanh(acc);
  }
  for (std::size_t a = 0; a < z.size(); ++a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < H; ++i) acc += w2[a * H + i] * h[i];
    z[a] = acc;
  }
  return z;
}

void PolicyModel::accumulate_grad(std::span<const double> features, std::span<const double> dlogits,
                                  double scale, std::span<double> out) const {
  check_features(features);
  if (dlogits.size() != static_cast<std::size_t>(num_actions_) || out.size() != params_.size()) {
    throw InputError("accumulate_grad(): size mismatch");
  }
  const auto D = static_cast<std::size_t>(input_dim_);
  if (hidden_ == 0) {
    for (std::size_t a = 0; a < dlogits.size(); ++a) {
      const double c = scale * dlogits[a];
      if (c == 0.0) continue;
      double* row = out.data() + a * D;
      for (std::size_t j = 0; j < D; ++j) row[j] += c * features[j];
    }
    return;
  }
  const auto H = static_cast<std::size_t>(hidden_);
  const double* theta = params_.values.data();
  const double* w1 = theta;
  const double* b1 = theta + H * D;
  const double* w2 = b1 + H;
  std::vector<double> h(H);
  for (std::size_t i = 0; i < H; ++i) {
    double acc = b1[i];
    for (std::size_t j = 0; j < D; ++j) acc += w1[i * D + j] * features[j];
    h[i] = std::tanh(acc);
  }
  double* g_w1 = out.data();
  double* g_b1 = g_w1 + H * D;
  double* g_w2 = g_b1 + H;
  std::vector<double> dh(H, 0.0);
  for (std::size_t a = 0; a < dlogits.size(); ++a) {
    const double c = scale * dlogits[a];
    if (c == 0.0) continue;
    for (std::size_t i = 0; i < H; ++i) {
      g_w2[a * H + i] += c * h[i];
      dh[i] += c * w2[a * H + i];
    }
  }
  for (std::size_t i = 0; i < H; ++i) {
    const double dpre = dh[i] * (1.0 - h[i] * h[i]);
    g_b1[i] += dpre;
    for (std::size_t j = 0; j < D; ++j) g_w1[i * D + j] += dpre * features[j];
  }
}

ActionDistribution ActionDistribution::from_logits(std::vector<double> logits) {
  if (logits.empty()) throw InputError("empty logit vector");
  const double zmax = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(zmax)) throw NumericError("non-finite logits");
  ActionDistribution d;
  d.probs.resize(logits.size());
  d.log_probs.resize(logits.size());
  double total = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    d.probs[a] = std::exp(logits[a] - zmax);
    total += d.probs[a];
  }
  const double log_total = std::log(total);
  for (std::size_t a = 0; a < logits.size(); ++a) {
    d.probs[a] /= total;
    d.log_probs[a] = logits[a] - zmax - log_total;
  }
  d.logits = std::move(logits);
  return d;
}

int ActionDistribution::argmax() const {
  // max_element returns the first maximum, giving lowest-index tie breaking.
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

ActionDistribution forward(const PolicyModel& model, std::span<const double> features) {
  return ActionDistribution::from_logits(model.logits(features));
}

double entropy(const ActionDistribution& dist) {
  double h = 0.0;
  for (std::size_t a = 0; a < dist.probs.size(); ++a) {
    if (dist.probs[a] > 0.0) h -= dist.probs[a] * dist.log_probs[a];
  }
  return std::max(h, 0.0);
}

int sample(const ActionDistribution& dist, RngStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = 0;
  for (int a = 0; a < dist.size(); ++a) {
    const double p = dist.probs[static_cast<std::size_t>(a)];
    if (p <= 0.0) continue;
    last_positive = a;
    cumulative += p;
    if (u < cumulative) return a;
  }
  // Rounding can leave the cumulative sum a hair below 1.
  return last_positive;
}

std::vector<double> logprob_logit_grad(const ActionDistribution& dist, int index) {
  if (index < 0 || index >= dist.size()) throw InputError("logprob_logit_grad(): bad index");
  std::vector<double> g(dist.probs.size());
  for (std::size_t a = 0; a < g.size(); ++a) g[a] = -dist.probs[a];
  g[static_cast<std::size_t>(index)] += 1.0;
  return g;
}

std::vector<double> entropy_logit_grad(const ActionDistribution& dist) {
  // dH/dz_a = -p_a (log p_a - E_p[log p]) with E_p[log p] = -H.
  const double mean_log = -entropy(dist);
  std::vector<double> g(dist.probs.size());
  for (std::size_t a = 0; a < g.size(); ++a) {
    g[a] = -dist.probs[a] * (dist.log_probs[a] - mean_log);
  }
  return g;
}

std::vector<double> logprob_grad(const PolicyModel& model, std::span<const double> features,
                                 int index) {
  const ActionDistribution dist = forward(model, features);
  std::vector<double> out(model.num_params(), 0.0);
  model.accumulate_grad(features, logprob_logit_grad(dist, index), 1.0, out);
  return out;
}

std::vector<double> entropy_grad(const PolicyModel& model, std::span<const double> features) {
  const ActionDistribution dist = forward(model, features);
  std::vector<double> out(model.num_params(), 0.0);
  model.accumulate_grad(features, entropy_logit_grad(dist), 1.0, out);
  return out;
}

double covariance_under(std::span<const double> probs, std::span<const double> x,
                        std::span<const double> y) {
  if (probs.size() != x.size() || probs.size() != y.size()) {
    throw InputError("covariance_under(): size mismatch");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    mx += probs[a] * x[a];
    my += probs[a] * y[a];
  }
  double cov = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) cov += probs[a] * (x[a] - mx) * (y[a] - my);
  return cov;
}

}  // namespace cgl
