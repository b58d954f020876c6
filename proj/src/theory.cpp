#include "cgl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "cgl/error.hpp"
#include "cgl/rng.hpp"
#include "cgl/sft.hpp"

namespace cgl {

namespace {

double signed_cov(const ActionDistribution& dist, std::span<const double> delta_z, bool flip) {
  const double c = covariance_under(dist.probs, dist.log_probs, delta_z);
  return flip ? -c : c;
}

ActionDistribution shifted(const ActionDistribution& dist, std::span<const double> delta_z, double eta) {
  std::vector<double> z = dist.logits;
  for (std::size_t a = 0; a < z.size(); ++a) z[a] += eta * delta_z[a];
  return ActionDistribution::from_logits(std::move(z));
}

// Trial t draws from its own child stream, so reports do not depend on the
// number of trials that ran before it.
RngStream trial_rng(const TheoryOptions& o, std::uint64_t check, int trial) {
  return RngStream(o.seed, streams::kTheory).split(check).split(static_cast<std::uint64_t>(trial));
}

ActionDistribution random_distribution(RngStream& rng, int K) {
  const double scale = 0.5 + 2.5 * rng.uniform();
  std::vector<double> z(static_cast<std::size_t>(K));
  for (double& v : z) v = scale * rng.normal();
  return ActionDistribution::from_logits(std::move(z));
}

int random_size(RngStream& rng, const TheoryOptions& o) {
  return o.min_actions + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(o.max_actions - o.min_actions + 1)));
}

CheckReport make_report(std::string name, int trials, double required_rate) {
  CheckReport r;
  r.name = std::move(name);
  r.trials = trials;
  r.required_rate = required_rate;
  return r;
}

std::vector<double> halving_etas(double eta0, int count) {
  std::vector<double> etas;
  for (int j = 0; j < count; ++j) etas.push_back(std::ldexp(eta0, -j));
  return etas;
}

}  // namespace

void TheoryOptions::validate() const {
  if (trials < 1) throw InputError("theory: trials must be >= 1");
  if (min_actions < 2 || max_actions < min_actions) throw InputError("theory: need 2 <= min_actions <= max_actions");
  if (!(eta > 0.0)) throw InputError("theory: eta must be > 0");
  if (!(required_rate > 0.0 && required_rate <= 1.0)) throw InputError("theory: required_rate must lie in (0, 1]");
}

double exact_entropy_change(const ActionDistribution& dist, std::span<const double> delta_z, double eta) {
  if (delta_z.size() != dist.probs.size()) throw InputError("exact_entropy_change(): size mismatch");
  return entropy(shifted(dist, delta_z, eta)) - entropy(dist);
}

double predicted_entropy_change(const ActionDistribution& dist, std::span<const double> delta_z, double eta) {
  if (delta_z.size() != dist.probs.size()) throw InputError("predicted_entropy_change(): size mismatch");
  return -eta * covariance_under(dist.probs, dist.log_probs, delta_z);
}

EntropyCovarianceReport check_entropy_covariance(const ActionDistribution& dist,
                                                 std::span<const double> delta_z,
                                                 std::span<const double> eta_list,
                                                 bool flip_covariance_sign) {
  if (delta_z.size() != dist.probs.size()) throw InputError("check_entropy_covariance(): size mismatch");
  if (eta_list.empty()) throw InputError("check_entropy_covariance(): empty eta list");
  for (std::size_t j = 0; j < eta_list.size(); ++j) {
    if (!(eta_list[j] > 0.0) || (j > 0 && !(eta_list[j] < eta_list[j - 1]))) {
      throw InputError("check_entropy_covariance(): eta list must be positive and strictly descending");
    }
  }
  EntropyCovarianceReport report;
  for (double eta : eta_list) {
    EntropyCovariancePoint p;
    p.eta = eta;
    p.exact = exact_entropy_change(dist, delta_z, eta);
    p.predicted = -eta * signed_cov(dist, delta_z, flip_covariance_sign);
    p.error = std::abs(p.exact - p.predicted);
    report.points.push_back(p);
  }
  report.second_order_decay = true;
  const std::size_t first = report.points.size() > kDecayPairs ? report.points.size() - kDecayPairs : 1;
  for (std::size_t j = first; j < report.points.size(); ++j) {
    const double prev = report.points[j - 1].error;
    if (prev <= kErrorFloor) continue;
    if (report.points[j].error > kDecayRatio * prev) report.second_order_decay = false;
  }
  return report;
}

CheckReport check_lemma_entropy_covariance(const TheoryOptions& o) {
  o.validate();
  CheckReport r = make_report("entropy_covariance", o.trials, 1.0);
  const std::vector<double> etas = halving_etas(o.eta, 10);
  double worst_ratio = 0.0;
  for (int t = 0; t < o.trials; ++t) {
    RngStream rng = trial_rng(o, 1, t);
    const int K = random_size(rng, o);
    const ActionDistribution dist = random_distribution(rng, K);
    std::vector<double> dz(static_cast<std::size_t>(K));
    for (double& v : dz) v = rng.normal();
    const EntropyCovarianceReport rep = check_entropy_covariance(dist, dz, etas, o.flip_covariance_sign);
    for (std::size_t j = rep.points.size() - kDecayPairs; j < rep.points.size(); ++j) {
      if (rep.points[j - 1].error > kErrorFloor) {
        worst_ratio = std::max(worst_ratio, rep.points[j].error / rep.points[j - 1].error);
      }
    }
    if (rep.second_order_decay) {
      ++r.successes;
    } else if (r.failure.empty()) {
      r.failure = fmt::format("trial {} (K={}): error did not shrink by {} per halving", t, K, kDecayRatio);
    }
  }
  r.metrics.emplace_back("worst_halving_ratio", worst_ratio);
  r.passed = r.successes == r.trials;
  return r;
}

CheckReport check_matthew_effect(const TheoryOptions& o, bool aligned) {
  o.validate();
  CheckReport r = make_report(aligned ? "matthew_effect_aligned" : "matthew_effect_anti_aligned", o.trials,
                              o.required_rate);
  int cov_ok = 0;
  double mean_dh = 0.0;
  for (int t = 0; t < o.trials; ++t) {
    RngStream rng = trial_rng(o, aligned ? 2 : 3, t);
    const int K = random_size(rng, o);
    const ActionDistribution dist = random_distribution(rng, K);
    // Advantages: sorted normal draws handed out in (reverse) probability order.
    std::vector<double> draws(static_cast<std::size_t>(K));
    for (double& v : draws) v = rng.normal();
    std::sort(draws.begin(), draws.end());
    // Centered, as group-normalized advantages are.
    const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / K;
    for (double& v : draws) v -= mean;
    std::vector<std::size_t> by_prob(static_cast<std::size_t>(K));
    std::iota(by_prob.begin(), by_prob.end(), 0);
    std::stable_sort(by_prob.begin(), by_prob.end(),
                     [&](std::size_t a, std::size_t b) { return dist.probs[a] < dist.probs[b]; });
    std::vector<double> adv(static_cast<std::size_t>(K));
    for (std::size_t rank = 0; rank < by_prob.size(); ++rank) {
      adv[by_prob[rank]] = aligned ? draws[rank] : draws[draws.size() - 1 - rank];
    }
    std::vector<double> dz(static_cast<std::size_t>(K));
    for (std::size_t a = 0; a < dz.size(); ++a) dz[a] = o.eta * dist.probs[a] * adv[a];

    const double cov = signed_cov(dist, dz, o.flip_covariance_sign);
    const double dh = exact_entropy_change(dist, dz, 1.0);
    mean_dh += dh / o.trials;
    const bool cov_sign = aligned ? cov > 0.0 : cov < 0.0;
    const bool dh_sign = aligned ? dh < 0.0 : dh > 0.0;
    cov_ok += cov_sign ? 1 : 0;
    if (cov_sign && dh_sign) {
      ++r.successes;
    } else if (r.failure.empty()) {
      r.failure = fmt::format("trial {} (K={}): cov={:.3e} dH={:.3e}", t, K, cov, dh);
    }
  }
  r.metrics.emplace_back("covariance_sign_rate", static_cast<double>(cov_ok) / o.trials);
  r.metrics.emplace_back("mean_entropy_change", mean_dh);
  r.passed = r.success_rate() >= o.required_rate;
  return r;
}

CheckReport check_sft_injection(const TheoryOptions& o) {
  o.validate();
  CheckReport r = make_report("sft_entropy_injection", o.trials, o.required_rate);
  int zero_sum_ok = 0;
  double worst_sum = 0.0;
  for (int t = 0; t < o.trials; ++t) {
    RngStream rng = trial_rng(o, 4, t);
    const int K = random_size(rng, o);
    ActionDistribution dist = random_distribution(rng, K);
    std::vector<int> biased;
    for (int a = 0; a < K; ++a) {
      if (dist.probs[static_cast<std::size_t>(a)] < 1.0 / K) biased.push_back(a);
    }
    // Only a uniform distribution has no action below 1/K; redraw sharper.
    while (biased.empty()) {
      dist = random_distribution(rng, K);
      for (int a = 0; a < K; ++a) {
        if (dist.probs[static_cast<std::size_t>(a)] < 1.0 / K) biased.push_back(a);
      }
    }
    const int target = biased[rng.uniform_index(biased.size())];
    const std::vector<double> dz = sft_logit_update(dist, target, o.eta);

    double sum = 0.0;
    for (double v : dz) sum += v;
    worst_sum = std::max(worst_sum, std::abs(sum));
    const bool zero_sum = std::abs(sum) <= 1e-12;
    zero_sum_ok += zero_sum ? 1 : 0;
    const double cov = signed_cov(dist, dz, o.flip_covariance_sign);
    const double dh = exact_entropy_change(dist, dz, 1.0);
    if (zero_sum && cov < 0.0 && dh > 0.0) {
      ++r.successes;
    } else if (r.failure.empty()) {
      r.failure = fmt::format("trial {} (K={}): sum={:.3e} cov={:.3e} dH={:.3e}", t, K, sum, cov, dh);
    }
  }
  r.metrics.emplace_back("worst_abs_sum", worst_sum);
  r.metrics.emplace_back("zero_sum_rate", static_cast<double>(zero_sum_ok) / o.trials);
  // Zero-sum is exact by construction and must hold in every trial.
  r.passed = zero_sum_ok == o.trials && r.success_rate() >= o.required_rate;
  return r;
}

std::vector<CheckReport> run_all_checks(const TheoryOptions& o) {
  return {check_lemma_entropy_covariance(o), check_matthew_effect(o, true), check_matthew_effect(o, false),
          check_sft_injection(o)};
}

std::string reports_to_json(std::span<const CheckReport> reports) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const CheckReport& r : reports) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["passed"] = r.passed;
    j["trials"] = r.trials;
    j["successes"] = r.successes;
    j["required_rate"] = r.required_rate;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.metrics) m[k] = v;
    j["metrics"] = m;
    j["failure"] = r.failure;
    out.push_back(j);
  }
  return out.dump(2);
}

}  // namespace cgl
