#include <doctest.h>

#include <cmath>

#include "cgl/error.hpp"
#include "cgl/hybrid.hpp"
#include "test_util.hpp"

using namespace cgl;
using namespace cgl::testing;

namespace {

SchedulerState decay_state(SchedulerConfig c = {}, int K = 573) {
  SchedulerState s;
  s.config = c;
  s.num_actions = K;
  s.step_in_task = c.step_w;
  return s;
}

RolloutGroup group_with(const Query& q, std::vector<int> rewards) {
  std::vector<RolloutSample> s;
  for (int r : rewards) s.push_back({0, r, 0.0});
  if (s.size() == 1) s.push_back(s.front());  // groups need G >= 2; duplicate keeps max unchanged
  return make_group(q, s);
}

// A small task: queries on a 2x2 grid with random features.
struct Toy {
  ActionSpace space{2, 3, 2};
  std::vector<Query> batch;

  explicit Toy(RngStream& rng, int n = 6) {
    for (int i = 0; i < n; ++i) {
      Query q;
      q.features = normals(rng, 4);
      switch (i % 3) {
        case 0:
          q.gt_action = GuiAction::click({0.25, 0.75});
          q.gt_bbox = BoundingBox{0.0, 0.5, 0.5, 1.0};
          break;
        case 1: q.gt_action = GuiAction::input_text(1); break;
        default: q.gt_action = GuiAction::nullary(ActionKind::Back);
      }
      batch.push_back(std::move(q));
    }
  }
};

std::vector<double> diff(const PolicyModel& a, const PolicyModel& b) {
  std::vector<double> d(a.num_params());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.params().values[i] - b.params().values[i];
  return d;
}

}  // namespace

TEST_SUITE("cgl") {

TEST_CASE("routing") {
  Query spatial;
  spatial.gt_action = GuiAction::click({0.5, 0.5});
  spatial.gt_bbox = BoundingBox{0.4, 0.4, 0.6, 0.6};
  CHECK_FALSE(should_route_to_sft(group_with(spatial, {1, 1, 2})));
  CHECK(should_route_to_sft(group_with(spatial, {0, 1, 1})));
  Query nav;
  nav.gt_action = GuiAction::nullary(ActionKind::Wait);
  CHECK_FALSE(should_route_to_sft(group_with(nav, {1})));
  CHECK(should_route_to_sft(group_with(nav, {0, 0})));
}

TEST_CASE("lambda spot values") {
  const SchedulerState s = decay_state();
  CHECK(lambda_value(s, 0.45) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(lambda_value(s, 0.45) == doctest::Approx(0.3679).epsilon(1e-4));
  CHECK(lambda_value(s, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lambda_value(s, 0.0) == doctest::Approx(4.54e-5).epsilon(1e-3));
  CHECK(lambda_value(s, 3.0) == 1.0);

  SchedulerState w = decay_state();
  w.step_in_task = 4;
  CHECK(lambda_value(w, 0.0) == 1.0);
  w.step_in_task = 0;
  CHECK(lambda_value(w, 0.0) == doctest::Approx(0.2));
}

TEST_CASE("entropy normalization and clamp") {
  SchedulerConfig c;
  c.normalize_entropy = true;
  const SchedulerState n = decay_state(c, 100);
  CHECK(lambda_value(n, 0.45 * std::log(100.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  SchedulerConfig cl;
  cl.clamp_entropy = true;
  const SchedulerState m = decay_state(cl);
  CHECK(lambda_value(m, 5.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("lambda bounds and monotonicity") {
  RngStream rng(40, 0);
  for (int t = 0; t < 200; ++t) {
    SchedulerConfig c;
    c.lambda_min = rng.uniform() * 0.5;
    c.lambda_max = c.lambda_min + rng.uniform();
    c.gamma = 0.5 + 30 * rng.uniform();
    c.k = std::exp(-20 * rng.uniform());
    c.step_w = 1 + static_cast<int>(rng.uniform_index(10));
    c.normalize_entropy = rng.uniform() < 0.5;
    c.clamp_entropy = rng.uniform() < 0.5;
    SchedulerState s = decay_state(c, 50);
    double prev = -1;
    for (double h = 0; h <= 4.0; h += 0.05) {
      const double l = lambda_value(s, h);
      CHECK(l >= c.lambda_min);
      CHECK(l <= c.lambda_max);
      CHECK(l >= prev);
      prev = l;
    }
    prev = -1;
    for (int step = 0; step < c.step_w; ++step) {
      s.step_in_task = step;
      const double l = lambda_value(s, 1.0);
      CHECK(l >= prev);
      CHECK(l >= c.lambda_min);
      CHECK(l <= c.lambda_max);
      prev = l;
    }
  }
}

TEST_CASE("scheduler validation") {
  SchedulerConfig c;
  c.lambda_min = 2.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = {};
  c.step_w = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = {};
  c.k = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("surgery examples") {
  const std::vector<double> out = surgery(std::vector<double>{1, 0}, std::vector<double>{-1, 1});
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == doctest::Approx(0.5));
  CHECK(std::abs(out[0] * -1 + out[1] * 1) <= 1e-15);

  const std::vector<double> g{1, 0};
  CHECK(surgery(g, std::vector<double>{1, 1}) == g);

  const std::vector<double> opp = surgery(std::vector<double>{-2, 4, -6}, std::vector<double>{1, -2, 3});
  for (double v : opp) CHECK(std::abs(v) <= 1e-15);

  const SurgeryResult z = surgery_detailed(std::vector<double>{1, 2}, std::vector<double>{0, 0});
  CHECK_FALSE(z.cos_alpha.has_value());
  CHECK_FALSE(z.conflict);
  CHECK_THROWS_AS(surgery(std::vector<double>{NAN, 0}, std::vector<double>{1, 0}), NumericError);
  CHECK_THROWS_AS(surgery(std::vector<double>{1}, std::vector<double>{1, 0}), InputError);
}

TEST_CASE("surgery properties") {
  RngStream rng(41, 0);
  int conflicts = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.uniform_index(20);
    const std::vector<double> a = normals(rng, n);
    const std::vector<double> b = normals(rng, n);
    const SurgeryResult r = surgery_detailed(a, b);
    const double cos = dot(a, b) / (l2_norm(a) * l2_norm(b));
    REQUIRE(r.cos_alpha.has_value());
    CHECK(*r.cos_alpha == doctest::Approx(cos).epsilon(1e-12));
    CHECK(r.conflict == (cos < 0));
    CHECK(l2_norm(r.gradient) <= l2_norm(a) * (1 + 1e-15));
    if (r.conflict) {
      ++conflicts;
      CHECK(std::abs(dot(r.gradient, b)) <= 1e-9 * l2_norm(r.gradient) * l2_norm(b) + 1e-15);
      // Only the span of b changes.
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - r.gradient[i];
      CHECK(std::abs(std::abs(dot(d, b)) - l2_norm(d) * l2_norm(b)) <= 1e-9 * l2_norm(d) * l2_norm(b));
    } else {
      CHECK(r.gradient == a);
    }
    CHECK(dot(r.gradient, b) >= -1e-9 * l2_norm(r.gradient) * l2_norm(b));

    // Positive rescaling of g_sft commutes with surgery.
    const double c = 0.01 + 10 * rng.uniform();
    std::vector<double> ac = a;
    for (double& v : ac) v *= c;
    const SurgeryResult rc = surgery_detailed(ac, b);
    CHECK(rc.conflict == r.conflict);
    for (std::size_t i = 0; i < n; ++i) CHECK(rc.gradient[i] == doctest::Approx(c * r.gradient[i]).epsilon(1e-10));
  }
  CHECK(conflicts > 300);
}

TEST_CASE("no routed query reduces to a pure GRPO step") {
  RngStream rng(42, 0);
  const ActionSpace space(2, 3, 2);
  // Policy that puts almost all mass on Back for every feature vector.
  PolicyModel old(space.size(), 1);
  old.params().values[static_cast<std::size_t>(space.encode(GuiAction::nullary(ActionKind::Back)))] = 60.0;
  std::vector<Query> batch(4);
  for (Query& q : batch) {
    q.features = {1.0};
    q.gt_action = GuiAction::nullary(ActionKind::Back);
  }
  HybridConfig cfg;
  cfg.learning_rate = 0.1;
  PolicyModel a = old, b = old;
  SchedulerState sa = decay_state(), sb = decay_state();
  const RngStream step(7, streams::kRollout);
  const HybridStepReport ra = hybrid_step(a, old, old, space, batch, sa, cfg, step);
  HybridConfig pure = cfg;
  pure.use_dynamic_lambda = false;
  pure.static_lambda = 0.0;
  hybrid_step(b, old, old, space, batch, sb, pure, step);
  CHECK(ra.routed_queries == 0);
  CHECK(a.params().values == b.params().values);
  CHECK(sa.step_in_task == decay_state().step_in_task + 1);
}

TEST_CASE("tiny lambda stays within its bound of the pure GRPO step") {
  RngStream rng(43, 0);
  const Toy toy(rng);
  const PolicyModel old = random_model(toy.space.size(), 4, rng, 0.3);
  HybridConfig cfg;
  cfg.learning_rate = 0.5;
  SchedulerConfig sc;
  sc.k = 1e-30;
  SchedulerState s1 = decay_state(sc, toy.space.size()), s2 = s1;
  PolicyModel a = old, b = old;
  const RngStream step(8, streams::kRollout);
  const HybridStepReport r = hybrid_step(a, old, old, toy.space, toy.batch, s1, cfg, step);
  HybridConfig pure = cfg;
  pure.use_dynamic_lambda = false;
  pure.static_lambda = 0.0;
  hybrid_step(b, old, old, toy.space, toy.batch, s2, pure, step);
  CHECK(r.lambda_used > 0.0);
  CHECK(r.lambda_used <= 4.6e-5);
  CHECK(norm(diff(a, b)) <= cfg.learning_rate * r.lambda_used * r.grad_norm_sft_final * (1 + 1e-9) + 1e-15);
}

TEST_CASE("surgery changes the update only along the GRPO gradient") {
  RngStream rng(44, 0);
  int found = 0;
  for (int t = 0; t < 40 && found < 5; ++t) {
    const Toy toy(rng);
    const PolicyModel old = random_model(toy.space.size(), 4, rng, 0.4);
    HybridConfig on;
    on.learning_rate = 1.0;
    on.use_dynamic_lambda = false;
    on.static_lambda = 1.0;
    HybridConfig off = on;
    off.use_surgery = false;
    HybridConfig pure = on;
    pure.static_lambda = 0.0;
    const RngStream step(9, static_cast<std::uint64_t>(t));
    PolicyModel m_on = old, m_off = old, m_pure = old;
    SchedulerState s1 = decay_state({}, toy.space.size()), s2 = s1, s3 = s1;
    const HybridStepReport r = hybrid_step(m_on, old, old, toy.space, toy.batch, s1, on, step);
    hybrid_step(m_off, old, old, toy.space, toy.batch, s2, off, step);
    hybrid_step(m_pure, old, old, toy.space, toy.batch, s3, pure, step);
    if (!r.conflict_detected) {
      CHECK(m_on.params().values == m_off.params().values);
      continue;
    }
    ++found;
    const std::vector<double> g_grpo = diff(old, m_pure);  // lr = 1
    const std::vector<double> d = diff(m_on, m_off);
    CHECK(l2_norm(d) > 0.0);
    CHECK(std::abs(std::abs(dot(d, g_grpo)) - l2_norm(d) * l2_norm(g_grpo)) <= 1e-8 * l2_norm(d) * l2_norm(g_grpo));
    CHECK(r.grad_norm_sft_final <= r.grad_norm_sft_raw);
  }
  CHECK(found >= 1);
}

TEST_CASE("hybrid step does not depend on the worker count") {
  RngStream rng(45, 0);
  const Toy toy(rng, 9);
  const PolicyModel old = random_model(toy.space.size(), 4, rng, 0.4);
  HybridConfig c1;
  HybridConfig c3 = c1;
  c3.workers = 3;
  PolicyModel a = old, b = old;
  SchedulerState s1 = decay_state({}, toy.space.size()), s2 = s1;
  const RngStream step(10, 0);
  const HybridStepReport ra = hybrid_step(a, old, old, toy.space, toy.batch, s1, c1, step);
  const HybridStepReport rb = hybrid_step(b, old, old, toy.space, toy.batch, s2, c3, step);
  CHECK(a.params().values == b.params().values);
  CHECK(ra.mean_entropy == rb.mean_entropy);
  CHECK(ra.routed_queries == rb.routed_queries);
}

TEST_CASE("empty batch is rejected") {
  const ActionSpace space(1, 1, 1);
  PolicyModel m(space.size(), 1);
  SchedulerState s = decay_state({}, space.size());
  CHECK_THROWS_AS(hybrid_step(m, m, m, space, {}, s, HybridConfig{}, RngStream(0, 0)), InputError);
}

}  // TEST_SUITE
