#include "cgl/synthgui.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

namespace cgl {
namespace {


constexpr double kDoneSignal = 2.0;
// Scales log-frequency biases of the kind scores so the argmax reproduces the
// target mix on average over random rule draws.
constexpr double kKindBiasScale = 0.65;
constexpr std::size_t kNumScrollDirections = 4;

// Rule vectors are stored back to back: one per non-final kind, widget, text
// token and scroll direction.
struct RuleLayout {
  std::size_t kind, widget, text, scroll, total;
  explicit RuleLayout(const SuiteConfig& cfg)
      : kind(0),
        widget(non_final_kind_mix().size()),
        text(widget + static_cast<std::size_t>(cfg.widgets)),
        scroll(text + kTokensPerTask),
        total(scroll + kNumScrollDirections) {}
};
constexpr std::uint64_t kTemplateChild = 1'000'003;

std::vector<double> normal_vector(RngStream& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// (1 - s) * shared + s * own, rescaled so the mixture keeps the variance of
// its components.
std::vector<double> blend(const std::vector<double>& shared, const std::vector<double>& own, double s) {
  const double norm = std::sqrt((1 - s) * (1 - s) + s * s);
  std::vector<double> out(shared.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ((1 - s) * shared[i] + s * own[i]) / norm;
  return out;
}

std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

double project(const std::vector<double>& w, std::span<const double> layout, std::span<const double> intent) {
  double acc = 0.0;
  for (std::size_t i = 0; i < layout.size(); ++i) acc += w[i] * layout[i];
  for (std::size_t i = 0; i < intent.size(); ++i) acc += w[layout.size() + i] * intent[i];
  return acc;
}

// Index of the highest score among rules [first, first + n); ties keep the lowest.
std::size_t best_rule(const std::vector<std::vector<double>>& rules, std::size_t first, std::size_t n,
                      std::span<const double> layout, std::span<const double> intent,
                      std::span<const double> bias = {}) {
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = project(rules[first + i], layout, intent) + (bias.empty() ? 0.0 : bias[i]);
    if (i == 0 || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

struct DomainDraw {
  std::vector<double> obs_basis;
  std::vector<double> obs_center;
  std::vector<double> instr_basis;
  std::vector<std::vector<double>> rule;
  std::vector<int> tokens;
  std::vector<double> widget_geometry;  // per widget: center x, center y, width, height
};

DomainDraw draw_domain(const SuiteConfig& cfg, RngStream& rng) {
  const auto latent_cols = static_cast<std::size_t>(2 + cfg.layout_dim);
  const auto obs_rows = static_cast<std::size_t>(cfg.obs_dim - 1);
  const auto instr_cols = static_cast<std::size_t>(kAppCodeDim + cfg.intent_dim);
  const auto rule_dim = static_cast<std::size_t>(cfg.layout_dim + cfg.intent_dim);
  DomainDraw d;
  d.obs_basis = normal_vector(rng, obs_rows * latent_cols, 1.0 / std::sqrt(static_cast<double>(latent_cols)));
  d.obs_center = normal_vector(rng, obs_rows, 1.0);
  d.instr_basis = normal_vector(rng, static_cast<std::size_t>(cfg.instr_dim) * instr_cols,
                                1.0 / std::sqrt(static_cast<double>(instr_cols)));
  for (std::size_t r = 0; r < RuleLayout(cfg).total; ++r) d.rule.push_back(normal_vector(rng, rule_dim, 1.0));
  std::vector<int> vocab(static_cast<std::size_t>(cfg.vocab));
  std::iota(vocab.begin(), vocab.end(), 0);
  for (int i = 0; i < kTokensPerTask; ++i) {
    d.tokens.push_back(vocab[rng.uniform_index(vocab.size())]);
  }
  for (int w = 0; w < cfg.widgets; ++w) {
    const double width = (1.0 + 3.0 * rng.uniform()) / cfg.grid;
    const double height = (1.0 + 3.0 * rng.uniform()) / cfg.grid;
    d.widget_geometry.push_back(width / 2 + (1.0 - width) * rng.uniform());
    d.widget_geometry.push_back(height / 2 + (1.0 - height) * rng.uniform());
    d.widget_geometry.push_back(width);
    d.widget_geometry.push_back(height);
  }
  return d;
}

}  // namespace

void SuiteConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("suite config: " + msg); };
  if (n_tasks < 2) fail("n_tasks must be >= 2");
  if (apps_per_task < 1 || trajs_per_app < 1) fail("apps_per_task and trajs_per_app must be positive");
  if (steps_min < 1 || steps_max < steps_min) fail("need 1 <= steps_min <= steps_max");
  if (obs_dim < 2 || instr_dim < 1) fail("need obs_dim >= 2 and instr_dim >= 1");
  if (grid < 1 || vocab < 1) fail("need grid >= 1 and vocab >= 1");
  if (layout_dim < 1 || intent_dim < 1) fail("latent dims must be positive");
  if (widgets < 1) fail("widgets must be positive");
  if (apps < n_tasks * apps_per_task) fail("apps must be >= n_tasks * apps_per_task (disjoint app ids)");
  if (!(domain_shift >= 0.0 && domain_shift <= 1.0)) fail("domain_shift must lie in [0,1]");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (trajectories_per_task() < 5) {
    fail("apps_per_task * trajs_per_app = " + std::to_string(trajectories_per_task()) +
         " is too small for an 8:2 train/test split (need >= 5)");
  }
}

int SuiteConfig::test_trajectories_per_task() const {
  // Nearest integer to 20%, never zero once validate() passed.
  return std::max(1, (trajectories_per_task() + 2) / 5);
}

const std::vector<KindFrequency>& non_final_kind_mix() {
  static const std::vector<KindFrequency> mix = {
      {ActionKind::Click, 0.45},  {ActionKind::LongPress, 0.05}, {ActionKind::InputText, 0.15},
      {ActionKind::Scroll, 0.10}, {ActionKind::OpenApp, 0.10},   {ActionKind::Home, 0.05},
      {ActionKind::Back, 0.05},   {ActionKind::Wait, 0.05},
  };
  return mix;
}

std::string default_task_name(int task_id) {
  static const std::array<const char*, 7> names = {
      "Shopping", "Productivity", "Communication", "Travel",
      "SystemTools", "EducationScience", "LifeEntertainment"};
  if (task_id >= 0 && task_id < static_cast<int>(names.size())) return names[static_cast<std::size_t>(task_id)];
  return "Task" + std::to_string(task_id);
}

std::vector<int> task_order_preset(int preset, int n_tasks) {
  std::vector<int> order(static_cast<std::size_t>(n_tasks));
  std::iota(order.begin(), order.end(), 0);
  if (preset == 1) return order;
  if (n_tasks != 7) throw InputError("task order presets 2 and 3 are defined for 7 tasks");
  // Default task ids follow order 1: SP PO CO TT ST ES LE.
  if (preset == 2) return {0, 6, 5, 4, 3, 2, 1};
  if (preset == 3) return {5, 6, 3, 0, 2, 1, 4};
  throw InputError("unknown task order preset " + std::to_string(preset));
}

std::vector<DomainSpec> make_domains(const SuiteConfig& cfg) {
  cfg.validate();
  const RngStream root(cfg.seed, streams::kSuiteDomains);
  RngStream template_rng = root.split(kTemplateChild);
  const DomainDraw shared = draw_domain(cfg, template_rng);
  const double s = cfg.domain_shift;

  std::vector<DomainSpec> domains;
  for (int k = 0; k < cfg.n_tasks; ++k) {
    RngStream rng = root.split(static_cast<std::uint64_t>(k));
    const DomainDraw own = draw_domain(cfg, rng);
    DomainSpec d;
    d.task_id = k;
    d.obs_basis = blend(shared.obs_basis, own.obs_basis, s);
    d.obs_center.resize(own.obs_center.size());
    for (std::size_t i = 0; i < d.obs_center.size(); ++i) d.obs_center[i] = s * own.obs_center[i];
    d.instr_basis = blend(shared.instr_basis, own.instr_basis, s);
    for (std::size_t r = 0; r < RuleLayout(cfg).total; ++r) d.rule.push_back(unit(blend(shared.rule[r], own.rule[r], s)));
    // Widget geometry interpolates linearly, which keeps every box on screen
    // and its sides within [1/R, 4/R].
    for (std::size_t w = 0; w < static_cast<std::size_t>(cfg.widgets); ++w) {
      double g[4];
      for (std::size_t i = 0; i < 4; ++i) {
        g[i] = (1 - s) * shared.widget_geometry[4 * w + i] + s * own.widget_geometry[4 * w + i];
      }
      d.widgets.push_back({std::max(0.0, g[0] - g[2] / 2), std::max(0.0, g[1] - g[3] / 2),
                           std::min(1.0, g[0] + g[2] / 2), std::min(1.0, g[1] + g[3] / 2)});
    }
    for (int i = 0; i < kTokensPerTask; ++i) {
      const bool keep_shared = rng.uniform() >= s;
      d.token_table.push_back(keep_shared ? shared.tokens[static_cast<std::size_t>(i)]
                                          : own.tokens[static_cast<std::size_t>(i)]);
    }
    for (int j = 0; j < cfg.apps_per_task; ++j) {
      d.app_ids.push_back(k * cfg.apps_per_task + j);
      d.app_codes.push_back(normal_vector(rng, kAppCodeDim, 1.0));
    }
    domains.push_back(std::move(d));
  }
  return domains;
}

GroundTruth DomainSpec::gt_rule(const SuiteConfig& cfg, const StepLatent& latent) const {
  if (latent.step_index == latent.num_steps - 1) return {GuiAction::nullary(ActionKind::Finish), {}};

  const std::span<const double> layout(latent.layout);
  const std::span<const double> intent(latent.intent);
  const RuleLayout at(cfg);
  const auto& mix = non_final_kind_mix();
  std::vector<double> bias;
  for (const auto& kf : mix) bias.push_back(kKindBiasScale * std::log(kf.frequency));
  const ActionKind kind = mix[best_rule(rule, at.kind, mix.size(), layout, intent, bias)].kind;

  switch (kind) {
    case ActionKind::Click:
    case ActionKind::LongPress: {
      const BoundingBox& box = widgets[best_rule(rule, at.widget, widgets.size(), layout, intent)];
      const Point p = box.center();
      return {kind == ActionKind::Click ? GuiAction::click(p) : GuiAction::long_press(p), box};
    }
    case ActionKind::InputText:
      return {GuiAction::input_text(token_table[best_rule(rule, at.text, kTokensPerTask, layout, intent)]), {}};
    case ActionKind::Scroll:
      return {GuiAction::scroll(static_cast<Direction>(best_rule(rule, at.scroll, kNumScrollDirections, layout, intent))), {}};
    case ActionKind::OpenApp:
      return {GuiAction::open_app(latent.app_id), {}};
    default:
      return {GuiAction::nullary(kind), {}};
  }
}

std::vector<double> DomainSpec::observation(const SuiteConfig& cfg, const StepLatent& latent,
                                            std::span<const double> noise) const {
  const auto cols = static_cast<std::size_t>(2 + cfg.layout_dim);
  std::vector<double> z(cols);
  z[0] = latent.step_index == latent.num_steps - 1 ? kDoneSignal : 0.0;
  z[1] = cfg.steps_max > 1 ? static_cast<double>(latent.step_index) / (cfg.steps_max - 1) : 0.0;
  std::copy(latent.layout.begin(), latent.layout.end(), z.begin() + 2);

  std::vector<double> obs(static_cast<std::size_t>(cfg.obs_dim));
  obs[0] = 1.0;
  for (std::size_t r = 0; r + 1 < obs.size(); ++r) {
    double acc = obs_center[r] + noise[r];
    for (std::size_t c = 0; c < cols; ++c) acc += obs_basis[r * cols + c] * z[c];
    obs[r + 1] = acc;
  }
  return obs;
}

std::vector<double> DomainSpec::instruction(const SuiteConfig& cfg, const StepLatent& latent) const {
  const auto it = std::find(app_ids.begin(), app_ids.end(), latent.app_id);
  if (it == app_ids.end()) throw InputError("instruction(): app does not belong to this task");
  const auto& code = app_codes[static_cast<std::size_t>(it - app_ids.begin())];
  const auto cols = static_cast<std::size_t>(kAppCodeDim + cfg.intent_dim);
  std::vector<double> z(code.begin(), code.end());
  z.insert(z.end(), latent.intent.begin(), latent.intent.end());
  std::vector<double> out(static_cast<std::size_t>(cfg.instr_dim));
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += instr_basis[r * cols + c] * z[c];
    out[r] = acc;
  }
  return out;
}

SuiteWithLatents generate_suite_with_latents(const SuiteConfig& cfg) {
  SuiteWithLatents out;
  out.domains = make_domains(cfg);
  const RngStream traj_root(cfg.seed, streams::kSuiteTrajectories);
  const RngStream split_root(cfg.seed, streams::kSuiteSplit);
  const auto per_task = static_cast<std::size_t>(cfg.trajectories_per_task());
  const auto n_test = static_cast<std::size_t>(cfg.test_trajectories_per_task());
  std::uint64_t next_uid = 0;

  for (const DomainSpec& domain : out.domains) {
    std::vector<Trajectory> trajs;
    std::vector<std::vector<StepLatent>> lat;
    for (std::size_t t = 0; t < per_task; ++t) {
      RngStream rng = traj_root.split(static_cast<std::uint64_t>(domain.task_id) * 1'000'000ULL + t);
      StepLatent base;
      base.app_id = domain.app_ids[t / static_cast<std::size_t>(cfg.trajs_per_app)];
      base.num_steps = cfg.steps_min + static_cast<int>(rng.uniform_index(
                                           static_cast<std::uint64_t>(cfg.steps_max - cfg.steps_min + 1)));
      base.intent = normal_vector(rng, static_cast<std::size_t>(cfg.intent_dim), 1.0);

      Trajectory traj;
      traj.uid = next_uid++;
      traj.app_id = base.app_id;
      traj.instruction = domain.instruction(cfg, base);
      std::vector<StepLatent> traj_lat;
      for (int s = 0; s < base.num_steps; ++s) {
        StepLatent l = base;
        l.step_index = s;
        l.layout = normal_vector(rng, static_cast<std::size_t>(cfg.layout_dim), 1.0);
        const std::vector<double> noise = normal_vector(rng, static_cast<std::size_t>(cfg.obs_dim - 1), cfg.noise_sigma);
        GroundTruth gt = domain.gt_rule(cfg, l);
        traj.steps.push_back({domain.observation(cfg, l, noise), gt.action, gt.bbox});
        traj_lat.push_back(std::move(l));
      }
      trajs.push_back(std::move(traj));
      lat.push_back(std::move(traj_lat));
    }

    // Trajectory-level split: a seeded permutation, the last 20% go to test.
    std::vector<std::size_t> perm(per_task);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream split_rng = split_root.split(static_cast<std::uint64_t>(domain.task_id));
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[split_rng.uniform_index(i)]);

    TaskDataset ds;
    ds.task_id = domain.task_id;
    ds.name = default_task_name(domain.task_id);
    ds.app_ids = domain.app_ids;
    std::vector<std::vector<StepLatent>> ordered_lat;
    for (std::size_t i = 0; i < per_task; ++i) {
      auto& dest = i < per_task - n_test ? ds.train : ds.test;
      dest.push_back(std::move(trajs[perm[i]]));
    }
    for (std::size_t i = 0; i < per_task; ++i) ordered_lat.push_back(std::move(lat[perm[i]]));
    out.tasks.push_back(std::move(ds));
    out.latents.push_back(std::move(ordered_lat));
  }
  return out;
}

std::vector<TaskDataset> generate_suite(const SuiteConfig& config) {
  return generate_suite_with_latents(config).tasks;
}

}  // namespace cgl
