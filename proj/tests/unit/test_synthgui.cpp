#include <doctest.h>

#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "cgl/error.hpp"
#include "cgl/reward.hpp"
#include "cgl/sft.hpp"
#include "cgl/suite_io.hpp"
#include "cgl/synthgui.hpp"

using namespace cgl;

namespace {

SuiteConfig small_config() {
  SuiteConfig c;
  c.n_tasks = 3;
  c.apps_per_task = 2;
  c.trajs_per_app = 5;
  c.apps = 6;
  c.obs_dim = 10;
  c.instr_dim = 4;
  c.domain_shift = 0.5;
  c.seed = 11;
  return c;
}

std::string serialize(const SuiteConfig& c, const std::vector<TaskDataset>& tasks) {
  std::ostringstream out;
  write_suite(out, c, tasks);
  return out.str();
}

}  // namespace

TEST_SUITE("synthgui") {

TEST_CASE("split sizes") {
  SuiteConfig c;
  c.trajs_per_app = 10;
  const std::vector<TaskDataset> suite = generate_suite(c);
  REQUIRE(suite.size() == 7);
  for (const TaskDataset& t : suite) {
    CHECK(t.train.size() == 24);
    CHECK(t.test.size() == 6);
  }
}

TEST_CASE("too few trajectories for the split") {
  SuiteConfig c;
  c.apps_per_task = 1;
  c.trajs_per_app = 2;
  CHECK_THROWS_AS(c.validate(), InputError);
  CHECK_THROWS_AS(generate_suite(c), InputError);
  SuiteConfig bad;
  bad.n_tasks = 1;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = {};
  bad.domain_shift = 1.5;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = {};
  bad.apps = 5;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("structural invariants") {
  const SuiteConfig c;
  const std::vector<TaskDataset> suite = generate_suite(c);
  const ActionSpace space = c.action_space();
  std::set<int> all_apps;
  std::set<std::uint64_t> uids;
  for (const TaskDataset& t : suite) {
    for (int a : t.app_ids) CHECK(all_apps.insert(a).second);  // disjoint across tasks
    std::set<std::uint64_t> train_uids;
    for (const Trajectory& tr : t.train) train_uids.insert(tr.uid);
    for (const Trajectory& tr : t.test) CHECK_FALSE(train_uids.contains(tr.uid));
    for (const auto* part : {&t.train, &t.test}) {
      for (const Trajectory& tr : *part) {
        CHECK(uids.insert(tr.uid).second);
        CHECK(static_cast<int>(tr.instruction.size()) == c.instr_dim);
        REQUIRE(static_cast<int>(tr.steps.size()) >= c.steps_min);
        CHECK(static_cast<int>(tr.steps.size()) <= c.steps_max);
        CHECK(tr.steps.back().gt_action.kind == ActionKind::Finish);
        for (const Step& s : tr.steps) {
          CHECK(static_cast<int>(s.observation.size()) == c.obs_dim);
          CHECK(s.observation[0] == 1.0);
          CHECK(s.gt_action.valid());
          const bool spatial = action_class(s.gt_action.kind) == ActionClass::Spatial;
          CHECK(s.gt_bbox.has_value() == spatial);
          if (spatial) {
            const BoundingBox& b = *s.gt_bbox;
            const double w = b.x_max - b.x_min, h = b.y_max - b.y_min;
            CHECK(w >= 1.0 / c.grid - 1e-12);
            CHECK(w <= 4.0 / c.grid + 1e-12);
            CHECK(h >= 1.0 / c.grid - 1e-12);
            CHECK(h <= 4.0 / c.grid + 1e-12);
            CHECK(b.contains(*s.gt_action.coord));
            CHECK_FALSE(cells_inside(space, b).empty());
          }
          if (s.gt_action.kind == ActionKind::OpenApp) {
            CHECK(std::find(t.app_ids.begin(), t.app_ids.end(), *s.gt_action.app) != t.app_ids.end());
          }
          CHECK_NOTHROW(space.encode(s.gt_action));
        }
      }
    }
  }
}

TEST_CASE("generation is a pure function of the config") {
  const SuiteConfig c = small_config();
  CHECK(serialize(c, generate_suite(c)) == serialize(c, generate_suite(c)));
  SuiteConfig other = c;
  other.seed = 12;
  CHECK(serialize(c, generate_suite(c)) != serialize(other, generate_suite(other)));
}

TEST_CASE("zero shift gives identical feature maps") {
  SuiteConfig c = small_config();
  c.n_tasks = 2;
  c.domain_shift = 0.0;
  const std::vector<DomainSpec> d = make_domains(c);
  CHECK(d[0].obs_basis == d[1].obs_basis);
  CHECK(d[0].obs_center == d[1].obs_center);
  CHECK(d[0].instr_basis == d[1].instr_basis);
  CHECK(d[0].rule == d[1].rule);
  c.domain_shift = 1.0;
  const std::vector<DomainSpec> e = make_domains(c);
  CHECK(e[0].obs_basis != e[1].obs_basis);
}

TEST_CASE("stored ground truth is the rule applied to the latents") {
  const SuiteConfig c = small_config();
  const SuiteWithLatents s = generate_suite_with_latents(c);
  for (std::size_t t = 0; t < s.tasks.size(); ++t) {
    std::vector<const Trajectory*> trajs;
    for (const Trajectory& tr : s.tasks[t].train) trajs.push_back(&tr);
    for (const Trajectory& tr : s.tasks[t].test) trajs.push_back(&tr);
    REQUIRE(trajs.size() == s.latents[t].size());
    for (std::size_t j = 0; j < trajs.size(); ++j) {
      for (std::size_t k = 0; k < trajs[j]->steps.size(); ++k) {
        const GroundTruth g = s.domains[t].gt_rule(c, s.latents[t][j][k]);
        CHECK(g.action == trajs[j]->steps[k].gt_action);
        CHECK(g.bbox == trajs[j]->steps[k].gt_bbox);
        // The reward ceiling is reachable for every step.
        CHECK(is_step_correct(score(g.action, trajs[j]->steps[k].gt_action, g.bbox)));
      }
    }
  }
}

TEST_CASE("kind mix of non-final steps") {
  SuiteConfig c;
  c.trajs_per_app = 60;
  std::map<ActionKind, int> counts;
  int total = 0;
  for (const TaskDataset& t : generate_suite(c)) {
    for (const auto* part : {&t.train, &t.test})
      for (const Trajectory& tr : *part)
        for (std::size_t k = 0; k + 1 < tr.steps.size(); ++k) {
          ++counts[tr.steps[k].gt_action.kind];
          ++total;
        }
  }
  double sum = 0;
  for (const KindFrequency& f : non_final_kind_mix()) {
    sum += f.frequency;
    CAPTURE(f.kind);
    CHECK(std::abs(counts[f.kind] / double(total) - f.frequency) < 0.06);
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(counts[ActionKind::Click] > counts[ActionKind::InputText]);
}

TEST_CASE("task order presets are permutations") {
  for (int p = 1; p <= 3; ++p) {
    std::vector<int> o = task_order_preset(p, 7);
    std::sort(o.begin(), o.end());
    CHECK(o == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
  }
  CHECK(task_order_preset(1, 7) != task_order_preset(2, 7));
  CHECK_THROWS_AS(task_order_preset(4, 7), InputError);
}

}  // TEST_SUITE

TEST_SUITE("suite_io") {

TEST_CASE("suite text round-trips exactly") {
  const SuiteConfig c = small_config();
  const std::vector<TaskDataset> tasks = generate_suite(c);
  const std::string text = serialize(c, tasks);
  std::istringstream in(text);
  const SuiteFile back = read_suite(in);
  CHECK(back.config == c);
  REQUIRE(back.tasks.size() == tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    CHECK(back.tasks[t].name == tasks[t].name);
    CHECK(back.tasks[t].app_ids == tasks[t].app_ids);
    REQUIRE(back.tasks[t].train.size() == tasks[t].train.size());
    for (std::size_t j = 0; j < tasks[t].train.size(); ++j) {
      const Trajectory& a = back.tasks[t].train[j];
      const Trajectory& b = tasks[t].train[j];
      CHECK(a.uid == b.uid);
      CHECK(a.instruction == b.instruction);
      REQUIRE(a.steps.size() == b.steps.size());
      for (std::size_t k = 0; k < a.steps.size(); ++k) {
        CHECK(a.steps[k].observation == b.steps[k].observation);
        CHECK(a.steps[k].gt_action == b.steps[k].gt_action);
        CHECK(a.steps[k].gt_bbox == b.steps[k].gt_bbox);
      }
    }
  }
  CHECK(serialize(back.config, back.tasks) == text);
}

TEST_CASE("pinned digest of a small suite") {
  const SuiteConfig c = small_config();
  CHECK(hex_digest(fnv1a64(serialize(c, generate_suite(c)))) == "40ebd1d898a04553");
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("reals round-trip at 17 digits") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 5e-324}) {
    CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("malformed suites are input errors") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_suite(empty), InputError);
  std::istringstream junk("not a suite\n");
  CHECK_THROWS_AS(read_suite(junk), InputError);
  const SuiteConfig c = small_config();
  std::string text = serialize(c, generate_suite(c));
  text.resize(text.size() / 2);
  std::istringstream cut(text);
  CHECK_THROWS_AS(read_suite(cut), InputError);
}

TEST_CASE("checkpoint round-trip") {
  PolicyModel m(7, 3, 2, 5);
  for (std::size_t i = 0; i < m.num_params(); ++i) m.params().values[i] = 1.0 / (i + 3.0) - 0.2;
  std::stringstream buf;
  write_checkpoint(buf, m);
  const PolicyModel back = read_checkpoint(buf);
  CHECK(back.num_actions() == 7);
  CHECK(back.input_dim() == 3);
  CHECK(back.hidden() == 2);
  CHECK(back.params().values == m.params().values);
  std::istringstream bad("cgl-checkpoint 99\n");
  CHECK_THROWS_AS(read_checkpoint(bad), InputError);
}

}  // TEST_SUITE
