#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "cgl/config.hpp"
#include "cgl/error.hpp"
#include "cgl/protocol.hpp"

using namespace cgl;

namespace {

SuiteFile tiny_suite(double shift = 0.5) {
  SuiteConfig c;
  c.n_tasks = 3;
  c.apps_per_task = 1;
  c.trajs_per_app = 10;
  c.apps = 3;
  c.obs_dim = 6;
  c.instr_dim = 3;
  c.grid = 4;
  c.vocab = 4;
  c.domain_shift = shift;
  c.seed = 3;
  return {c, generate_suite(c)};
}

RunConfig tiny_run(MethodKind kind) {
  RunConfig r;
  r.order = {2, 0, 1};
  r.method.kind = kind;
  r.steps_per_task = 6;
  r.batch_size = 4;
  r.group_size = 4;
  r.box_samples = 2;
  r.learning_rate = 0.5;
  r.rl_learning_rate = 0.2;
  r.seed = 17;
  return r;
}

const std::vector<MethodKind> kAllMethods{MethodKind::SFT,  MethodKind::SFT_KL, MethodKind::SFT_Replay,
                                          MethodKind::GRPO, MethodKind::CGL,    MethodKind::Joint};

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("runs are reproducible and independent of worker count") {
  const SuiteFile suite = tiny_suite();
  for (MethodKind k : kAllMethods) {
    CAPTURE(to_string(k));
    RunConfig a = tiny_run(k);
    RunConfig b = a;
    b.workers = 3;
    const RunResult ra = run_continual(a, suite);
    const RunResult rb = run_continual(a, suite);
    const RunResult rc = run_continual(b, suite);
    CHECK(ra.final_model.params().values == rb.final_model.params().values);
    CHECK(ra.final_model.params().values == rc.final_model.params().values);
    CHECK(telemetry_csv(ra.telemetry) == telemetry_csv(rc.telemetry));
    CHECK(ra.step_matrix.to_csv(ra.task_names) == rc.step_matrix.to_csv(rc.task_names));
  }
}

TEST_CASE("result shape") {
  const SuiteFile suite = tiny_suite();
  const RunResult r = run_continual(tiny_run(MethodKind::CGL), suite);
  CHECK(r.order == std::vector<int>{2, 0, 1});
  CHECK(r.task_names.size() == 3);
  CHECK(r.telemetry.size() == 18);
  for (int n = 0; n < 3; ++n) CHECK(r.step_matrix.row_complete(n));
  REQUIRE(r.fm_step.has_value());
  CHECK(*r.fm_step == doctest::Approx(forgetting_measure(r.step_matrix)));
  CHECK(r.avg_step == doctest::Approx(average_accuracy(r.step_matrix)));
  for (const TelemetryRow& row : r.telemetry) {
    CHECK(row.task_id == r.order[static_cast<std::size_t>(row.stage)]);
    CHECK(row.update == (row.stage == 0 ? "sft" : "cgl"));
    CHECK(row.lambda >= 0.0);
    CHECK(row.lambda <= 1.0);
  }
  // Warmup restarts at every task boundary.
  CHECK(r.telemetry[6].step_in_task == 0);
  CHECK(r.telemetry[6].lambda == doctest::Approx(0.2));
  CHECK(r.telemetry[12].lambda == doctest::Approx(0.2));

  RunConfig single = tiny_run(MethodKind::SFT);
  single.order = {1};
  const RunResult s = run_continual(single, suite);
  CHECK_FALSE(s.fm_step.has_value());
}

TEST_CASE("every method trains its first task with SFT") {
  const SuiteFile suite = tiny_suite();
  std::vector<double> first;
  for (MethodKind k : kAllMethods) {
    RunConfig c = tiny_run(k);
    c.order = {0};
    const RunResult r = run_continual(c, suite);
    for (const TelemetryRow& row : r.telemetry) CHECK(row.update == "sft");
    if (first.empty()) first = r.final_model.params().values;
    CHECK(r.final_model.params().values == first);
  }
}

TEST_CASE("batches only contain data the method may see") {
  const SuiteFile suite = tiny_suite();
  std::map<std::uint64_t, int> task_of;
  std::set<std::uint64_t> test_uids;
  for (const TaskDataset& t : suite.tasks) {
    for (const Trajectory& tr : t.train) task_of[tr.uid] = t.task_id;
    for (const Trajectory& tr : t.test) test_uids.insert(tr.uid);
  }
  for (MethodKind k : kAllMethods) {
    CAPTURE(to_string(k));
    const RunConfig c = tiny_run(k);
    std::map<int, std::set<int>> seen_tasks;
    RunObserver obs;
    obs.on_batch = [&](int stage, std::span<const Query> batch) {
      for (const Query& q : batch) {
        CHECK_FALSE(test_uids.contains(q.trajectory_uid));
        REQUIRE(task_of.contains(q.trajectory_uid));
        const int t = task_of[q.trajectory_uid];
        seen_tasks[stage].insert(t);
        const int pos = static_cast<int>(std::find(c.order.begin(), c.order.end(), t) - c.order.begin());
        CHECK(pos <= stage);
        if (k != MethodKind::SFT_Replay && k != MethodKind::Joint) CHECK(pos == stage);
      }
    };
    run_continual(c, suite, &obs);
    if (k == MethodKind::SFT_Replay || k == MethodKind::Joint) CHECK(seen_tasks[2].size() >= 2);
  }
}

TEST_CASE("each stage starts from the previous stage's parameters") {
  const SuiteFile suite = tiny_suite();
  std::vector<std::vector<double>> begins, ends;
  RunObserver obs;
  obs.on_stage_begin = [&](int, const PolicyModel& m) { begins.push_back(m.params().values); };
  obs.on_stage_end = [&](int, const PolicyModel& m) { ends.push_back(m.params().values); };
  const RunResult r = run_continual(tiny_run(MethodKind::GRPO), suite, &obs);
  REQUIRE(begins.size() == 3);
  REQUIRE(ends.size() == 3);
  for (double v : begins[0]) CHECK(v == 0.0);
  CHECK(begins[1] == ends[0]);
  CHECK(begins[2] == ends[1]);
  CHECK(ends[2] == r.final_model.params().values);
}

TEST_CASE("configuration errors") {
  const SuiteFile suite = tiny_suite();
  RunConfig c = tiny_run(MethodKind::SFT);
  c.order = {0, 5};
  CHECK_THROWS_AS(run_continual(c, suite), ConfigMismatch);
  c = tiny_run(MethodKind::SFT);
  c.order = {0, 0};
  CHECK_THROWS_AS(c.validate(), InputError);
  c = tiny_run(MethodKind::SFT);
  c.steps_per_task = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = tiny_run(MethodKind::SFT);
  c.group_size = 1;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = tiny_run(MethodKind::SFT_Replay);
  c.method.replay_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);

  const std::filesystem::path ckpt = std::filesystem::temp_directory_path() / "cgl_test_bad_ckpt.txt";
  save_checkpoint(ckpt, PolicyModel(5, 2));
  c = tiny_run(MethodKind::SFT);
  c.init_checkpoint = ckpt.string();
  CHECK_THROWS_AS(run_continual(c, suite), ConfigMismatch);
  std::filesystem::remove(ckpt);
}

TEST_CASE("init checkpoint resumes training") {
  const SuiteFile suite = tiny_suite();
  RunConfig first = tiny_run(MethodKind::SFT);
  first.order = {2};
  const RunResult a = run_continual(first, suite);
  const std::filesystem::path ckpt = std::filesystem::temp_directory_path() / "cgl_test_ckpt.txt";
  save_checkpoint(ckpt, a.final_model);
  RunConfig second = tiny_run(MethodKind::SFT);
  second.order = {0};
  second.init_checkpoint = ckpt.string();
  std::vector<double> start;
  RunObserver obs;
  obs.on_stage_begin = [&](int, const PolicyModel& m) { start = m.params().values; };
  run_continual(second, suite, &obs);
  CHECK(start == a.final_model.params().values);
  std::filesystem::remove(ckpt);
}

TEST_CASE("run outputs") {
  const SuiteFile suite = tiny_suite();
  const RunConfig c = tiny_run(MethodKind::SFT_KL);
  const RunResult r = run_continual(c, suite);
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "cgl_test_run_outputs";
  std::filesystem::remove_all(dir);
  write_run_outputs(dir, c, r);
  for (const char* f : {"config.json", "step_matrix.csv", "traj_matrix.csv", "summary.json", "telemetry.csv",
                        "checkpoint.txt"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const RunConfig back = load_run_config(dir / "config.json");
  CHECK(back.order == c.order);
  CHECK(back.method.kind == MethodKind::SFT_KL);
  CHECK(load_checkpoint(dir / "checkpoint.txt").params().values == r.final_model.params().values);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
