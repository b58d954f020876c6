#include <doctest.h>

#include "cgl/config.hpp"
#include "cgl/error.hpp"

using namespace cgl;

TEST_SUITE("config") {

TEST_CASE("suite config round-trip") {
  SuiteConfig c;
  c.n_tasks = 4;
  c.apps = 12;
  c.domain_shift = 0.25;
  c.seed = 99;
  c.widgets = 5;
  CHECK(suite_config_from_json(suite_config_to_json(c)) == c);
}

TEST_CASE("missing keys take defaults") {
  CHECK(suite_config_from_json("{}") == SuiteConfig{});
  const RunConfig r = run_config_from_json(R"({"order": [2, 0]})");
  CHECK(r.order == std::vector<int>{2, 0});
  CHECK(r.steps_per_task == RunConfig{}.steps_per_task);
  CHECK(r.method.kind == MethodKind::CGL);
}

TEST_CASE("run config round-trip") {
  RunConfig r;
  r.suite_path = "suite.txt";
  r.order = {3, 1, 2};
  r.method.kind = MethodKind::SFT_Replay;
  r.method.replay_fraction = 0.1;
  r.method.use_surgery = false;
  r.steps_per_task = 17;
  r.learning_rate = 0.3;
  r.rl_learning_rate = 0.07;
  r.scheduler.normalize_entropy = !r.scheduler.normalize_entropy;
  r.scheduler.gamma = 7.5;
  r.seed = 5;
  const RunConfig back = run_config_from_json(run_config_to_json(r));
  CHECK(back.suite_path == r.suite_path);
  CHECK(back.order == r.order);
  CHECK(back.method.kind == r.method.kind);
  CHECK(back.method.replay_fraction == r.method.replay_fraction);
  CHECK(back.method.use_surgery == r.method.use_surgery);
  CHECK(back.steps_per_task == 17);
  CHECK(back.learning_rate == 0.3);
  CHECK(back.rl_learning_rate == 0.07);
  CHECK(back.scheduler.normalize_entropy == r.scheduler.normalize_entropy);
  CHECK(back.scheduler.gamma == 7.5);
  CHECK(back.seed == 5);
  CHECK(run_config_to_json(back) == run_config_to_json(r));
}

TEST_CASE("unknown keys, bad types and wrong schemas are rejected") {
  CHECK_THROWS_AS(suite_config_from_json(R"({"n_taks": 3})"), InputError);
  CHECK_THROWS_AS(suite_config_from_json(R"({"n_tasks": "three"})"), InputError);
  CHECK_THROWS_AS(suite_config_from_json(R"({"schema": "cgl-run-config/1"})"), InputError);
  CHECK_THROWS_AS(suite_config_from_json(R"({"n_tasks": 1})"), InputError);
  CHECK_THROWS_AS(suite_config_from_json("[1, 2"), InputError);
  CHECK_THROWS_AS(run_config_from_json(R"({"method": {"kind": "ewc"}})"), InputError);
  CHECK_THROWS_AS(run_config_from_json(R"({"method": {"use_routng": true}})"), InputError);
  CHECK_THROWS_AS(run_config_from_json(R"({"scheduler": {"gama": 2}})"), InputError);
  CHECK_THROWS_AS(run_config_from_json(R"([])"), InputError);
}

TEST_CASE("method names") {
  for (MethodKind k : {MethodKind::SFT, MethodKind::SFT_KL, MethodKind::SFT_Replay, MethodKind::GRPO, MethodKind::CGL,
                       MethodKind::Joint}) {
    CHECK(parse_method_kind(to_string(k)) == k);
  }
  MethodSpec m;
  CHECK(m.label() == "cgl");
  m.use_routing = false;
  CHECK(m.label() != "cgl");
}

}  // TEST_SUITE
