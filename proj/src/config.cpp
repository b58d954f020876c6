#include "cgl/config.hpp"

#include <set>

#include <json.hpp>

#include "cgl/error.hpp"
#include "cgl/suite_io.hpp"

namespace cgl {

namespace {

using json = nlohmann::ordered_json;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw InputError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw InputError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void expect_schema(std::string_view schema) {
    std::string tag;
    get("schema", tag);
    if (!tag.empty() && tag != schema) {
      throw InputError(where_ + ": schema '" + tag + "' is not '" + std::string(schema) + "'");
    }
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw InputError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

json parse(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

json scheduler_json(const SchedulerConfig& s) {
  json j;
  j["lambda_max"] = s.lambda_max;
  j["lambda_min"] = s.lambda_min;
  j["step_w"] = s.step_w;
  j["gamma"] = s.gamma;
  j["k"] = s.k;
  j["h_max"] = s.h_max;
  j["normalize_entropy"] = s.normalize_entropy;
  j["clamp_entropy"] = s.clamp_entropy;
  return j;
}

}  // namespace

SuiteConfig suite_config_from_json(std::string_view text) {
  const json j = parse(text, "suite config");
  ObjectReader r(j, "suite config");
  SuiteConfig c;
  r.expect_schema(kSuiteConfigSchema);
  r.get("n_tasks", c.n_tasks);
  r.get("apps_per_task", c.apps_per_task);
  r.get("trajs_per_app", c.trajs_per_app);
  r.get("steps_min", c.steps_min);
  r.get("steps_max", c.steps_max);
  r.get("obs_dim", c.obs_dim);
  r.get("instr_dim", c.instr_dim);
  r.get("grid", c.grid);
  r.get("vocab", c.vocab);
  r.get("apps", c.apps);
  r.get("layout_dim", c.layout_dim);
  r.get("intent_dim", c.intent_dim);
  r.get("widgets", c.widgets);
  r.get("domain_shift", c.domain_shift);
  r.get("noise_sigma", c.noise_sigma);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

std::string suite_config_to_json(const SuiteConfig& c) {
  json j;
  j["schema"] = kSuiteConfigSchema;
  j["n_tasks"] = c.n_tasks;
  j["apps_per_task"] = c.apps_per_task;
  j["trajs_per_app"] = c.trajs_per_app;
  j["steps_min"] = c.steps_min;
  j["steps_max"] = c.steps_max;
  j["obs_dim"] = c.obs_dim;
  j["instr_dim"] = c.instr_dim;
  j["grid"] = c.grid;
  j["vocab"] = c.vocab;
  j["apps"] = c.apps;
  j["layout_dim"] = c.layout_dim;
  j["intent_dim"] = c.intent_dim;
  j["widgets"] = c.widgets;
  j["domain_shift"] = c.domain_shift;
  j["noise_sigma"] = c.noise_sigma;
  j["seed"] = c.seed;
  return j.dump(2);
}

RunConfig run_config_from_json(std::string_view text) {
  const json j = parse(text, "run config");
  ObjectReader r(j, "run config");
  RunConfig c;
  r.expect_schema(kRunConfigSchema);
  r.get("suite", c.suite_path);
  r.get("order", c.order);
  if (const json* m = r.child("method")) {
    ObjectReader mr(*m, "run config.method");
    std::string kind(to_string(c.method.kind));
    mr.get("kind", kind);
    const auto parsed = parse_method_kind(kind);
    if (!parsed) throw InputError("run config.method.kind: unknown method '" + kind + "'");
    c.method.kind = *parsed;
    mr.get("use_routing", c.method.use_routing);
    mr.get("use_dynamic_lambda", c.method.use_dynamic_lambda);
    mr.get("use_surgery", c.method.use_surgery);
    mr.get("static_lambda", c.method.static_lambda);
    mr.get("replay_fraction", c.method.replay_fraction);
    mr.get("replay_batch", c.method.replay_batch);
    mr.finish();
  }
  r.get("steps_per_task", c.steps_per_task);
  r.get("batch_size", c.batch_size);
  r.get("group_size", c.group_size);
  r.get("box_samples", c.box_samples);
  r.get("learning_rate", c.learning_rate);
  r.get("rl_learning_rate", c.rl_learning_rate);
  r.get("beta", c.beta);
  r.get("clip_eps", c.clip_eps);
  r.get("adv_eps", c.adv_eps);
  if (const json* s = r.child("scheduler")) {
    ObjectReader sr(*s, "run config.scheduler");
    sr.get("lambda_max", c.scheduler.lambda_max);
    sr.get("lambda_min", c.scheduler.lambda_min);
    sr.get("step_w", c.scheduler.step_w);
    sr.get("gamma", c.scheduler.gamma);
    sr.get("k", c.scheduler.k);
    sr.get("h_max", c.scheduler.h_max);
    sr.get("normalize_entropy", c.scheduler.normalize_entropy);
    sr.get("clamp_entropy", c.scheduler.clamp_entropy);
    sr.finish();
  }
  r.get("hidden", c.hidden);
  r.get("init_checkpoint", c.init_checkpoint);
  r.get("seed", c.seed);
  r.get("workers", c.workers);
  r.finish();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["schema"] = kRunConfigSchema;
  j["suite"] = c.suite_path;
  j["order"] = c.order;
  json m;
  m["kind"] = to_string(c.method.kind);
  m["use_routing"] = c.method.use_routing;
  m["use_dynamic_lambda"] = c.method.use_dynamic_lambda;
  m["use_surgery"] = c.method.use_surgery;
  m["static_lambda"] = c.method.static_lambda;
  m["replay_fraction"] = c.method.replay_fraction;
  m["replay_batch"] = c.method.replay_batch;
  j["method"] = m;
  j["steps_per_task"] = c.steps_per_task;
  j["batch_size"] = c.batch_size;
  j["group_size"] = c.group_size;
  j["box_samples"] = c.box_samples;
  j["learning_rate"] = c.learning_rate;
  j["rl_learning_rate"] = c.rl_learning_rate;
  j["beta"] = c.beta;
  j["clip_eps"] = c.clip_eps;
  j["adv_eps"] = c.adv_eps;
  j["scheduler"] = scheduler_json(c.scheduler);
  j["hidden"] = c.hidden;
  j["init_checkpoint"] = c.init_checkpoint;
  j["seed"] = c.seed;
  // workers is deliberately not echoed: it never changes results.
  return j.dump(2);
}

SuiteConfig load_suite_config(const std::filesystem::path& path) {
  return suite_config_from_json(read_file(path));
}

RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(read_file(path)); }

}  // namespace cgl
