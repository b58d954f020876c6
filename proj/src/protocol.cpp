#include "cgl/protocol.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cgl/config.hpp"
#include "cgl/error.hpp"
#include "cgl/sft.hpp"

namespace cgl {

namespace {

constexpr std::pair<MethodKind, std::string_view> kMethodNames[] = {
    {MethodKind::SFT, "sft"},   {MethodKind::SFT_KL, "sft_kl"}, {MethodKind::SFT_Replay, "sft_replay"},
    {MethodKind::GRPO, "grpo"}, {MethodKind::CGL, "cgl"},       {MethodKind::Joint, "joint"},
};

}  // namespace

std::string_view to_string(MethodKind kind) {
  for (const auto& [k, name] : kMethodNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<MethodKind> parse_method_kind(std::string_view name) {
  for (const auto& [k, n] : kMethodNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

void MethodSpec::validate() const {
  if (!(replay_fraction > 0.0 && replay_fraction <= 1.0)) {
    throw InputError("method: replay_fraction must lie in (0, 1]");
  }
  if (!(static_lambda >= 0.0)) throw InputError("method: static_lambda must be >= 0");
  if (replay_batch < 1) throw InputError("method: replay_batch must be >= 1");
}

std::string MethodSpec::label() const {
  std::string out(to_string(kind));
  if (kind != MethodKind::CGL) return out;
  std::string off;
  if (!use_routing) off += "-routing";
  if (!use_dynamic_lambda) off += "-dlambda";
  if (!use_surgery) off += "-surgery";
  if (!off.empty()) out += "[" + off + "]";
  return out;
}

void RunConfig::validate() const {
  method.validate();
  scheduler.validate();
  if (order.empty()) throw InputError("run: task order is empty");
  if (std::set<int>(order.begin(), order.end()).size() != order.size()) {
    throw InputError("run: task order repeats a task");
  }
  if (steps_per_task < 1) throw InputError("run: steps_per_task must be >= 1");
  if (batch_size < 1) throw InputError("run: batch_size must be >= 1");
  if (group_size < 2) throw InputError("run: group_size must be >= 2");
  if (box_samples < 1) throw InputError("run: box_samples must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("run: learning_rate must be > 0");
  if (!(rl_learning_rate > 0.0)) throw InputError("run: rl_learning_rate must be > 0");
  if (!(beta >= 0.0)) throw InputError("run: beta must be >= 0");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw InputError("run: clip_eps must lie in (0, 1)");
  if (!(adv_eps > 0.0)) throw InputError("run: adv_eps must be > 0");
  if (hidden < 0) throw InputError("run: hidden must be >= 0");
  if (workers < 1) throw InputError("run: workers must be >= 1");
}

void RunConfig::check_against(const SuiteConfig& suite) const {
  for (int t : order) {
    if (t < 0 || t >= suite.n_tasks) {
      throw ConfigMismatch("run: task " + std::to_string(t) + " is not in a suite of " +
                           std::to_string(suite.n_tasks) + " tasks");
    }
  }
}

SftStepReport sft_step(PolicyModel& model, const PolicyModel& model_ref, const ActionSpace& space,
                       std::span<const Query> batch, double learning_rate, double beta,
                       int box_samples, const RngStream& step_rng) {
  if (batch.empty()) throw InputError("sft_step(): empty batch");
  const std::size_t B = batch.size();
  std::vector<std::vector<double>> dlogits(B);
  std::vector<double> losses(B, 0.0);
  std::vector<double> entropies(B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    const ActionDistribution dist = forward(model, batch[i].features);
    RngStream box_rng = step_rng.split(2 * i + 1);
    const std::vector<int> targets = sft_targets(space, batch[i], box_rng, box_samples);
    LogitLoss s = sft_logit_loss(dist, targets);
    if (beta > 0.0) {
      const ActionDistribution ref = forward(model_ref, batch[i].features);
      const std::vector<double> g_kl = kl_logit_grad(dist, ref);
      for (std::size_t a = 0; a < g_kl.size(); ++a) s.dlogits[a] += beta * g_kl[a];
      s.loss += beta * kl_exact(dist, ref);
    }
    dlogits[i] = std::move(s.dlogits);
    losses[i] = s.loss;
    entropies[i] = entropy(dist);
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  std::vector<double> grad(model.num_params(), 0.0);
  SftStepReport report;
  for (std::size_t i = 0; i < B; ++i) {
    model.accumulate_grad(batch[i].features, dlogits[i], inv_b, grad);
    report.loss += losses[i] * inv_b;
    report.mean_entropy += entropies[i] * inv_b;
  }
  report.grad_norm = l2_norm(grad);
  std::vector<double>& theta = model.params().values;
  for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= learning_rate * grad[j];
  if (!model.params().all_finite()) throw NumericError("sft_step(): parameters became non-finite");
  return report;
}

BaselineStepResult baseline_step(MethodKind stage_kind, const RunConfig& config, PolicyModel& model,
                                 const PolicyModel& model_ref, const ActionSpace& space,
                                 std::span<const Query> batch, SchedulerState& scheduler,
                                 const RngStream& step_rng) {
  BaselineStepResult out;
  TelemetryRow& row = out.row;
  switch (stage_kind) {
    case MethodKind::SFT:
    case MethodKind::SFT_Replay:
    case MethodKind::Joint:
    case MethodKind::SFT_KL: {
      const bool kl = stage_kind == MethodKind::SFT_KL;
      const SftStepReport r = sft_step(model, model_ref, space, batch, config.learning_rate,
                                       kl ? config.beta : 0.0, config.box_samples, step_rng);
      row.update = kl ? "sft_kl" : "sft";
      row.mean_entropy = r.mean_entropy;
      row.lambda = 1.0;
      row.routed_fraction = 1.0;
      row.grad_norm_sft_raw = r.grad_norm;
      row.grad_norm_sft_final = r.grad_norm;
      row.loss = r.loss;
      ++scheduler.step_in_task;
      return out;
    }
    case MethodKind::GRPO:
    case MethodKind::CGL: {
      HybridConfig h;
      h.group_size = config.group_size;
      h.box_samples = config.box_samples;
      h.learning_rate = config.rl_learning_rate;
      h.beta = config.beta;
      h.clip_eps = config.clip_eps;
      h.adv_eps = config.adv_eps;
      h.workers = config.workers;
      if (stage_kind == MethodKind::GRPO) {
        h.use_routing = false;
        h.use_dynamic_lambda = false;
        h.use_surgery = false;
        h.static_lambda = 0.0;
        row.update = "grpo";
      } else {
        h.use_routing = config.method.use_routing;
        h.use_dynamic_lambda = config.method.use_dynamic_lambda;
        h.use_surgery = config.method.use_surgery;
        h.static_lambda = config.method.static_lambda;
        row.update = "cgl";
      }
      // Rollouts come from the pre-update policy of this step.
      const PolicyModel model_old = model;
      const HybridStepReport r =
          hybrid_step(model, model_old, model_ref, space, batch, scheduler, h, step_rng);
      row.mean_entropy = r.mean_entropy;
      row.lambda = r.lambda_used;
      row.routed_fraction = static_cast<double>(r.routed_queries) / r.batch_size;
      row.cos_alpha = r.cos_alpha;
      row.conflict = r.conflict_detected;
      row.grad_norm_grpo = r.grad_norm_grpo;
      row.grad_norm_sft_raw = r.grad_norm_sft_raw;
      row.grad_norm_sft_final = r.grad_norm_sft_final;
      row.loss = r.grpo_loss + r.lambda_used * r.sft_loss;
      row.mean_reward = r.mean_reward;
      return out;
    }
  }
  throw ContractError("baseline_step(): unknown method");
}

namespace {

constexpr std::uint64_t kReplayBatchChild = 1'000'000;

// Shuffled passes over a fixed pool of query indices.
class EpochBatcher {
 public:
  EpochBatcher(std::size_t pool_size, RngStream rng) : rng_(std::move(rng)), perm_(pool_size) {
    for (std::size_t i = 0; i < pool_size; ++i) perm_[i] = i;
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t batch_size) {
    std::vector<std::size_t> out;
    out.reserve(batch_size);
    while (out.size() < batch_size) {
      if (pos_ == perm_.size()) reshuffle();
      out.push_back(perm_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    if (perm_.empty()) return;
    for (std::size_t i = perm_.size(); i > 1; --i) {
      std::swap(perm_[i - 1], perm_[rng_.uniform_index(i)]);
    }
    pos_ = 0;
  }

  RngStream rng_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

void append_queries(std::vector<Query>& out, std::span<const Trajectory> trajs, int task_id) {
  for (const Trajectory& t : trajs) {
    for (const Step& s : t.steps) out.push_back(make_query(t, s, task_id));
  }
}

const TaskDataset& find_task(const SuiteFile& suite, int task_id) {
  for (const TaskDataset& t : suite.tasks) {
    if (t.task_id == task_id) return t;
  }
  throw ConfigMismatch("suite has no task " + std::to_string(task_id));
}

}  // namespace

RunResult run_continual(const RunConfig& config, const SuiteFile& suite, const RunObserver* observer) {
  config.validate();
  config.check_against(suite.config);
  const ActionSpace space = suite.config.action_space();
  const int K = space.size();
  const int D = suite.config.input_dim();
  const int N = static_cast<int>(config.order.size());

  PolicyModel model(K, D, config.hidden, config.seed);
  if (!config.init_checkpoint.empty()) {
    PolicyModel loaded = load_checkpoint(config.init_checkpoint);
    if (loaded.num_actions() != K || loaded.input_dim() != D || loaded.hidden() != config.hidden) {
      throw ConfigMismatch("checkpoint shape (K=" + std::to_string(loaded.num_actions()) +
                           ", D=" + std::to_string(loaded.input_dim()) + ", H=" +
                           std::to_string(loaded.hidden()) + ") does not match the suite/run (K=" +
                           std::to_string(K) + ", D=" + std::to_string(D) + ", H=" +
                           std::to_string(config.hidden) + ")");
    }
    model = std::move(loaded);
  }

  RunResult result;
  result.order = config.order;
  result.step_matrix = AccuracyMatrix(N, MetricKind::Step);
  result.traj_matrix = AccuracyMatrix(N, MetricKind::Trajectory);
  for (int t : config.order) result.task_names.push_back(find_task(suite, t).name);

  std::vector<Query> replay_buffer;
  std::unordered_set<std::uint64_t> replay_uids;
  const RngStream batching_root(config.seed, streams::kBatching);
  const RngStream rollout_root(config.seed, streams::kRollout);
  const RngStream replay_root(config.seed, streams::kReplay);
  int global_step = 0;

  for (int stage = 0; stage < N; ++stage) {
    const TaskDataset& task = find_task(suite, config.order[static_cast<std::size_t>(stage)]);
    const MethodKind kind = stage == 0 ? MethodKind::SFT : config.method.kind;

    std::vector<Query> pool;
    std::unordered_set<std::uint64_t> allowed;
    append_queries(pool, task.train, task.task_id);
    for (const Trajectory& t : task.train) allowed.insert(t.uid);
    const bool replay = config.method.kind == MethodKind::SFT_Replay && !replay_buffer.empty();
    if (replay) allowed.insert(replay_uids.begin(), replay_uids.end());
    if (config.method.kind == MethodKind::Joint) {
      for (int prev = 0; prev < stage; ++prev) {
        const TaskDataset& p = find_task(suite, config.order[static_cast<std::size_t>(prev)]);
        append_queries(pool, p.train, p.task_id);
        for (const Trajectory& t : p.train) allowed.insert(t.uid);
      }
    }
    if (pool.empty()) throw InputError("task " + task.name + " has no training steps");

    const PolicyModel model_ref = model;
    SchedulerState scheduler{config.scheduler, K, 0};
    EpochBatcher batcher(pool.size(), batching_root.split(static_cast<std::uint64_t>(stage)));
    EpochBatcher replay_batcher(replay_buffer.size(), replay_root.split(kReplayBatchChild + static_cast<std::uint64_t>(stage)));
    if (observer && observer->on_stage_begin) observer->on_stage_begin(stage, model);
    spdlog::debug("stage {} ({}): {} queries, update rule {}", stage, task.name, pool.size(),
                  to_string(kind));

    std::vector<Query> batch;
    for (int step = 0; step < config.steps_per_task; ++step, ++global_step) {
      batch.clear();
      for (std::size_t idx : batcher.next(static_cast<std::size_t>(config.batch_size))) {
        batch.push_back(pool[idx]);
      }
      if (replay) {
        for (std::size_t idx : replay_batcher.next(static_cast<std::size_t>(config.method.replay_batch))) {
          batch.push_back(replay_buffer[idx]);
        }
      }
      for (const Query& q : batch) {
        if (!allowed.contains(q.trajectory_uid)) {
          throw ContractError("data isolation violated: trajectory " + std::to_string(q.trajectory_uid) +
                              " used at stage " + std::to_string(stage));
        }
      }
      if (observer && observer->on_batch) observer->on_batch(stage, batch);
      BaselineStepResult r = baseline_step(kind, config, model, model_ref, space, batch, scheduler,
                                           rollout_root.split(static_cast<std::uint64_t>(global_step)));
      r.row.global_step = global_step;
      r.row.stage = stage;
      r.row.task_id = task.task_id;
      r.row.step_in_task = step;
      result.telemetry.push_back(std::move(r.row));
    }

    if (config.method.kind == MethodKind::SFT_Replay && stage + 1 < N) {
      const auto n_train = task.train.size();
      const auto keep = std::min<std::size_t>(
          n_train, std::max<std::size_t>(1, static_cast<std::size_t>(config.method.replay_fraction *
                                                                       static_cast<double>(n_train))));
      RngStream rng = replay_root.split(static_cast<std::uint64_t>(stage));
      std::vector<std::size_t> idx(n_train);
      for (std::size_t i = 0; i < n_train; ++i) idx[i] = i;
      for (std::size_t i = 0; i < keep; ++i) {
        std::swap(idx[i], idx[i + rng.uniform_index(n_train - i)]);
        const Trajectory& t = task.train[idx[i]];
        append_queries(replay_buffer, std::span(&t, 1), task.task_id);
        replay_uids.insert(t.uid);
      }
    }

    if (observer && observer->on_stage_end) observer->on_stage_end(stage, model);
    for (int k = 0; k <= stage; ++k) {
      const TaskDataset& seen = find_task(suite, config.order[static_cast<std::size_t>(k)]);
      const TaskAccuracy acc = eval_task(model, space, seen.test);
      result.step_matrix.set(stage, k, acc.step_acc);
      result.traj_matrix.set(stage, k, acc.traj_acc);
    }
    spdlog::info("stage {} ({}) done: step acc on current task {:.4f}", stage, task.name,
                 result.step_matrix.at(stage, stage));
  }

  if (N >= 2) {
    result.fm_step = forgetting_measure(result.step_matrix);
    result.fm_traj = forgetting_measure(result.traj_matrix);
  }
  result.avg_step = average_accuracy(result.step_matrix);
  result.avg_traj = average_accuracy(result.traj_matrix);
  result.final_model = std::move(model);
  return result;
}

std::string telemetry_csv(std::span<const TelemetryRow> rows) {
  std::string out =
      "global_step,stage,task_id,step_in_task,update,mean_entropy,lambda,routed_fraction,cos_alpha,"
      "conflict,grad_norm_grpo,grad_norm_sft_raw,grad_norm_sft_final,loss,mean_reward\n";
  for (const TelemetryRow& r : rows) {
    out += std::to_string(r.global_step) + "," + std::to_string(r.stage) + "," + std::to_string(r.task_id) +
           "," + std::to_string(r.step_in_task) + "," + r.update + "," + format_real(r.mean_entropy) + "," +
           format_real(r.lambda) + "," + format_real(r.routed_fraction) + "," +
           (r.cos_alpha ? format_real(*r.cos_alpha) : std::string()) + "," + (r.conflict ? "1" : "0") + "," +
           format_real(r.grad_norm_grpo) + "," + format_real(r.grad_norm_sft_raw) + "," +
           format_real(r.grad_norm_sft_final) + "," + format_real(r.loss) + "," + format_real(r.mean_reward) +
           "\n";
  }
  return out;
}

void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config, const RunResult& result) {
  std::filesystem::create_directories(dir);
  write_file(dir / "config.json", run_config_to_json(config) + "\n");
  write_file(dir / "step_matrix.csv", result.step_matrix.to_csv(result.task_names));
  write_file(dir / "traj_matrix.csv", result.traj_matrix.to_csv(result.task_names));
  write_file(dir / "telemetry.csv", telemetry_csv(result.telemetry));
  save_checkpoint(dir / "checkpoint.txt", result.final_model);

  nlohmann::ordered_json s;
  s["method"] = config.method.label();
  s["seed"] = config.seed;
  s["order"] = result.order;
  s["task_names"] = result.task_names;
  s["avg_step_acc"] = result.avg_step;
  s["avg_traj_acc"] = result.avg_traj;
  s["fm_step"] = result.fm_step ? nlohmann::ordered_json(*result.fm_step) : nlohmann::ordered_json(nullptr);
  s["fm_traj"] = result.fm_traj ? nlohmann::ordered_json(*result.fm_traj) : nlohmann::ordered_json(nullptr);
  s["total_steps"] = result.telemetry.size();
  write_file(dir / "summary.json", s.dump(2) + "\n");
}

}  // namespace cgl
