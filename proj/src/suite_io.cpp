#include "cgl/suite_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cgl/error.hpp"

namespace cgl {
namespace {

// Whitespace tokenizer over one line with typed accessors and line-numbered errors.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line[0] == '#') continue;
      tokens_.clear();
      pos_ = 0;
      std::istringstream ss(line);
      std::string tok;
      while (ss >> tok) tokens_.push_back(tok);
      if (!tokens_.empty()) return true;
    }
    return false;
  }

  void require_next(std::string_view what) {
    if (!next()) fail("unexpected end of file, expected " + std::string(what));
  }

  bool done() const { return pos_ >= tokens_.size(); }
  const std::string& peek() const {
    if (done()) fail("unexpected end of line");
    return tokens_[pos_];
  }
  std::string word() {
    const std::string& t = peek();
    ++pos_;
    return t;
  }
  void expect(std::string_view keyword) {
    const std::string t = word();
    if (t != keyword) fail("expected '" + std::string(keyword) + "', found '" + t + "'");
  }
  double real() {
    const std::string t = word();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail("bad real '" + t + "'");
    return v;
  }
  long long integer() {
    const std::string t = word();
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail("bad integer '" + t + "'");
    return v;
  }
  std::uint64_t unsigned_integer() {
    const std::string t = word();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail("bad unsigned integer '" + t + "'");
    return v;
  }
  void expect_end() const {
    if (!done()) fail("trailing token '" + tokens_[pos_] + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("line " + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

void write_reals(std::ostream& out, std::span<const double> values) {
  for (double v : values) out << ' ' << format_real(v);
}

void write_action(std::ostream& out, const GuiAction& a, const std::optional<BoundingBox>& box) {
  out << to_string(a.kind);
  if (a.coord) out << ' ' << format_real(a.coord->x) << ' ' << format_real(a.coord->y);
  if (a.text) out << ' ' << *a.text;
  if (a.direction) out << ' ' << to_string(*a.direction);
  if (a.app) out << ' ' << *a.app;
  if (box) {
    out << " bbox " << format_real(box->x_min) << ' ' << format_real(box->y_min) << ' '
        << format_real(box->x_max) << ' ' << format_real(box->y_max);
  }
}

Step read_step(LineReader& r, const SuiteConfig& cfg) {
  r.expect("step");
  const std::string kind_name = r.word();
  const auto kind = parse_action_kind(kind_name);
  if (!kind) r.fail("unknown action kind '" + kind_name + "'");
  Step step;
  switch (*kind) {
    case ActionKind::Click:
    case ActionKind::LongPress: {
      const double x = r.real();
      const double y = r.real();
      step.gt_action = *kind == ActionKind::Click ? GuiAction::click({x, y}) : GuiAction::long_press({x, y});
      r.expect("bbox");
      BoundingBox b;
      b.x_min = r.real();
      b.y_min = r.real();
      b.x_max = r.real();
      b.y_max = r.real();
      if (!b.valid()) r.fail("invalid bounding box");
      step.gt_bbox = b;
      break;
    }
    case ActionKind::InputText:
      step.gt_action = GuiAction::input_text(static_cast<int>(r.integer()));
      break;
    case ActionKind::Scroll: {
      const auto dir = parse_direction(r.word());
      if (!dir) r.fail("unknown scroll direction");
      step.gt_action = GuiAction::scroll(*dir);
      break;
    }
    case ActionKind::OpenApp:
      step.gt_action = GuiAction::open_app(static_cast<int>(r.integer()));
      break;
    default:
      step.gt_action = GuiAction::nullary(*kind);
  }
  if (!step.gt_action.valid()) r.fail("invalid action " + step.gt_action.describe());
  r.expect("obs");
  for (int i = 0; i < cfg.obs_dim; ++i) step.observation.push_back(r.real());
  r.expect_end();
  return step;
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_suite(std::ostream& out, const SuiteConfig& c, std::span<const TaskDataset> tasks) {
  out << "cgl-suite " << kSuiteFormatVersion << "\n";
  out << "config n_tasks " << c.n_tasks << " apps_per_task " << c.apps_per_task << " trajs_per_app "
      << c.trajs_per_app << " steps_min " << c.steps_min << " steps_max " << c.steps_max << " obs_dim "
      << c.obs_dim << " instr_dim " << c.instr_dim << " grid " << c.grid << " vocab " << c.vocab
      << " apps " << c.apps << " layout_dim " << c.layout_dim << " intent_dim " << c.intent_dim << " widgets " << c.widgets
      << " domain_shift " << format_real(c.domain_shift) << " noise_sigma " << format_real(c.noise_sigma)
      << " seed " << c.seed << "\n";
  for (const TaskDataset& t : tasks) {
    out << "task " << t.task_id << ' ' << t.name << " apps " << t.app_ids.size();
    for (int a : t.app_ids) out << ' ' << a;
    out << " train " << t.train.size() << " test " << t.test.size() << "\n";
    auto write_split = [&](const std::vector<Trajectory>& trajs, const char* split) {
      for (const Trajectory& traj : trajs) {
        out << "traj " << traj.uid << ' ' << split << " app " << traj.app_id << " steps " << traj.steps.size()
            << "\n";
        out << "instr";
        write_reals(out, traj.instruction);
        out << "\n";
        for (const Step& s : traj.steps) {
          out << "step ";
          write_action(out, s.gt_action, s.gt_bbox);
          out << " obs";
          write_reals(out, s.observation);
          out << "\n";
        }
      }
    };
    write_split(t.train, "train");
    write_split(t.test, "test");
  }
  out << "end\n";
}

SuiteFile read_suite(std::istream& in) {
  LineReader r(in);
  r.require_next("header");
  r.expect("cgl-suite");
  if (r.integer() != kSuiteFormatVersion) r.fail("unsupported suite format version");

  SuiteFile file;
  SuiteConfig& c = file.config;
  r.require_next("config line");
  r.expect("config");
  std::map<std::string, bool> seen;
  while (!r.done()) {
    const std::string key = r.word();
    if (seen[key]) r.fail("duplicate config key '" + key + "'");
    seen[key] = true;
    if (key == "n_tasks") c.n_tasks = static_cast<int>(r.integer());
    else if (key == "apps_per_task") c.apps_per_task = static_cast<int>(r.integer());
    else if (key == "trajs_per_app") c.trajs_per_app = static_cast<int>(r.integer());
    else if (key == "steps_min") c.steps_min = static_cast<int>(r.integer());
    else if (key == "steps_max") c.steps_max = static_cast<int>(r.integer());
    else if (key == "obs_dim") c.obs_dim = static_cast<int>(r.integer());
    else if (key == "instr_dim") c.instr_dim = static_cast<int>(r.integer());
    else if (key == "grid") c.grid = static_cast<int>(r.integer());
    else if (key == "vocab") c.vocab = static_cast<int>(r.integer());
    else if (key == "apps") c.apps = static_cast<int>(r.integer());
    else if (key == "layout_dim") c.layout_dim = static_cast<int>(r.integer());
    else if (key == "intent_dim") c.intent_dim = static_cast<int>(r.integer());
    else if (key == "widgets") c.widgets = static_cast<int>(r.integer());
    else if (key == "domain_shift") c.domain_shift = r.real();
    else if (key == "noise_sigma") c.noise_sigma = r.real();
    else if (key == "seed") c.seed = r.unsigned_integer();
    else r.fail("unknown config key '" + key + "'");
  }
  c.validate();

  for (int t = 0; t < c.n_tasks; ++t) {
    r.require_next("task header");
    r.expect("task");
    TaskDataset task;
    task.task_id = static_cast<int>(r.integer());
    task.name = r.word();
    r.expect("apps");
    const long long n_apps = r.integer();
    for (long long i = 0; i < n_apps; ++i) task.app_ids.push_back(static_cast<int>(r.integer()));
    r.expect("train");
    const long long n_train = r.integer();
    r.expect("test");
    const long long n_test = r.integer();
    r.expect_end();
    for (long long i = 0; i < n_train + n_test; ++i) {
      r.require_next("trajectory");
      r.expect("traj");
      Trajectory traj;
      traj.uid = r.unsigned_integer();
      const std::string split = r.word();
      if (split != "train" && split != "test") r.fail("split must be train or test");
      if ((split == "train") != (i < n_train)) r.fail("trajectory listed under the wrong split");
      r.expect("app");
      traj.app_id = static_cast<int>(r.integer());
      r.expect("steps");
      const long long n_steps = r.integer();
      if (n_steps < 1) r.fail("trajectory without steps");
      r.expect_end();
      r.require_next("instruction");
      r.expect("instr");
      for (int k = 0; k < c.instr_dim; ++k) traj.instruction.push_back(r.real());
      r.expect_end();
      for (long long s = 0; s < n_steps; ++s) {
        r.require_next("step");
        traj.steps.push_back(read_step(r, c));
      }
      if (traj.steps.back().gt_action.kind != ActionKind::Finish) r.fail("trajectory does not end with finish");
      (split == "train" ? task.train : task.test).push_back(std::move(traj));
    }
    file.tasks.push_back(std::move(task));
  }
  r.require_next("end marker");
  r.expect("end");
  if (r.next()) r.fail("content after end marker");
  return file;
}

void save_suite(const std::filesystem::path& path, const SuiteConfig& config,
                std::span<const TaskDataset> tasks) {
  std::ostringstream ss;
  write_suite(ss, config, tasks);
  write_file(path, ss.str());
}

SuiteFile load_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open suite file " + path.string());
  return read_suite(in);
}

void write_checkpoint(std::ostream& out, const PolicyModel& model) {
  out << "cgl-checkpoint " << kCheckpointFormatVersion << "\n";
  out << "num_actions " << model.num_actions() << " input_dim " << model.input_dim() << " hidden "
      << model.hidden() << " params " << model.num_params() << "\n";
  for (double v : model.params().values) out << format_real(v) << "\n";
}

PolicyModel read_checkpoint(std::istream& in) {
  LineReader r(in);
  r.require_next("header");
  r.expect("cgl-checkpoint");
  if (r.integer() != kCheckpointFormatVersion) r.fail("unsupported checkpoint format version");
  r.require_next("shape line");
  r.expect("num_actions");
  const auto k = static_cast<int>(r.integer());
  r.expect("input_dim");
  const auto d = static_cast<int>(r.integer());
  r.expect("hidden");
  const auto h = static_cast<int>(r.integer());
  r.expect("params");
  const long long n = r.integer();
  PolicyParams params;
  params.values.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    r.require_next("parameter value");
    params.values.push_back(r.real());
    r.expect_end();
  }
  if (r.next()) r.fail("content after the last parameter");
  return PolicyModel(k, d, h, std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const PolicyModel& model) {
  std::ostringstream ss;
  write_checkpoint(ss, model);
  write_file(path, ss.str());
}

PolicyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace cgl
