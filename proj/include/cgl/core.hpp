#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cgl {

enum class ActionKind : std::uint8_t {
  Click,
  LongPress,
  InputText,
  Scroll,
  OpenApp,
  Home,
  Back,
  Wait,
  Finish,
};

inline constexpr std::array<ActionKind, 9> kAllActionKinds = {
    ActionKind::Click,   ActionKind::LongPress, ActionKind::InputText,
    ActionKind::Scroll,  ActionKind::OpenApp,   ActionKind::Home,
    ActionKind::Back,    ActionKind::Wait,      ActionKind::Finish};

enum class Direction : std::uint8_t { Up, Down, Left, Right };

// Reward classes of the unified action space.
enum class ActionClass : std::uint8_t { NavState, Parameterized, Spatial };

ActionClass action_class(ActionKind kind);

std::string_view to_string(ActionKind kind);
std::string_view to_string(Direction dir);
std::string_view to_string(ActionClass cls);
std::optional<ActionKind> parse_action_kind(std::string_view name);
std::optional<Direction> parse_direction(std::string_view name);

// Normalized screen point in [0,1]^2.
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool valid() const;
  // Closed-interval containment: points on the border are inside.
  bool contains(Point p) const;
  Point center() const { return {(x_min + x_max) / 2, (y_min + y_max) / 2}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// One action of the unified GUI action space. Exactly the argument required by
// `kind` is set; use the factory functions to build valid values.
struct GuiAction {
  ActionKind kind = ActionKind::Wait;
  std::optional<Point> coord;
  std::optional<int> text;
  std::optional<Direction> direction;
  std::optional<int> app;

  static GuiAction click(Point p) { return {ActionKind::Click, p, {}, {}, {}}; }
  static GuiAction long_press(Point p) { return {ActionKind::LongPress, p, {}, {}, {}}; }
  static GuiAction input_text(int token) { return {ActionKind::InputText, {}, token, {}, {}}; }
  static GuiAction scroll(Direction d) { return {ActionKind::Scroll, {}, {}, d, {}}; }
  static GuiAction open_app(int app_id) { return {ActionKind::OpenApp, {}, {}, {}, app_id}; }
  static GuiAction nullary(ActionKind kind);

  // Argument presence matches the kind and coordinates lie in [0,1].
  bool valid() const;
  std::string describe() const;

  friend bool operator==(const GuiAction&, const GuiAction&) = default;
};

struct Step {
  std::vector<double> observation;
  GuiAction gt_action;
  std::optional<BoundingBox> gt_bbox;  // present iff gt_action is spatial
};

struct Trajectory {
  std::uint64_t uid = 0;  // unique within a suite; identity for split/isolation checks
  int app_id = 0;
  std::vector<double> instruction;
  std::vector<Step> steps;
};

struct TaskDataset {
  int task_id = 0;
  std::string name;
  std::vector<int> app_ids;
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

// Flat parameter vector of a policy; the unit on which gradients, surgery and
// updates operate.
struct PolicyParams {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool all_finite() const;
};

// Grid cell of the discretized coordinate head; col indexes x, row indexes y.
struct Cell {
  int col = 0;
  int row = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// One contiguous block of the logit index space.
struct IndexSegment {
  ActionKind kind;  // for the four nullary actions each gets its own segment
  int offset;
  int count;
};

// Bijection between grid-aligned GuiActions and logit indices 0..K-1:
//   [Click cells R*R][LongPress cells R*R][text tokens V][scroll 4][apps M]
//   [Home][Back][Wait][Finish]
// Cells are laid out row-major (index = row * R + col).
class ActionSpace {
 public:
  ActionSpace(int grid, int vocab, int apps);

  int grid() const { return grid_; }
  int vocab() const { return vocab_; }
  int apps() const { return apps_; }
  int size() const { return size_; }

  std::vector<IndexSegment> segments() const;

  Cell discretize(Point p) const;
  Point cell_center(Cell c) const;

  int encode(const GuiAction& a) const;
  GuiAction decode(int index) const;
  ActionKind kind_of(int index) const;
  int spatial_index(ActionKind kind, Cell c) const;

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;

 private:
  int grid_;
  int vocab_;
  int apps_;
  int size_;
  int text_offset_;
  int scroll_offset_;
  int app_offset_;
  int nullary_offset_;
};

// Concatenates observation and instruction features (the policy input).
std::vector<double> combined_features(std::span<const double> observation,
                                      std::span<const double> instruction);

}  // namespace cgl
