#include "cgl/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cgl/error.hpp"

namespace cgl {

ActionClass action_class(ActionKind kind) {
  switch (kind) {
    case ActionKind::Click:
    case ActionKind::LongPress:
      return ActionClass::Spatial;
    case ActionKind::InputText:
    case ActionKind::Scroll:
    case ActionKind::OpenApp:
      return ActionClass::Parameterized;
    case ActionKind::Home:
    case ActionKind::Back:
    case ActionKind::Wait:
    case ActionKind::Finish:
      return ActionClass::NavState;
  }
  return ActionClass::NavState;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Click: return "click";
    case ActionKind::LongPress: return "long_press";
    case ActionKind::InputText: return "input_text";
    case ActionKind::Scroll: return "scroll";
    case ActionKind::OpenApp: return "open_app";
    case ActionKind::Home: return "home";
    case ActionKind::Back: return "back";
    case ActionKind::Wait: return "wait";
    case ActionKind::Finish: return "finish";
  }
  return "?";
}

std::string_view to_string(Direction dir) {
  switch (dir) {
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "?";
}

std::string_view to_string(ActionClass cls) {
  switch (cls) {
    case ActionClass::NavState: return "nav_state";
    case ActionClass::Parameterized: return "parameterized";
    case ActionClass::Spatial: return "spatial";
  }
  return "?";
}

std::optional<ActionKind> parse_action_kind(std::string_view name) {
  for (ActionKind k : kAllActionKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view name) {
  for (Direction d : {Direction::Up, Direction::Down, Direction::Left, Direction::Right}) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

bool BoundingBox::valid() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return in_unit(x_min) && in_unit(x_max) && in_unit(y_min) && in_unit(y_max) &&
         x_min < x_max && y_min < y_max;
}

bool BoundingBox::contains(Point p) const {
  return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
}

GuiAction GuiAction::nullary(ActionKind kind) {
  if (action_class(kind) != ActionClass::NavState) {
    throw InputError("nullary(): " + std::string(to_string(kind)) + " takes an argument");
  }
  return {kind, {}, {}, {}, {}};
}

bool GuiAction::valid() const {
  const bool wants_coord = kind == ActionKind::Click || kind == ActionKind::LongPress;
  const bool wants_text = kind == ActionKind::InputText;
  const bool wants_dir = kind == ActionKind::Scroll;
  const bool wants_app = kind == ActionKind::OpenApp;
  if (coord.has_value() != wants_coord || text.has_value() != wants_text ||
      direction.has_value() != wants_dir || app.has_value() != wants_app) {
    return false;
  }
  if (coord && (coord->x < 0.0 || coord->x > 1.0 || coord->y < 0.0 || coord->y > 1.0)) {
    return false;
  }
  if (text && *text < 0) return false;
  if (app && *app < 0) return false;
  return true;
}

std::string GuiAction::describe() const {
  std::string out(to_string(kind));
  char buf[64];
  if (coord) {
    std::snprintf(buf, sizeof buf, "(%.4f, %.4f)", coord->x, coord->y);
    out += buf;
  } else if (text) {
    out += "(token " + std::to_string(*text) + ")";
  } else if (direction) {
    out += "(" + std::string(to_string(*direction)) + ")";
  } else if (app) {
    out += "(app " + std::to_string(*app) + ")";
  } else {
    out += "()";
  }
  return out;
}

bool PolicyParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ActionSpace::ActionSpace(int grid, int vocab, int apps)
    : grid_(grid), vocab_(vocab), apps_(apps) {
  if (grid < 1 || vocab < 0 || apps < 0) {
    throw InputError("action space needs grid >= 1, vocab >= 0, apps >= 0");
  }
  text_offset_ = 2 * grid * grid;
  scroll_offset_ = text_offset_ + vocab;
  app_offset_ = scroll_offset_ + 4;
  nullary_offset_ = app_offset_ + apps;
  size_ = nullary_offset_ + 4;
}

std::vector<IndexSegment> ActionSpace::segments() const {
  const int cells = grid_ * grid_;
  return {
      {ActionKind::Click, 0, cells},
      {ActionKind::LongPress, cells, cells},
      {ActionKind::InputText, text_offset_, vocab_},
      {ActionKind::Scroll, scroll_offset_, 4},
      {ActionKind::OpenApp, app_offset_, apps_},
      {ActionKind::Home, nullary_offset_, 1},
      {ActionKind::Back, nullary_offset_ + 1, 1},
      {ActionKind::Wait, nullary_offset_ + 2, 1},
      {ActionKind::Finish, nullary_offset_ + 3, 1},
  };
}

Cell ActionSpace::discretize(Point p) const {
  if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
    throw InputError("discretize(): coordinate outside [0,1]^2");
  }
  const auto axis = [this](double v) {
    return std::min(static_cast<int>(std::floor(v * grid_)), grid_ - 1);
  };
  return {axis(p.x), axis(p.y)};
}

Point ActionSpace::cell_center(Cell c) const {
  return {(c.col + 0.5) / grid_, (c.row + 0.5) / grid_};
}

int ActionSpace::spatial_index(ActionKind kind, Cell c) const {
  if (c.col < 0 || c.col >= grid_ || c.row < 0 || c.row >= grid_) {
    throw InputError("spatial_index(): cell outside grid");
  }
  const int base = kind == ActionKind::Click ? 0 : kind == ActionKind::LongPress ? grid_ * grid_ : -1;
  if (base < 0) throw InputError("spatial_index(): kind is not spatial");
  return base + c.row * grid_ + c.col;
}

int ActionSpace::encode(const GuiAction& a) const {
  if (!a.valid()) throw InputError("encode(): invalid action " + a.describe());
  switch (a.kind) {
    case ActionKind::Click:
    case ActionKind::LongPress:
      return spatial_index(a.kind, discretize(*a.coord));
    case ActionKind::InputText:
      if (*a.text >= vocab_) throw InputError("encode(): text token outside vocabulary");
      return text_offset_ + *a.text;
    case ActionKind::Scroll:
      return scroll_offset_ + static_cast<int>(*a.direction);
    case ActionKind::OpenApp:
      if (*a.app >= apps_) throw InputError("encode(): app id outside action space");
      return app_offset_ + *a.app;
    case ActionKind::Home: return nullary_offset_;
    case ActionKind::Back: return nullary_offset_ + 1;
    case ActionKind::Wait: return nullary_offset_ + 2;
    case ActionKind::Finish: return nullary_offset_ + 3;
  }
  throw InputError("encode(): unknown kind");
}

ActionKind ActionSpace::kind_of(int index) const {
  if (index < 0 || index >= size_) throw InputError("action index out of range");
  const int cells = grid_ * grid_;
  if (index < cells) return ActionKind::Click;
  if (index < 2 * cells) return ActionKind::LongPress;
  if (index < scroll_offset_) return ActionKind::InputText;
  if (index < app_offset_) return ActionKind::Scroll;
  if (index < nullary_offset_) return ActionKind::OpenApp;
  constexpr std::array<ActionKind, 4> nullary = {ActionKind::Home, ActionKind::Back,
                                                  ActionKind::Wait, ActionKind::Finish};
  return nullary[static_cast<std::size_t>(index - nullary_offset_)];
}

GuiAction ActionSpace::decode(int index) const {
  const ActionKind kind = kind_of(index);
  const int cells = grid_ * grid_;
  switch (kind) {
    case ActionKind::Click:
    case ActionKind::LongPress: {
      const int local = kind == ActionKind::Click ? index : index - cells;
      const Point p = cell_center({local % grid_, local / grid_});
      return kind == ActionKind::Click ? GuiAction::click(p) : GuiAction::long_press(p);
    }
    case ActionKind::InputText: return GuiAction::input_text(index - text_offset_);
    case ActionKind::Scroll: return GuiAction::scroll(static_cast<Direction>(index - scroll_offset_));
    case ActionKind::OpenApp: return GuiAction::open_app(index - app_offset_);
    default: return GuiAction::nullary(kind);
  }
}

std::vector<double> combined_features(std::span<const double> observation,
                                      std::span<const double> instruction) {
  std::vector<double> out;
  out.reserve(observation.size() + instruction.size());
  out.insert(out.end(), observation.begin(), observation.end());
  out.insert(out.end(), instruction.begin(), instruction.end());
  return out;
}

}  // namespace cgl
