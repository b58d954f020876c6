#include <doctest.h>

#include <cmath>
#include <set>

#include "cgl/core.hpp"
#include "cgl/error.hpp"
#include "cgl/rng.hpp"

using namespace cgl;

TEST_SUITE("core") {

TEST_CASE("index space size") {
  CHECK(ActionSpace(16, 32, 8).size() == 2 * 256 + 32 + 4 + 8 + 4);
  CHECK(ActionSpace(16, 32, 8).size() == 560);
  CHECK(ActionSpace(1, 0, 0).size() == 10);
  CHECK(ActionSpace(16, 32, 21).size() == 573);
}

TEST_CASE("segments tile the index space in order") {
  const ActionSpace space(4, 5, 3);
  int next = 0;
  for (const IndexSegment& s : space.segments()) {
    CHECK(s.offset == next);
    CHECK(s.count >= 1);
    next += s.count;
  }
  CHECK(next == space.size());
}

TEST_CASE("decode then encode is the identity") {
  for (const ActionSpace& space : {ActionSpace(16, 32, 8), ActionSpace(1, 0, 0), ActionSpace(3, 2, 5)}) {
    for (int i = 0; i < space.size(); ++i) {
      const GuiAction a = space.decode(i);
      CHECK(a.valid());
      CHECK(space.encode(a) == i);
      CHECK(space.kind_of(i) == a.kind);
      CHECK(space.decode(space.encode(a)) == a);
    }
    CHECK_THROWS_AS(space.decode(space.size()), InputError);
    CHECK_THROWS_AS(space.decode(-1), InputError);
  }
}

TEST_CASE("discretize") {
  const ActionSpace space(16, 32, 8);
  CHECK(space.discretize({0.0, 0.0}) == Cell{0, 0});
  CHECK(space.discretize({1.0, 1.0}) == Cell{15, 15});
  CHECK(space.discretize({0.507, 0.089}) == Cell{8, 1});
  CHECK_THROWS_AS(space.discretize({-0.01, 0.5}), InputError);
  CHECK_THROWS_AS(space.discretize({0.5, 1.0001}), InputError);
}

TEST_CASE("cell centers") {
  CHECK(ActionSpace(2, 1, 1).cell_center({0, 0}) == Point{0.25, 0.25});
  const Point p = ActionSpace(16, 1, 1).cell_center({8, 1});
  CHECK(p.x == doctest::Approx(0.53125).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(0.09375).epsilon(1e-15));
  for (int R = 1; R <= 64; ++R) {
    const ActionSpace space(R, 1, 1);
    const Point c = space.cell_center({R - 1, R - 1});
    CHECK(c.x < 1.0);
    CHECK(c.y < 1.0);
    CHECK(space.discretize(c) == Cell{R - 1, R - 1});
  }
}

TEST_CASE("off-grid clicks encode to their cell") {
  const ActionSpace space(16, 4, 2);
  const int i = space.encode(GuiAction::click({0.507, 0.089}));
  CHECK(i == space.spatial_index(ActionKind::Click, {8, 1}));
  CHECK(space.decode(i) == GuiAction::click({0.53125, 0.09375}));
}

TEST_CASE("encode rejects out-of-space arguments") {
  const ActionSpace space(4, 3, 2);
  CHECK_THROWS_AS(space.encode(GuiAction::input_text(3)), InputError);
  CHECK_THROWS_AS(space.encode(GuiAction::open_app(2)), InputError);
  CHECK_THROWS_AS(space.encode(GuiAction{ActionKind::Click, {}, {}, {}, {}}), InputError);
  CHECK_THROWS_AS(GuiAction::nullary(ActionKind::Click), InputError);
}

TEST_CASE("action classes") {
  CHECK(action_class(ActionKind::Home) == ActionClass::NavState);
  CHECK(action_class(ActionKind::Back) == ActionClass::NavState);
  CHECK(action_class(ActionKind::Wait) == ActionClass::NavState);
  CHECK(action_class(ActionKind::Finish) == ActionClass::NavState);
  CHECK(action_class(ActionKind::Scroll) == ActionClass::Parameterized);
  CHECK(action_class(ActionKind::InputText) == ActionClass::Parameterized);
  CHECK(action_class(ActionKind::OpenApp) == ActionClass::Parameterized);
  CHECK(action_class(ActionKind::Click) == ActionClass::Spatial);
  CHECK(action_class(ActionKind::LongPress) == ActionClass::Spatial);
}

TEST_CASE("kind and direction names round-trip") {
  for (ActionKind k : kAllActionKinds) CHECK(parse_action_kind(to_string(k)) == k);
  for (Direction d : {Direction::Up, Direction::Down, Direction::Left, Direction::Right}) {
    CHECK(parse_direction(to_string(d)) == d);
  }
  CHECK_FALSE(parse_action_kind("swipe").has_value());
}

TEST_CASE("bounding box containment is closed") {
  const BoundingBox b{0.4, 0.1, 0.6, 0.2};
  CHECK(b.contains({0.4, 0.1}));
  CHECK(b.contains({0.6, 0.2}));
  CHECK(b.contains({0.5, 0.15}));
  CHECK_FALSE(b.contains({0.6000001, 0.15}));
}

}  // TEST_SUITE

TEST_SUITE("rng") {

TEST_CASE("same address, same sequence") {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(42, 8);
  RngStream d(42, 7);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += c.next_u64() == d.next_u64();
  CHECK(equal == 0);
}

TEST_CASE("split ignores the parent's draw count") {
  RngStream a(1, 2);
  const RngStream before = a.split(5);
  for (int i = 0; i < 17; ++i) a.uniform();
  RngStream x = before;
  RngStream y = a.split(5);
  for (int i = 0; i < 100; ++i) CHECK(x.next_u64() == y.next_u64());
}

TEST_CASE("uniform index frequencies") {
  RngStream rng(3, 1);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_index(10)];
  for (int c : counts) CHECK(std::abs(c / double(n) - 0.1) < 0.01);
}

TEST_CASE("normal moments") {
  RngStream rng(9, 9);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("uniform stays in [0,1)") {
  RngStream rng(0, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

}  // TEST_SUITE
