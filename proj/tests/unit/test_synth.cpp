#include <doctest.h>

#include "motionseg/pseudo_label.hpp"
#include "motionseg/synth.hpp"
#include "support.hpp"

using namespace motionseg;

namespace {

SceneObject rect(int x, int y, int w, int h, double vx, double vy, double depth = 0.0) {
  SceneObject o;
  o.x = x;
  o.y = y;
  o.w = w;
  o.h = h;
  o.vx = vx;
  o.vy = vy;
  o.depth = depth;
  return o;
}

}  // namespace

TEST_CASE("render trivial scenes") {
  SceneSpec empty;
  empty.width = 10;
  empty.height = 8;
  const auto e = render(empty);
  CHECK(e.gt.instance_count() == 0);
  for (float v : e.flow.u().values()) CHECK(v == 0.0f);

  SceneSpec one = empty;
  one.objects.push_back(rect(2, 3, 4, 2, 5, 0));
  const auto r = render(one);
  CHECK(r.gt.instance_count() == 1);
  CHECK(count(r.gt_fg) == 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 10; ++x) {
      const bool inside = x >= 2 && x < 6 && y >= 3 && y < 5;
      CHECK(r.flow.u()(x, y) == (inside ? 5.0f : 0.0f));
      CHECK(static_cast<bool>(r.gt_fg(x, y)) == inside);
    }
  }
}

TEST_CASE("nearer objects paint over farther ones") {
  SceneSpec s;
  s.width = 30;
  s.height = 20;
  s.camera_u = 1.0;
  s.objects.push_back(rect(10, 5, 10, 10, -8, 0, 1.0));  // near
  s.objects.push_back(rect(2, 5, 12, 10, 8, 0, 5.0));    // far
  const auto r = render(s);
  CHECK(r.flow.u()(12, 8) == -7.0f);
  CHECK(r.flow.u()(4, 8) == 9.0f);
  CHECK(r.flow.u()(25, 2) == 1.0f);
  CHECK(r.gt.instance_count() == 2);
  // First-occurrence labels: the far object appears first in raster order.
  CHECK(r.gt_object[static_cast<std::size_t>(r.gt(4, 8) - 1)] == 1);
  CHECK(connected_components(r.gt_fg, 8).instance_count() == 1);
}

TEST_CASE("ellipse membership uses pixel centres") {
  SceneObject e;
  e.shape = Shape::Ellipse;
  e.x = 0;
  e.y = 0;
  e.w = 4;
  e.h = 4;
  CHECK(e.covers(1, 1));
  CHECK_FALSE(e.covers(0, 0));
  CHECK(e.covers(0, 1));
}

TEST_CASE("noise is seeded") {
  SceneSpec s;
  s.noise_sigma = 0.2;
  s.seed = 4;
  CHECK(render(s).flow == render(s).flow);
  auto t = s;
  t.seed = 5;
  CHECK_FALSE(render(s).flow == render(t).flow);
}

TEST_CASE("scene spec text round trip") {
  SceneSpec s;
  s.width = 50;
  s.height = 40;
  s.camera_u = 0.1;
  s.camera_v = -1.0 / 3.0;
  s.noise_sigma = 0.2;
  s.seed = 99;
  s.objects.push_back(rect(1, 2, 10, 12, 3.25, -7.0 / 9.0, 2.0));
  s.objects.back().shape = Shape::Ellipse;
  const auto back = parse_scene_spec(format_scene_spec(s));
  CHECK(format_scene_spec(back) == format_scene_spec(s));
  CHECK(back.camera_v == s.camera_v);
  CHECK(back.objects[0].vy == s.objects[0].vy);
  CHECK(back.objects[0].shape == Shape::Ellipse);
  CHECK_THROWS_AS(parse_scene_spec("colour = red\n"), Error);
  CHECK_THROWS_AS(parse_scene_spec("object = rect 1 2\n"), Error);
  CHECK_THROWS_AS(parse_scene_spec("width = 10\nobject = rect 5 5 10 10 0 0 0\n"), Error);
}

TEST_CASE("sampled mover scenes respect their options") {
  std::mt19937_64 rng(42);
  MoverSceneOptions opts;
  int overlapping = 0;
  for (int t = 0; t < 100; ++t) {
    const auto spec = sample_mover_scene(rng, opts);
    REQUIRE_NOTHROW(spec.validate());
    CHECK(spec.objects.size() >= 1);
    CHECK(spec.objects.size() <= 4);
    for (const auto& o : spec.objects) {
      CHECK(o.speed() >= 4.0 - 1e-9);
      CHECK(o.speed() <= 15.0 + 1e-9);
    }
    const auto r = render(spec);
    CHECK(r.gt.instance_count() == static_cast<int>(spec.objects.size()));
    const int merged = r.gt.instance_count() - connected_components(r.gt_fg, 8).instance_count();
    CHECK(merged <= 2);
    overlapping += merged;
  }
  CHECK(overlapping > 0);
  const auto pan = sample_panning_scene(rng, opts, 2.0, 10.0);
  const double speed = std::hypot(pan.camera_u, pan.camera_v);
  CHECK(speed >= 2.0);
  CHECK(speed <= 10.0);
}

TEST_CASE("slot fixture") {
  SceneSpec s;
  s.width = 32;
  s.height = 32;
  s.objects.push_back(rect(2, 2, 10, 10, 5, 0));
  s.objects.push_back(rect(18, 18, 10, 10, 0, 0));  // static
  SlotFixtureOptions o;
  o.slots = 8;
  o.slot_dim = 4;
  o.seed = 3;
  const auto fx = make_slot_fixture(s, o);
  CHECK(fx.slots.slot_count() == 8);
  CHECK(partition_error(fx.slots.masks) < 1e-9);
  int objects = 0;
  int duplicates = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    objects += fx.slot_is_object[k];
    if (fx.duplicate_of[k] >= 0) {
      ++duplicates;
      CHECK(fx.slots.z.row(static_cast<Eigen::Index>(k)) == fx.slots.z.row(fx.duplicate_of[k]));
    }
  }
  CHECK(objects == 2);
  CHECK(duplicates == 1);
  CHECK_THROWS_AS(make_slot_fixture(s, SlotFixtureOptions{2}), Error);
}
