#include <doctest.h>

#include <deque>

#include "motionseg/metrics.hpp"
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

// Reference flood fill: partition as a set of pixel groups keyed by the
// smallest pixel index.
std::vector<int> flood_partition(const BinaryMask& m, int connectivity) {
  std::vector<int> owner(m.size(), -1);
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (!m[start] || owner[start] >= 0) continue;
    std::deque<std::size_t> q{start};
    owner[start] = static_cast<int>(start);
    while (!q.empty()) {
      const auto i = q.front();
      q.pop_front();
      const int x = static_cast<int>(i) % m.width();
      const int y = static_cast<int>(i) / m.width();
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || (connectivity == 4 && dx != 0 && dy != 0)) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (!m.contains(nx, ny)) continue;
          const auto j = m.index(nx, ny);
          if (m[j] && owner[j] < 0) {
            owner[j] = static_cast<int>(start);
            q.push_back(j);
          }
        }
      }
    }
  }
  return owner;
}

double best_iou(const LabelMap& pred, const BinaryMask& gt) {
  double best = 0.0;
  for (const auto& m : pred.masks()) best = std::max(best, iou(m, gt));
  return best;
}

}  // namespace

TEST_CASE("foreground mask thresholds magnitude") {
  CHECK(count(foreground_mask(testing::uniform_flow(8, 8, 0, 0), 2.5)) == 0);
  CHECK(count(foreground_mask(testing::uniform_flow(8, 8, 3, 4), 2.5)) == 64);
  SceneSpec spec;
  spec.width = 40;
  spec.height = 30;
  spec.objects.push_back(rect(5, 6, 10, 8, 4, 0));
  const auto scene = render(spec);
  CHECK(foreground_mask(scene.flow, kDefaultTauFg) == scene.gt_fg);
  CHECK(kDefaultTauFg == 2.5);
  CHECK(kDefaultTauGrad == 20.0);
}

TEST_CASE("connected components") {
  auto two = testing::mask(6, 3, {1, 1, 0, 0, 1, 1,  //
                                  1, 1, 0, 0, 1, 1,  //
                                  0, 0, 0, 0, 0, 0});
  const auto cc = connected_components(two, 8);
  CHECK(cc.instance_count() == 2);
  CHECK(cc(0, 0) == 1);
  CHECK(cc(5, 1) == 2);

  const auto diag = testing::mask(2, 2, {1, 0, 0, 1});
  CHECK(connected_components(diag, 8).instance_count() == 1);
  CHECK(connected_components(diag, 4).instance_count() == 2);

  CHECK(connected_components(two, 8, 5).instance_count() == 0);
  CHECK(connected_components(two, 8, 4).instance_count() == 2);
}

TEST_CASE("connected components match a flood-fill oracle") {
  std::mt19937_64 rng(17);
  std::bernoulli_distribution bit(0.45);
  for (int t = 0; t < 50; ++t) {
    BinaryMask m(12 + t % 5, 9 + t % 3, 0);
    for (auto& v : m.values()) v = bit(rng) ? 1 : 0;
    for (int conn : {4, 8}) {
      const auto cc = connected_components(m, conn);
      const auto oracle = flood_partition(m, conn);
      for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = i + 1; j < m.size(); ++j) {
          if (!m[i] || !m[j]) continue;
          REQUIRE((cc[i] == cc[j]) == (oracle[i] == oracle[j]));
        }
        CHECK((cc[i] > 0) == static_cast<bool>(m[i]));
      }
    }
  }
}

TEST_CASE("erosion empties thin components") {
  const auto thin = testing::mask(5, 2, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  CHECK(count(erode(thin)) == 0);
  BinaryMask block(5, 5, 1);
  const auto e = erode(block);
  CHECK(count(e) == 9);
  CHECK(e(2, 2) == 1);
  CHECK(e(0, 2) == 0);
}

TEST_CASE("needs_split") {
  BinaryMask all(20, 10, 1);
  CHECK_FALSE(needs_split(testing::uniform_flow(20, 10, 7, 3), all, 20.0));

  // Two rigid translations (0,0) and (30,0) abutting at x = 10.
  auto f = testing::uniform_flow(20, 10, 0, 0);
  for (int y = 0; y < 10; ++y) {
    for (int x = 10; x < 20; ++x) f.u()(x, y) = 30.0f;
  }
  CHECK(needs_split(f, all, 20.0, GradientOperator::Sobel));
  // Central differences see a 30 px step as 15.
  const auto central = flow_gradient_norm(f, GradientOperator::Central);
  CHECK(central(10, 5) == doctest::Approx(15.0));
  CHECK_FALSE(needs_split(f, all, 20.0, GradientOperator::Central));
  const auto sobel = flow_gradient_norm(f, GradientOperator::Sobel);
  CHECK(sobel(10, 5) == doctest::Approx(120.0));

  // Width-2 component has no interior.
  BinaryMask strip(20, 10, 0);
  for (int y = 0; y < 10; ++y) {
    strip(9, y) = 1;
    strip(10, y) = 1;
  }
  CHECK_FALSE(needs_split(f, strip, 20.0));
}

TEST_CASE("split_component separates opposite motions") {
  SceneSpec spec;
  spec.width = 48;
  spec.height = 24;
  spec.objects.push_back(rect(4, 4, 20, 16, 10, 0));
  spec.objects.push_back(rect(24, 4, 20, 16, -10, 0));
  const auto scene = render(spec);
  const auto comp = foreground_mask(scene.flow, 2.5);
  const auto split = split_component(scene.flow, comp, HdbscanParams{});
  REQUIRE(split.instance_count() == 2);
  for (const auto& gt : scene.gt.masks()) CHECK(best_iou(split, gt) >= 0.9);
}

TEST_CASE("split_component keeps rigid or tiny components whole") {
  SceneSpec spec;
  spec.width = 40;
  spec.height = 40;
  spec.objects.push_back(rect(5, 5, 25, 25, 6, 2));
  const auto scene = render(spec);
  const auto comp = foreground_mask(scene.flow, 2.5);
  CHECK(split_component(scene.flow, comp, HdbscanParams{}).instance_count() == 1);

  BinaryMask tiny(40, 40, 0);
  for (int i = 0; i < 10; ++i) tiny(5 + i, 5) = 1;
  const auto one = split_component(scene.flow, tiny, HdbscanParams{});
  CHECK(one.instance_count() == 1);
  CHECK(count(one.foreground()) == 10);
}

TEST_CASE("generate_pseudo_label on synthetic scenes") {
  PseudoLabelConfig cfg;
  SceneSpec still;
  CHECK(generate_pseudo_label(render(still).flow, cfg).instances.instance_count() == 0);

  SceneSpec three;
  three.objects.push_back(rect(5, 5, 18, 18, 6, 0));
  three.objects.push_back(rect(50, 8, 20, 16, 0, -8));
  three.objects.push_back(rect(20, 60, 24, 20, -5, 5));
  auto scene = render(three);
  auto label = generate_pseudo_label(scene.flow, cfg, "three");
  CHECK(label.source_frame == "three");
  REQUIRE(label.instances.instance_count() == 3);
  for (const auto& gt : scene.gt.masks()) CHECK(best_iou(label.instances, gt) >= 0.9);
  CHECK(label.fg == label.instances.foreground());

  SceneSpec overlap;
  overlap.objects.push_back(rect(20, 20, 24, 22, 12, 0, 2.0));
  overlap.objects.push_back(rect(36, 30, 22, 20, -8, 6, 1.0));
  scene = render(overlap);
  label = generate_pseudo_label(scene.flow, cfg);
  CHECK(connected_components(scene.gt_fg, 8).instance_count() == 1);
  REQUIRE(label.instances.instance_count() == 2);
  for (const auto& gt : scene.gt.masks()) CHECK(best_iou(label.instances, gt) >= 0.9);
}

TEST_CASE("noise-free scenes recover every object") {
  std::mt19937_64 rng(23);
  MoverSceneOptions opts;
  opts.noise_sigma = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto scene = render(sample_mover_scene(rng, opts));
    const auto label = generate_pseudo_label(scene.flow, PseudoLabelConfig{});
    CHECK(label.instances.instance_count() == scene.gt.instance_count());
    for (const auto& gt : scene.gt.masks()) CHECK(best_iou(label.instances, gt) >= 0.9);
  }
}

TEST_CASE("config validation") {
  PseudoLabelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.connectivity = 6;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.tau_fg = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
