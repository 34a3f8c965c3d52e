#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "motionseg/slot_model.hpp"
#include "motionseg/types.hpp"

namespace motionseg {

enum class Shape { Rect, Ellipse };

// Axis-aligned box [x, x+w) × [y, y+h) in pixels; ellipses are inscribed
// in it. Larger depth = farther away; nearer objects are painted last.
struct SceneObject {
  Shape shape = Shape::Rect;
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  double vx = 0.0;
  double vy = 0.0;
  double depth = 0.0;

  bool covers(int px, int py) const;
  double speed() const;
};

struct SceneSpec {
  int width = 96;
  int height = 96;
  std::vector<SceneObject> objects;
  double camera_u = 0.0;
  double camera_v = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RenderedScene {
  FlowField flow;
  LabelMap gt;        // visible objects, painter's order
  BinaryMask gt_fg;
  // gt label (1-based) -> index into SceneSpec::objects
  std::vector<int> gt_object;
};

// Camera flow everywhere, object velocity + camera on object pixels,
// i.i.d. Gaussian noise per component (seeded by spec.seed).
RenderedScene render(const SceneSpec& spec);

// Flat text: `key = value` lines (width, height, camera_u, camera_v,
// noise_sigma, seed) plus one `object = <rect|ellipse> x y w h vx vy depth`
// line per object. '#' starts a comment.
SceneSpec parse_scene_spec(const std::string& text);
std::string format_scene_spec(const SceneSpec& spec);
SceneSpec load_scene_spec(const std::filesystem::path& path);

struct MoverSceneOptions {
  int width = 96;
  int height = 96;
  int min_movers = 1;
  int max_movers = 4;
  double min_speed = 4.0;
  double max_speed = 15.0;
  int max_overlapping_pairs = 2;
  double min_overlap_velocity_gap = 16.0;
  int min_size = 14;
  int max_size = 26;
  double noise_sigma = 0.2;
  int separation_px = 3;  // gap between objects that must not touch
};

// Static-camera scene with movers; overlapping pairs get velocities at
// least min_overlap_velocity_gap apart, every other pair is kept
// separation_px apart.
SceneSpec sample_mover_scene(std::mt19937_64& rng, const MoverSceneOptions& options);

// Same movers plus uniform camera motion with speed in [min_pan, max_pan].
SceneSpec sample_panning_scene(std::mt19937_64& rng, const MoverSceneOptions& options,
                               double min_pan, double max_pan);

struct SlotFixtureOptions {
  int slots = 60;
  int slot_dim = 32;
  double separation = 6.0;  // distance between fg/bg cluster centres, in sigma
  double sigma = 1.0;
  double logit_gain = 8.0;
  double logit_noise = 0.1;
  // Objects with speed below this are static: they get an object slot whose
  // z copies the slot of a moving object (round-robin), so they look
  // identical to a mover but never appear in flow pseudo-labels.
  double static_speed = 1e-9;
  std::uint64_t seed = 0;
  // Fixtures that share this seed share the fg/bg cluster centres.
  std::uint64_t direction_seed = 0;
};

struct SlotFixture {
  SlotSet slots;
  std::vector<char> slot_is_object;  // ground truth fg/bg per slot
  std::vector<int> slot_gt_label;    // gt label owned by the slot, 0 for background
  std::vector<int> duplicate_of;     // matched-mover slot a static slot copies, else -1
  LabelMap gt;                       // all visible objects
};

// One slot per visible object (alpha high inside it); the remaining slots
// tile the background as a Voronoi partition of random seeds.
SlotFixture make_slot_fixture(const SceneSpec& spec, const SlotFixtureOptions& options);

}  // namespace motionseg
