#include "motionseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

namespace motionseg {
namespace {

struct Box {
  int x0, y0, x1, y1;  // half-open
  Box grown(int g) const { return {x0 - g, y0 - g, x1 + g, y1 + g}; }
  bool intersects(const Box& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  Box merged(const Box& o) const {
    return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
  }
};

Box box_of(const SceneObject& o) { return {o.x, o.y, o.x + o.w, o.y + o.h}; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double velocity_gap(const SceneObject& a, const SceneObject& b) {
  return std::hypot(a.vx - b.vx, a.vy - b.vy);
}

void random_velocity(std::mt19937_64& rng, double min_speed, double max_speed, SceneObject& o) {
  std::uniform_real_distribution<double> speed(min_speed, max_speed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  const double s = speed(rng);
  const double a = angle(rng);
  o.vx = s * std::cos(a);
  o.vy = s * std::sin(a);
}

std::vector<SceneObject> sample_objects(std::mt19937_64& rng, const MoverSceneOptions& opt) {
  std::uniform_int_distribution<int> mover_count(opt.min_movers, opt.max_movers);
  std::uniform_int_distribution<int> size(opt.min_size, opt.max_size);
  std::uniform_int_distribution<int> shape(0, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int restart = 0; restart < 200; ++restart) {
    const int n = mover_count(rng);
    std::uniform_int_distribution<int> pair_count(0, std::min(opt.max_overlapping_pairs, n / 2));
    const int pairs = pair_count(rng);
    std::vector<SceneObject> objects;
    std::vector<Box> groups;  // placement footprint of each independent group
    bool failed = false;
    int placed = 0;
    while (placed < n && !failed) {
      const bool paired = placed < 2 * pairs;
      bool ok = false;
      for (int attempt = 0; attempt < 400 && !ok; ++attempt) {
        SceneObject back;
        back.shape = shape(rng) ? Shape::Rect : Shape::Ellipse;
        back.w = size(rng);
        back.h = size(rng);
        std::uniform_int_distribution<int> px(1, opt.width - back.w - 1);
        std::uniform_int_distribution<int> py(1, opt.height - back.h - 1);
        back.x = px(rng);
        back.y = py(rng);
        back.depth = 2.0 * placed + 2.0;
        random_velocity(rng, opt.min_speed, opt.max_speed, back);
        std::vector<SceneObject> group{back};
        Box footprint = box_of(back);
        if (paired) {
          // Front object covers one corner of the back object.
          SceneObject front;
          front.shape = Shape::Rect;
          front.w = size(rng);
          front.h = size(rng);
          const int ox = static_cast<int>(std::round((0.3 + 0.3 * unit(rng)) * std::min(front.w, back.w)));
          const int oy = static_cast<int>(std::round((0.3 + 0.3 * unit(rng)) * std::min(front.h, back.h)));
          front.x = unit(rng) < 0.5 ? back.x - front.w + ox : back.x + back.w - ox;
          front.y = unit(rng) < 0.5 ? back.y - front.h + oy : back.y + back.h - oy;
          front.depth = back.depth - 1.0;
          bool gap_ok = false;
          for (int tries = 0; tries < 200 && !gap_ok; ++tries) {
            random_velocity(rng, opt.min_speed, opt.max_speed, front);
            gap_ok = velocity_gap(front, back) >= opt.min_overlap_velocity_gap;
          }
          if (!gap_ok) continue;
          const Box fb = box_of(front);
          if (fb.x0 < 1 || fb.y0 < 1 || fb.x1 > opt.width - 1 || fb.y1 > opt.height - 1) continue;
          group.push_back(front);
          footprint = footprint.merged(fb);
        }
        bool clear = true;
        for (const auto& g : groups) {
          if (g.grown(opt.separation_px).intersects(footprint)) clear = false;
        }
        if (!clear) continue;
        groups.push_back(footprint);
        for (auto& o : group) objects.push_back(o);
        placed += static_cast<int>(group.size());
        ok = true;
      }
      failed = !ok;
    }
    if (!failed) return objects;
  }
  throw Error(ErrorCode::InvalidArgument, "could not place movers; image too small for options");
}

}  // namespace

bool SceneObject::covers(int px, int py) const {
  if (px < x || py < y || px >= x + w || py >= y + h) return false;
  if (shape == Shape::Rect) return true;
  const double cx = x + 0.5 * w;
  const double cy = y + 0.5 * h;
  const double dx = (px + 0.5 - cx) / (0.5 * w);
  const double dy = (py + 0.5 - cy) / (0.5 * h);
  return dx * dx + dy * dy <= 1.0;
}

double SceneObject::speed() const { return std::hypot(vx, vy); }

void SceneSpec::validate() const {
  if (width < 2 || height < 2) throw Error(ErrorCode::InvalidArgument, "scene must be at least 2x2");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  for (const auto& o : objects) {
    if (o.w < 1 || o.h < 1 || o.x < 0 || o.y < 0 || o.x + o.w > width || o.y + o.h > height) {
      throw Error(ErrorCode::InvalidArgument, "scene object out of bounds");
    }
  }
}

RenderedScene render(const SceneSpec& spec) {
  spec.validate();
  RenderedScene out;
  out.flow = FlowField(spec.width, spec.height);
  Grid<std::uint32_t> raw(spec.width, spec.height, 0);
  for (auto& u : out.flow.u().values()) u = static_cast<float>(spec.camera_u);
  for (auto& v : out.flow.v().values()) v = static_cast<float>(spec.camera_v);

  std::vector<int> order(spec.objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return spec.objects[static_cast<std::size_t>(a)].depth > spec.objects[static_cast<std::size_t>(b)].depth;
  });
  for (int idx : order) {
    const auto& o = spec.objects[static_cast<std::size_t>(idx)];
    for (int y = o.y; y < o.y + o.h; ++y) {
      for (int x = o.x; x < o.x + o.w; ++x) {
        if (!o.covers(x, y)) continue;
        out.flow.u()(x, y) = static_cast<float>(o.vx + spec.camera_u);
        out.flow.v()(x, y) = static_cast<float>(o.vy + spec.camera_v);
        raw(x, y) = static_cast<std::uint32_t>(idx + 1);
      }
    }
  }
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t i = 0; i < out.flow.u().size(); ++i) {
      out.flow.u()[i] = static_cast<float>(out.flow.u()[i] + noise(rng));
      out.flow.v()[i] = static_cast<float>(out.flow.v()[i] + noise(rng));
    }
  }
  out.gt = LabelMap::from_raw(raw);
  out.gt_fg = out.gt.foreground();
  out.gt_object.assign(static_cast<std::size_t>(out.gt.instance_count()), -1);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] > 0) out.gt_object[static_cast<std::size_t>(out.gt[i] - 1)] = static_cast<int>(raw[i]) - 1;
  }
  return out;
}

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::BadConfig, "scene line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::istringstream vs(value);
    auto fail = [&]() {
      throw Error(ErrorCode::BadConfig, "scene line " + std::to_string(line_no) + ": bad value for " + key);
    };
    if (key == "object") {
      SceneObject o;
      std::string shape;
      if (!(vs >> shape >> o.x >> o.y >> o.w >> o.h >> o.vx >> o.vy >> o.depth)) fail();
      if (shape == "rect") {
        o.shape = Shape::Rect;
      } else if (shape == "ellipse") {
        o.shape = Shape::Ellipse;
      } else {
        fail();
      }
      spec.objects.push_back(o);
    } else if (key == "width") {
      if (!(vs >> spec.width)) fail();
    } else if (key == "height") {
      if (!(vs >> spec.height)) fail();
    } else if (key == "camera_u") {
      if (!(vs >> spec.camera_u)) fail();
    } else if (key == "camera_v") {
      if (!(vs >> spec.camera_v)) fail();
    } else if (key == "noise_sigma") {
      if (!(vs >> spec.noise_sigma)) fail();
    } else if (key == "seed") {
      if (!(vs >> spec.seed)) fail();
    } else {
      throw Error(ErrorCode::BadConfig, "unknown scene key '" + key + "'");
    }
    std::string rest;
    if (vs >> rest) fail();
  }
  spec.validate();
  return spec;
}

std::string format_scene_spec(const SceneSpec& spec) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "width = " << spec.width << "\n"
      << "height = " << spec.height << "\n"
      << "camera_u = " << spec.camera_u << "\n"
      << "camera_v = " << spec.camera_v << "\n"
      << "noise_sigma = " << spec.noise_sigma << "\n"
      << "seed = " << spec.seed << "\n";
  for (const auto& o : spec.objects) {
    out << "object = " << (o.shape == Shape::Rect ? "rect" : "ellipse") << ' ' << o.x << ' ' << o.y
        << ' ' << o.w << ' ' << o.h << ' ' << o.vx << ' ' << o.vy << ' ' << o.depth << "\n";
  }
  return out.str();
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scene spec " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene_spec(buffer.str());
}

SceneSpec sample_mover_scene(std::mt19937_64& rng, const MoverSceneOptions& options) {
  SceneSpec spec;
  spec.width = options.width;
  spec.height = options.height;
  spec.noise_sigma = options.noise_sigma;
  spec.objects = sample_objects(rng, options);
  spec.seed = rng();
  return spec;
}

SceneSpec sample_panning_scene(std::mt19937_64& rng, const MoverSceneOptions& options,
                               double min_pan, double max_pan) {
  auto spec = sample_mover_scene(rng, options);
  std::uniform_real_distribution<double> speed(min_pan, max_pan);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  const double s = speed(rng);
  const double a = angle(rng);
  spec.camera_u = s * std::cos(a);
  spec.camera_v = s * std::sin(a);
  return spec;
}

SlotFixture make_slot_fixture(const SceneSpec& spec, const SlotFixtureOptions& options) {
  const auto scene = render(spec);
  const int objects = scene.gt.instance_count();
  const int k = options.slots;
  if (k < objects + 1) {
    throw Error(ErrorCode::InvalidArgument, "need at least one background slot beyond the objects");
  }
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Random slot positions for the objects.
  std::vector<int> slot_order(static_cast<std::size_t>(k));
  std::iota(slot_order.begin(), slot_order.end(), 0);
  std::shuffle(slot_order.begin(), slot_order.end(), rng);

  SlotFixture fx;
  fx.gt = scene.gt;
  fx.slot_is_object.assign(static_cast<std::size_t>(k), 0);
  fx.slot_gt_label.assign(static_cast<std::size_t>(k), 0);
  fx.duplicate_of.assign(static_cast<std::size_t>(k), -1);
  std::vector<int> label_slot(static_cast<std::size_t>(objects + 1), -1);
  for (int l = 1; l <= objects; ++l) {
    const int s = slot_order[static_cast<std::size_t>(l - 1)];
    label_slot[static_cast<std::size_t>(l)] = s;
    fx.slot_is_object[static_cast<std::size_t>(s)] = 1;
    fx.slot_gt_label[static_cast<std::size_t>(s)] = l;
  }
  std::vector<int> bg_slots(slot_order.begin() + objects, slot_order.end());
  std::sort(bg_slots.begin(), bg_slots.end());

  // Background Voronoi seeds.
  std::vector<std::pair<double, double>> seeds;
  for (std::size_t b = 0; b < bg_slots.size(); ++b) {
    seeds.emplace_back(unit(rng) * spec.width, unit(rng) * spec.height);
  }

  SlotMasks alpha(static_cast<std::size_t>(k), Grid<double>(spec.width, spec.height, 0.0));
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      int owner = -1;
      const int label = scene.gt(x, y);
      if (label > 0) {
        owner = label_slot[static_cast<std::size_t>(label)];
      } else {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < seeds.size(); ++b) {
          const double d = std::hypot(x + 0.5 - seeds[b].first, y + 0.5 - seeds[b].second);
          if (d < best) {
            best = d;
            owner = bg_slots[b];
          }
        }
      }
      for (int s = 0; s < k; ++s) {
        alpha[static_cast<std::size_t>(s)](x, y) =
            (s == owner ? options.logit_gain : 0.0) + options.logit_noise * gauss(rng);
      }
    }
  }

  std::mt19937_64 direction_rng(options.direction_seed);
  Eigen::VectorXd direction(options.slot_dim);
  for (int j = 0; j < options.slot_dim; ++j) direction(j) = gauss(direction_rng);
  direction.normalize();
  const Eigen::VectorXd mu_fg = 0.5 * options.separation * options.sigma * direction;
  const Eigen::VectorXd mu_bg = -mu_fg;
  Eigen::MatrixXd z(k, options.slot_dim);
  for (int s = 0; s < k; ++s) {
    const Eigen::VectorXd& mu = fx.slot_is_object[static_cast<std::size_t>(s)] ? mu_fg : mu_bg;
    for (int j = 0; j < options.slot_dim; ++j) z(s, j) = mu(j) + options.sigma * gauss(rng);
  }

  // Static objects copy a mover's representation.
  std::vector<int> mover_slots;
  for (int l = 1; l <= objects; ++l) {
    const auto& obj = spec.objects[static_cast<std::size_t>(scene.gt_object[static_cast<std::size_t>(l - 1)])];
    if (obj.speed() >= options.static_speed) mover_slots.push_back(label_slot[static_cast<std::size_t>(l)]);
  }
  std::size_t next_mover = 0;
  for (int l = 1; l <= objects && !mover_slots.empty(); ++l) {
    const auto& obj = spec.objects[static_cast<std::size_t>(scene.gt_object[static_cast<std::size_t>(l - 1)])];
    if (obj.speed() >= options.static_speed) continue;
    const int s = label_slot[static_cast<std::size_t>(l)];
    const int src = mover_slots[next_mover++ % mover_slots.size()];
    z.row(s) = z.row(src);
    fx.duplicate_of[static_cast<std::size_t>(s)] = src;
  }

  fx.slots = SlotSet::from_logits(std::move(z), std::move(alpha));
  return fx;
}

}  // namespace motionseg
