#include "motionseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace motionseg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::BadConfig, "config key '" + key + "': expected a number, got '" + s + "'");
  }
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::BadConfig, "config key '" + key + "': expected an integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error(ErrorCode::BadConfig, "config key '" + key + "': expected true/false, got '" + s + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MS_DOUBLE(name, member)                                                              \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
          [](const RunConfig& c) { return fmt_double(c.member); }}}
#define MS_INT(name, member)                                                                 \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) {                     \
            c.member = to_int<decltype(c.member)>(k, v);                                     \
          },                                                                                 \
          [](const RunConfig& c) { return std::to_string(c.member); }}}
#define MS_BOOL(name, member)                                                                \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
          [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      MS_DOUBLE("tau_static", tau_static),
      MS_DOUBLE("patch_fraction", patch_fraction),
      MS_DOUBLE("tau_fg", pseudo.tau_fg),
      MS_DOUBLE("tau_grad", pseudo.tau_grad),
      MS_INT("min_component_px", pseudo.min_component_px),
      MS_INT("connectivity", pseudo.connectivity),
      {"gradient_operator",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "sobel") {
            c.pseudo.gradient = GradientOperator::Sobel;
          } else if (v == "central") {
            c.pseudo.gradient = GradientOperator::Central;
          } else {
            throw Error(ErrorCode::BadConfig, "config key '" + k + "': expected sobel or central");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.pseudo.gradient == GradientOperator::Sobel ? "sobel" : "central");
        }}},
      MS_INT("min_cluster_size", pseudo.clustering.min_cluster_size),
      MS_INT("min_samples", pseudo.clustering.min_samples),
      MS_BOOL("allow_single_cluster", pseudo.clustering.allow_single_cluster),
      MS_DOUBLE("magnitude_std_floor", pseudo.scaling.magnitude_std_floor),
      MS_DOUBLE("angle_std_floor", pseudo.scaling.angle_std_floor),
      MS_DOUBLE("spatial_weight", pseudo.scaling.spatial_weight),
      MS_DOUBLE("eps", loss.eps),
      MS_DOUBLE("r_bg", loss.r_bg),
      MS_DOUBLE("tau_drop", loss.tau_drop),
      MS_DOUBLE("stage1_lr", stage1_lr),
      MS_INT("stage1_epochs", stage1_epochs),
      MS_DOUBLE("stage2_lr", stage2_lr),
      MS_INT("stage2_epochs", stage2_epochs),
      MS_INT("batch_size", batch_size),
      MS_BOOL("drop_gating", drop_gating),
      MS_INT("mlp_layers", mlp_layers),
      MS_INT("mlp_hidden", mlp_hidden),
      MS_INT("slots", slots),
      MS_INT("slot_dim", slot_dim),
      MS_INT("fixture_count", fixture_count),
      MS_DOUBLE("fixture_separation", fixture_separation),
      MS_INT("fixture_width", fixture_width),
      MS_INT("fixture_height", fixture_height),
      MS_INT("seed", seed),
      MS_INT("jobs", jobs),
  };
  return table;
}

#undef MS_DOUBLE
#undef MS_INT
#undef MS_BOOL

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::BadConfig, what);
  };
  require(tau_static > 0.0, "tau_static must be > 0");
  require(patch_fraction > 0.0 && patch_fraction <= 0.5, "patch_fraction must be in (0, 0.5]");
  require(stage1_lr > 0.0 && stage2_lr > 0.0, "learning rates must be > 0");
  require(stage1_epochs >= 0 && stage2_epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(mlp_layers >= 1 && mlp_hidden >= 1, "mlp_layers and mlp_hidden must be >= 1");
  require(slots >= 2 && slot_dim >= 1, "slots must be >= 2 and slot_dim >= 1");
  require(fixture_count >= 1, "fixture_count must be >= 1");
  require(fixture_separation >= 0.0, "fixture_separation must be >= 0");
  require(fixture_width >= 16 && fixture_height >= 16, "fixture images must be at least 16x16");
  require(jobs >= 1, "jobs must be >= 1");
  try {
    pseudo.validate();
    loss.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::map<std::string, const Field*> by_name;
  for (const auto& [name, field] : fields()) by_name[name] = &field;

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
      throw Error(ErrorCode::BadConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const auto it = by_name.find(key);
    if (it == by_name.end()) throw Error(ErrorCode::BadConfig, "unknown config key '" + key + "'");
    it->second->set(base, key, trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), std::move(base));
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace motionseg
