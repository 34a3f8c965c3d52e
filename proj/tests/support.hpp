#pragma once

#include <cstdint>
#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include "motionseg/types.hpp"

namespace testing {

inline motionseg::LabelMap labels(int w, int h, const std::vector<std::uint32_t>& raw) {
  motionseg::Grid<std::uint32_t> g(w, h, 0);
  for (std::size_t i = 0; i < raw.size(); ++i) g[i] = raw[i];
  return motionseg::LabelMap::from_raw(g);
}

inline motionseg::BinaryMask mask(int w, int h, const std::vector<int>& bits) {
  motionseg::BinaryMask m(w, h, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) m[i] = bits[i] ? 1 : 0;
  return m;
}

inline motionseg::FlowField uniform_flow(int w, int h, float u, float v) {
  motionseg::FlowField f(w, h);
  for (auto& x : f.u().values()) x = u;
  for (auto& x : f.v().values()) x = v;
  return f;
}

inline motionseg::FlowField random_flow(std::mt19937_64& rng, int w, int h, double scale = 5.0) {
  std::normal_distribution<double> n(0.0, scale);
  motionseg::FlowField f(w, h);
  for (auto& x : f.u().values()) x = static_cast<float>(n(rng));
  for (auto& x : f.v().values()) x = static_cast<float>(n(rng));
  return f;
}

inline motionseg::LabelMap random_labels(std::mt19937_64& rng, int w, int h, int max_id) {
  std::uniform_int_distribution<std::uint32_t> id(0, static_cast<std::uint32_t>(max_id));
  motionseg::Grid<std::uint32_t> g(w, h, 0);
  for (auto& x : g.values()) x = id(rng);
  return motionseg::LabelMap::from_raw(g);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("motionseg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
