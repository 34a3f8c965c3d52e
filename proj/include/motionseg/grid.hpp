#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "motionseg/error.hpp"

namespace motionseg {

// Row-major H×W array. Index with (x, y) where x is the column.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool same_shape(int w, int h) const noexcept { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return other.width() == width_ && other.height() == height_;
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static long long checked_area(int width, int height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::InvalidArgument, "negative grid dimensions");
    }
    return static_cast<long long>(width) * height;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <typename T, typename U>
void require_same_shape(const Grid<T>& a, const Grid<U>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch, what);
  }
}

}  // namespace motionseg
