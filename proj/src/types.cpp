#include "motionseg/types.hpp"

#include <cmath>
#include <unordered_map>

namespace motionseg {

FlowField::FlowField(int width, int height)
    : u_(width, height, 0.0f), v_(width, height, 0.0f) {}

FlowField::FlowField(Grid<float> u, Grid<float> v) : u_(std::move(u)), v_(std::move(v)) {
  require_same_shape(u_, v_, "flow u/v planes differ in size");
}

FlowField FlowField::from_planar(std::span<const float> data, int width, int height) {
  const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (width < 1 || height < 1 || data.size() != 2 * plane) {
    throw Error(ErrorCode::DimensionMismatch, "planar buffer must hold 2*H*W floats");
  }
  FlowField field(width, height);
  for (std::size_t i = 0; i < plane; ++i) {
    field.u_[i] = data[i];
    field.v_[i] = data[plane + i];
  }
  if (!field.all_finite()) {
    throw Error(ErrorCode::NonFinite, "flow buffer contains NaN or Inf");
  }
  return field;
}

std::vector<float> FlowField::to_planar() const {
  std::vector<float> out(u_.size() * 2);
  for (std::size_t i = 0; i < u_.size(); ++i) {
    out[i] = u_[i];
    out[u_.size() + i] = v_[i];
  }
  return out;
}

double FlowField::magnitude(int x, int y) const {
  return std::hypot(static_cast<double>(u_(x, y)), static_cast<double>(v_(x, y)));
}

bool FlowField::all_finite() const {
  for (std::size_t i = 0; i < u_.size(); ++i) {
    if (!std::isfinite(u_[i]) || !std::isfinite(v_[i])) return false;
  }
  return true;
}

std::size_t count(const BinaryMask& mask) {
  std::size_t n = 0;
  for (auto b : mask.values()) n += b ? 1 : 0;
  return n;
}

LabelMap LabelMap::from_raw(const Grid<std::uint32_t>& raw) {
  LabelMap out(raw.width(), raw.height());
  std::unordered_map<std::uint32_t, int> remap;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto id = raw[i];
    if (id == 0) continue;
    auto [it, inserted] = remap.try_emplace(id, static_cast<int>(remap.size()) + 1);
    out.labels_[i] = it->second;
  }
  out.count_ = static_cast<int>(remap.size());
  return out;
}

LabelMap LabelMap::from_masks(std::span<const BinaryMask> masks, int width, int height) {
  Grid<std::uint32_t> raw(width, height, 0);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    if (!masks[k].same_shape(width, height)) {
      throw Error(ErrorCode::DimensionMismatch, "instance mask size differs from label map");
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (!masks[k][i]) continue;
      if (raw[i] != 0) {
        throw Error(ErrorCode::InvalidArgument, "instance masks overlap");
      }
      raw[i] = static_cast<std::uint32_t>(k + 1);
    }
  }
  return from_raw(raw);
}

BinaryMask LabelMap::mask(int id) const {
  BinaryMask out(width(), height(), 0);
  for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels_[i] == id ? 1 : 0;
  return out;
}

BinaryMask LabelMap::foreground() const {
  BinaryMask out(width(), height(), 0);
  for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels_[i] > 0 ? 1 : 0;
  return out;
}

std::vector<BinaryMask> LabelMap::masks() const {
  std::vector<BinaryMask> out(static_cast<std::size_t>(count_),
                              BinaryMask(width(), height(), 0));
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] > 0) out[static_cast<std::size_t>(labels_[i] - 1)][i] = 1;
  }
  return out;
}

std::vector<std::size_t> LabelMap::areas() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(count_), 0);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] > 0) ++out[static_cast<std::size_t>(labels_[i] - 1)];
  }
  return out;
}

}  // namespace motionseg
