#include "motionseg/slot_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

namespace motionseg {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_planes(const SlotMasks& planes, const char* what) {
  if (planes.empty()) throw Error(ErrorCode::InvalidArgument, std::string(what) + ": no slots");
  for (const auto& p : planes) require_same_shape(p, planes.front(), what);
}

constexpr std::array<char, 4> kCheckpointMagic = {'M', 'R', 'D', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xffu));
}
void put_f32(std::vector<unsigned char>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(bytes_[pos_ + s]) << (8 * s);
    pos_ += 4;
    return v;
  }
  double f32() { return std::bit_cast<float>(u32()); }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, "checkpoint truncated");
  }
  const std::vector<unsigned char>& bytes() const { return bytes_; }
  void skip(std::size_t n) { need(n); pos_ += n; }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

SlotMasks softmax_masks(const SlotMasks& alpha) {
  check_planes(alpha, "softmax_masks");
  const std::size_t k = alpha.size();
  SlotMasks out(k, Grid<double>(alpha.front().width(), alpha.front().height(), 0.0));
  const std::size_t pixels = alpha.front().size();
  for (std::size_t i = 0; i < pixels; ++i) {
    double peak = alpha[0][i];
    for (std::size_t s = 1; s < k; ++s) peak = std::max(peak, alpha[s][i]);
    double total = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      out[s][i] = std::exp(alpha[s][i] - peak);
      total += out[s][i];
    }
    for (std::size_t s = 0; s < k; ++s) out[s][i] /= total;
  }
  return out;
}

double partition_error(const SlotMasks& masks) {
  check_planes(masks, "partition_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < masks.front().size(); ++i) {
    double total = 0.0;
    for (const auto& m : masks) total += m[i];
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

SlotSet SlotSet::from_logits(Eigen::MatrixXd z, SlotMasks alpha) {
  if (static_cast<std::size_t>(z.rows()) != alpha.size()) {
    throw Error(ErrorCode::DimensionMismatch, "slot vectors and alpha planes disagree on K");
  }
  SlotSet set;
  set.masks = softmax_masks(alpha);
  set.z = std::move(z);
  set.alpha = std::move(alpha);
  return set;
}

DeactivationMlp::DeactivationMlp(int input_dim, int hidden_dim, int layers, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || layers < 1) {
    throw Error(ErrorCode::InvalidArgument, "MLP sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  int fan_in = input_dim;
  for (int l = 0; l < layers; ++l) {
    const int fan_out = l + 1 == layers ? 1 : hidden_dim;
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    }
    layers_.push_back(std::move(layer));
    fan_in = fan_out;
  }
}

DeactivationMlp::DeactivationMlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::InvalidArgument, "MLP needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows() ||
        (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())) {
      throw Error(ErrorCode::DimensionMismatch, "MLP layer shapes do not chain");
    }
  }
  if (layers_.back().weight.rows() != 1) {
    throw Error(ErrorCode::DimensionMismatch, "MLP must end in a single output");
  }
}

int DeactivationMlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

Eigen::VectorXd DeactivationMlp::forward(const Eigen::MatrixXd& z, Cache* cache) const {
  if (z.cols() != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "slot dimension differs from MLP input size");
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd x = z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd pre = x * layers_[l].weight.transpose();
    pre.rowwise() += layers_[l].bias.transpose();
    if (cache) {
      cache->inputs.push_back(x);
      cache->pre.push_back(pre);
    }
    x = l + 1 == layers_.size() ? pre : Eigen::MatrixXd(pre.cwiseMax(0.0));
  }
  Eigen::VectorXd lambda(x.rows());
  for (Eigen::Index k = 0; k < x.rows(); ++k) lambda(k) = sigmoid(x(k, 0));
  if (cache) cache->lambda = lambda;
  return lambda;
}

DeactivationMlp::Gradients DeactivationMlp::backward(const Cache& cache,
                                                     const Eigen::VectorXd& dlambda) const {
  if (dlambda.size() != cache.lambda.size()) {
    throw Error(ErrorCode::DimensionMismatch, "upstream gradient length differs from K");
  }
  Gradients grads;
  grads.layers.resize(layers_.size());
  Eigen::MatrixXd delta =
      (dlambda.array() * cache.lambda.array() * (1.0 - cache.lambda.array())).matrix();
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grads.layers[l].weight = delta.transpose() * cache.inputs[l];
    grads.layers[l].bias = delta.colwise().sum().transpose();
    Eigen::MatrixXd upstream = delta * layers_[l].weight;
    if (l > 0) {
      const auto& pre = cache.pre[l - 1];
      delta = (upstream.array() * (pre.array() > 0.0).cast<double>()).matrix();
    } else {
      grads.dz = std::move(upstream);
    }
  }
  return grads;
}

std::size_t DeactivationMlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::VectorXd DeactivationMlp::flatten(const std::vector<DenseLayer>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  Eigen::VectorXd flat(n);
  Eigen::Index at = 0;
  for (const auto& l : layers) {
    // Row-major weights, matching the checkpoint layout.
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat(at++) = l.weight(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat(at++) = l.bias(r);
  }
  return flat;
}

Eigen::VectorXd DeactivationMlp::flat_parameters() const { return flatten(layers_); }

void DeactivationMlp::set_flat_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw Error(ErrorCode::DimensionMismatch, "flat parameter length differs from MLP size");
  }
  Eigen::Index at = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat(at++);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat(at++);
  }
}

void DeactivationMlp::save(const std::filesystem::path& path) const {
  std::vector<unsigned char> bytes(kCheckpointMagic.begin(), kCheckpointMagic.end());
  put_u32(bytes, kCheckpointVersion);
  put_u32(bytes, static_cast<std::uint32_t>(layers_.size()));
  for (const auto& l : layers_) {
    put_u32(bytes, static_cast<std::uint32_t>(l.weight.rows()));
    put_u32(bytes, static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f32(bytes, l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f32(bytes, l.bias(r));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

DeactivationMlp DeactivationMlp::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
  Reader reader({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  reader.need(4);
  if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), reader.bytes().begin())) {
    throw Error(ErrorCode::BadMagic, path.string() + " is not an MRDC checkpoint");
  }
  reader.skip(4);
  if (reader.u32() != kCheckpointVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported checkpoint version");
  }
  const std::uint32_t count = reader.u32();
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto rows = static_cast<Eigen::Index>(reader.u32());
    const auto cols = static_cast<Eigen::Index>(reader.u32());
    reader.need(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols + 1) * 4);
    DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = reader.f32();
    }
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias(r) = reader.f32();
    layers.push_back(std::move(layer));
  }
  return DeactivationMlp(std::move(layers));
}

Eigen::VectorXd deactivate(const DeactivationMlp& mlp, const Eigen::MatrixXd& z) {
  return mlp.forward(z);
}

Eigen::VectorXd deactivate_reference(const DeactivationMlp& mlp, const Eigen::MatrixXd& z) {
  const auto& layers = mlp.layers();
  if (z.cols() != mlp.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "slot dimension differs from MLP input size");
  }
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    std::vector<double> act(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index j = 0; j < z.cols(); ++j) act[static_cast<std::size_t>(j)] = z(k, j);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& w = layers[l].weight;
      std::vector<double> next(static_cast<std::size_t>(w.rows()));
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        double sum = layers[l].bias(r);
        for (Eigen::Index c = 0; c < w.cols(); ++c) sum += w(r, c) * act[static_cast<std::size_t>(c)];
        const bool last = l + 1 == layers.size();
        next[static_cast<std::size_t>(r)] = last ? sum : std::max(sum, 0.0);
      }
      act = std::move(next);
    }
    out(k) = 1.0 / (1.0 + std::exp(-act[0]));
  }
  return out;
}

DeactivationMlp::Gradients mlp_backward(const DeactivationMlp& mlp, const Eigen::MatrixXd& z,
                                        const Eigen::VectorXd& dlambda) {
  DeactivationMlp::Cache cache;
  mlp.forward(z, &cache);
  return mlp.backward(cache, dlambda);
}

DeactivationOutput apply_deactivation(const SlotMasks& masks, const Eigen::VectorXd& lambda,
                                      bool binarize) {
  check_planes(masks, "apply_deactivation");
  if (static_cast<std::size_t>(lambda.size()) != masks.size()) {
    throw Error(ErrorCode::DimensionMismatch, "lambda length differs from slot count");
  }
  const int w = masks.front().width();
  const int h = masks.front().height();
  DeactivationOutput out;
  out.fg = Grid<double>(w, h, 0.0);
  out.instances = LabelMap(w, h);
  if (!binarize) {
    for (std::size_t s = 0; s < masks.size(); ++s) {
      for (std::size_t i = 0; i < out.fg.size(); ++i) {
        out.fg[i] += lambda(static_cast<Eigen::Index>(s)) * masks[s][i];
      }
    }
    return out;
  }
  for (std::size_t s = 0; s < masks.size(); ++s) {
    if (lambda(static_cast<Eigen::Index>(s)) > 0.5) out.kept.push_back(static_cast<int>(s));
  }
  Grid<std::uint32_t> raw(w, h, 0);
  for (std::size_t i = 0; i < out.fg.size(); ++i) {
    double total = 0.0;
    double best = -1.0;
    int arg = -1;
    for (int s : out.kept) {
      const double m = masks[static_cast<std::size_t>(s)][i];
      total += m;
      if (m > best) {
        best = m;
        arg = s;
      }
    }
    out.fg[i] = total;
    if (total > 0.5) raw[i] = static_cast<std::uint32_t>(arg + 1);
  }
  out.instances = LabelMap::from_raw(raw);
  return out;
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient length differs from parameter length");
  }
  if (state.m.size() == 0) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Adam moments differ from parameter length");
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.lr * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + state.eps);
}

MaskHead::MaskHead(int slots, int channels, std::uint64_t seed)
    : weight_(slots, channels), bias_(Eigen::VectorXd::Zero(slots)) {
  if (slots < 1 || channels < 1) throw Error(ErrorCode::InvalidArgument, "bad mask head size");
  std::mt19937_64 rng(seed);
  const double a = std::sqrt(6.0 / (slots + channels));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index r = 0; r < weight_.rows(); ++r) {
    for (Eigen::Index c = 0; c < weight_.cols(); ++c) weight_(r, c) = dist(rng);
  }
}

SlotMasks MaskHead::logits(const Eigen::MatrixXd& features, int width, int height) const {
  if (features.rows() != static_cast<Eigen::Index>(width) * height ||
      features.cols() != channels()) {
    throw Error(ErrorCode::DimensionMismatch, "feature matrix must be (H*W)×C");
  }
  const Eigen::MatrixXd alpha = (features * weight_.transpose()).rowwise() + bias_.transpose();
  SlotMasks out(static_cast<std::size_t>(slot_count()), Grid<double>(width, height, 0.0));
  for (Eigen::Index k = 0; k < alpha.cols(); ++k) {
    for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
      out[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = alpha(i, k);
    }
  }
  return out;
}

Eigen::VectorXd MaskHead::backward(const Eigen::MatrixXd& features, const SlotMasks& dalpha) const {
  if (dalpha.size() != static_cast<std::size_t>(slot_count())) {
    throw Error(ErrorCode::DimensionMismatch, "dalpha must have K planes");
  }
  Eigen::MatrixXd d(features.rows(), slot_count());
  for (Eigen::Index k = 0; k < d.cols(); ++k) {
    const auto& plane = dalpha[static_cast<std::size_t>(k)];
    if (static_cast<Eigen::Index>(plane.size()) != features.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "dalpha plane size differs from features");
    }
    for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, k) = plane[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd dw = d.transpose() * features;  // K×C
  const Eigen::VectorXd db = d.colwise().sum().transpose();
  Eigen::VectorXd flat(dw.size() + db.size());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < dw.rows(); ++r) {
    for (Eigen::Index c = 0; c < dw.cols(); ++c) flat(at++) = dw(r, c);
  }
  for (Eigen::Index r = 0; r < db.size(); ++r) flat(at++) = db(r);
  return flat;
}

Eigen::VectorXd MaskHead::flat_parameters() const {
  Eigen::VectorXd flat(weight_.size() + bias_.size());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < weight_.rows(); ++r) {
    for (Eigen::Index c = 0; c < weight_.cols(); ++c) flat(at++) = weight_(r, c);
  }
  for (Eigen::Index r = 0; r < bias_.size(); ++r) flat(at++) = bias_(r);
  return flat;
}

void MaskHead::set_flat_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != weight_.size() + bias_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "flat parameter length differs from head size");
  }
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < weight_.rows(); ++r) {
    for (Eigen::Index c = 0; c < weight_.cols(); ++c) weight_(r, c) = flat(at++);
  }
  for (Eigen::Index r = 0; r < bias_.size(); ++r) bias_(r) = flat(at++);
}

SlotMasks softmax_backward(const SlotMasks& masks, const SlotMasks& dmasks) {
  check_planes(masks, "softmax_backward");
  if (dmasks.size() != masks.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mask gradient has wrong slot count");
  }
  SlotMasks out(masks.size(), Grid<double>(masks.front().width(), masks.front().height(), 0.0));
  for (std::size_t i = 0; i < masks.front().size(); ++i) {
    double dot = 0.0;
    for (std::size_t s = 0; s < masks.size(); ++s) dot += masks[s][i] * dmasks[s][i];
    for (std::size_t s = 0; s < masks.size(); ++s) {
      out[s][i] = masks[s][i] * (dmasks[s][i] - dot);
    }
  }
  return out;
}

}  // namespace motionseg
