#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "motionseg/grid.hpp"
#include "motionseg/types.hpp"

namespace motionseg {

using SlotMasks = std::vector<Grid<double>>;  // K planes of H×W

// Per-pixel softmax over the slot axis, max-subtracted.
SlotMasks softmax_masks(const SlotMasks& alpha);

// Largest |sum_k m_k - 1| over all pixels.
double partition_error(const SlotMasks& masks);

// K slot vectors with their alpha logits and softmax masks.
struct SlotSet {
  Eigen::MatrixXd z;  // K×D
  SlotMasks alpha;
  SlotMasks masks;

  static SlotSet from_logits(Eigen::MatrixXd z, SlotMasks alpha);

  int slot_count() const noexcept { return static_cast<int>(z.rows()); }
  int slot_dim() const noexcept { return static_cast<int>(z.cols()); }
  int width() const { return masks.empty() ? 0 : masks.front().width(); }
  int height() const { return masks.empty() ? 0 : masks.front().height(); }
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out×in
  Eigen::VectorXd bias;    // out
};

// phi_d: ReLU hidden layers, sigmoid on the single output.
class DeactivationMlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // per layer, rows = slots
    std::vector<Eigen::MatrixXd> pre;     // per layer pre-activation
    Eigen::VectorXd lambda;
  };

  struct Gradients {
    std::vector<DenseLayer> layers;
    Eigen::MatrixXd dz;  // K×D
  };

  DeactivationMlp() = default;
  // `layers` linear maps: input -> hidden -> ... -> hidden -> 1. Glorot
  // uniform weights from a seeded mt19937_64, zero biases.
  DeactivationMlp(int input_dim, int hidden_dim, int layers, std::uint64_t seed);
  explicit DeactivationMlp(std::vector<DenseLayer> layers);

  int input_dim() const;
  int layer_count() const noexcept { return static_cast<int>(layers_.size()); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  Eigen::VectorXd forward(const Eigen::MatrixXd& z, Cache* cache = nullptr) const;
  Gradients backward(const Cache& cache, const Eigen::VectorXd& dlambda) const;

  std::size_t parameter_count() const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& flat);
  static Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers);

  // "MRDC" checkpoint: magic, u32 version, u32 layer count, then per layer
  // u32 rows, u32 cols, row-major f32 weights, f32 biases; little-endian.
  void save(const std::filesystem::path& path) const;
  static DeactivationMlp load(const std::filesystem::path& path);

 private:
  std::vector<DenseLayer> layers_;
};

// lambda_k = sigma(mlp(z_k)).
Eigen::VectorXd deactivate(const DeactivationMlp& mlp, const Eigen::MatrixXd& z);

// Reference forward pass, one slot at a time with plain loops.
Eigen::VectorXd deactivate_reference(const DeactivationMlp& mlp, const Eigen::MatrixXd& z);

// Runs the forward pass, then backprops dlambda into every weight, bias and z.
DeactivationMlp::Gradients mlp_backward(const DeactivationMlp& mlp, const Eigen::MatrixXd& z,
                                        const Eigen::VectorXd& dlambda);

struct DeactivationOutput {
  Grid<double> fg;
  std::vector<int> kept;  // slots with lambda > 0.5 (binarized only)
  LabelMap instances;     // binarized only
};

// binarize (inference): keep slots with lambda > 0.5, fg = sum of kept
// masks, instance = argmax over kept slots where that fg exceeds 0.5.
// Otherwise (training): fg = sum_k lambda_k m_k.
DeactivationOutput apply_deactivation(const SlotMasks& masks, const Eigen::VectorXd& lambda,
                                      bool binarize);

struct AdamState {
  double lr = 4e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  explicit AdamState(double learning_rate = 4e-5) : lr(learning_rate) {}
};

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads);

// Toy stage-1 mask head: alpha_k(pixel) = w_k . features(pixel) + b_k.
// Stands in for a slot-attention module over frozen features.
class MaskHead {
 public:
  MaskHead(int slots, int channels, std::uint64_t seed);

  int slot_count() const noexcept { return static_cast<int>(weight_.rows()); }
  int channels() const noexcept { return static_cast<int>(weight_.cols()); }

  // features: (H*W)×C, raster order.
  SlotMasks logits(const Eigen::MatrixXd& features, int width, int height) const;

  // dL/dalpha per slot -> flat gradient over (weight, bias).
  Eigen::VectorXd backward(const Eigen::MatrixXd& features, const SlotMasks& dalpha) const;

  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& flat);

 private:
  Eigen::MatrixXd weight_;  // K×C
  Eigen::VectorXd bias_;    // K
};

// Backprop through the per-pixel softmax: dalpha = m * (dm - sum_j m_j dm_j).
SlotMasks softmax_backward(const SlotMasks& masks, const SlotMasks& dmasks);

}  // namespace motionseg
