#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "motionseg/losses.hpp"
#include "motionseg/pseudo_label.hpp"
#include "motionseg/quasi_static.hpp"

namespace motionseg {

struct RunConfig {
  // retrieval
  double tau_static = kTauStaticTriPd;
  double patch_fraction = kDefaultPatchFraction;
  // pseudo labels
  PseudoLabelConfig pseudo{};
  // losses
  LossConfig loss{};
  // training
  double stage1_lr = 4e-6;
  int stage1_epochs = 15;
  double stage2_lr = 4e-5;
  int stage2_epochs = 1;
  int batch_size = 8;
  bool drop_gating = true;
  // deactivation model
  int mlp_layers = 4;
  int mlp_hidden = 2048;
  int slots = 60;
  int slot_dim = 32;
  // generated training fixtures
  int fixture_count = 32;
  double fixture_separation = 6.0;
  int fixture_width = 64;
  int fixture_height = 64;
  // runtime
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

// `key = value` per line, '#' comments; unknown keys are rejected.
// Missing keys keep their defaults.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string format_run_config(const RunConfig& config);

}  // namespace motionseg
