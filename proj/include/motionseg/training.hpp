#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "motionseg/assignment.hpp"
#include "motionseg/losses.hpp"
#include "motionseg/metrics.hpp"
#include "motionseg/pseudo_label.hpp"
#include "motionseg/slot_model.hpp"
#include "motionseg/synth.hpp"

namespace motionseg {

// One frozen image for stage 2: slots from the (frozen) encoder, its flow
// pseudo-label and, for evaluation only, the slot flags and gt instances.
struct Stage2Sample {
  SlotSet slots;
  BinaryMask pseudo_fg;
  LabelMap pseudo_instances;
  std::vector<char> slot_is_object;
  LabelMap gt;
  std::vector<int> duplicate_of;  // static slot -> mover slot it copies, else -1
  MatchResult match;  // slots vs pseudo instances, fixed because slots are frozen
};

// Hungarian match of slot masks against pseudo instances.
MatchResult match_slots(const SlotSet& slots, const LabelMap& pseudo_instances);

Stage2Sample make_stage2_sample(SlotSet slots, BinaryMask pseudo_fg, LabelMap pseudo_instances,
                                std::vector<char> slot_is_object = {}, LabelMap gt = {});

struct Stage2Options {
  double lr = 4e-5;
  int epochs = 1;
  int batch_size = 8;
  bool drop_gating = true;
  LossConfig loss{};
  std::uint64_t shuffle_seed = 0;
};

struct Stage2Loss {
  double loss = 0.0;
  Eigen::VectorXd dlambda;  // per slot, zero for slots outside the prediction
};

// L_fg/bg of one sample as a function of lambda.
Stage2Loss stage2_sample_loss(const Stage2Sample& sample, const Eigen::VectorXd& lambda,
                              const Stage2Options& options);

struct BatchGradient {
  double loss = 0.0;           // mean over the batch
  Eigen::VectorXd gradient;    // flat, same packing as DeactivationMlp::flat_parameters
};

BatchGradient stage2_batch_gradient(const DeactivationMlp& mlp,
                                    const std::vector<const Stage2Sample*>& batch,
                                    const Stage2Options& options);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double slot_accuracy = 0.0;
};

// Adam on the batch-mean loss; samples are shuffled each epoch.
std::vector<EpochLog> train_deactivator(DeactivationMlp& mlp, const std::vector<Stage2Sample>& samples,
                                        const Stage2Options& options);

// Fraction of slots with (lambda > 0.5) == slot_is_object.
double slot_accuracy(const DeactivationMlp& mlp, const std::vector<Stage2Sample>& samples);

// Binarized inference vs each sample's gt, pooled.
MetricsReport evaluate_deactivator(const DeactivationMlp& mlp, const std::vector<Stage2Sample>& samples);

struct Stage2FixtureOptions {
  int count = 32;
  MoverSceneOptions scene{};
  SlotFixtureOptions slots{};
  PseudoLabelConfig pseudo{};
  // Static objects added to every scene; each copies a mover's slot vector.
  int static_objects = 0;
  int static_min_size = 28;
  int static_max_size = 40;
  std::uint64_t seed = 0;
};

// Scenes -> rendered flow -> pseudo-labels; slots from make_slot_fixture.
std::vector<Stage2Sample> make_stage2_fixtures(const Stage2FixtureOptions& options);

struct Stage1Sample {
  Eigen::MatrixXd features;  // (H*W)×C
  int width = 0;
  int height = 0;
  LabelMap pseudo_instances;
};

struct Stage1Step {
  double loss = 0.0;  // sum over matched pairs of wbce
  MatchResult match;
};

// Per matched (slot, instance) pair: wbce(m_slot, p_instance), summed.
Stage1Step stage1_loss(const MaskHead& head, const Stage1Sample& sample, Eigen::VectorXd* gradient);

// Plain full-batch Adam over the samples; returns each epoch's loss before its update.
std::vector<double> train_mask_head(MaskHead& head, const std::vector<Stage1Sample>& samples,
                                    double lr, int epochs);

}  // namespace motionseg
