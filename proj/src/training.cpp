#include "motionseg/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace motionseg {

MatchResult match_slots(const SlotSet& slots, const LabelMap& pseudo_instances) {
  return hungarian(mask_cost_matrix(slots.masks, pseudo_instances.masks()));
}

Stage2Sample make_stage2_sample(SlotSet slots, BinaryMask pseudo_fg, LabelMap pseudo_instances,
                                std::vector<char> slot_is_object, LabelMap gt) {
  Stage2Sample s;
  s.match = match_slots(slots, pseudo_instances);
  s.slots = std::move(slots);
  s.pseudo_fg = std::move(pseudo_fg);
  s.pseudo_instances = std::move(pseudo_instances);
  s.slot_is_object = std::move(slot_is_object);
  s.gt = std::move(gt);
  return s;
}

Stage2Loss stage2_sample_loss(const Stage2Sample& sample, const Eigen::VectorXd& lambda,
                              const Stage2Options& options) {
  const auto& z = sample.slots.z;
  std::vector<int> kept = sample.match.unmatched_slots;
  if (options.drop_gating) kept = drop_gate(sample.match, z, options.loss.tau_drop).kept;

  const auto m_hat = fg_prediction(sample.slots.masks, lambda, kept, sample.match);
  const auto loss = fg_bg_loss(m_hat, sample.pseudo_fg, options.loss.r_bg, options.loss.eps);

  Stage2Loss out;
  out.loss = loss.total;
  out.dlambda = Eigen::VectorXd::Zero(z.rows());
  for (int k : contributing_slots(kept, sample.match)) {
    const auto& mk = sample.slots.masks[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (std::size_t i = 0; i < mk.size(); ++i) acc += loss.grad[i] * mk[i];
    out.dlambda(k) = acc;
  }
  return out;
}

BatchGradient stage2_batch_gradient(const DeactivationMlp& mlp,
                                    const std::vector<const Stage2Sample*>& batch,
                                    const Stage2Options& options) {
  BatchGradient out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mlp.parameter_count()));
  if (batch.empty()) return out;
  for (const auto* sample : batch) {
    DeactivationMlp::Cache cache;
    const auto lambda = mlp.forward(sample->slots.z, &cache);
    const auto loss = stage2_sample_loss(*sample, lambda, options);
    out.loss += loss.loss;
    out.gradient += DeactivationMlp::flatten(mlp.backward(cache, loss.dlambda).layers);
  }
  const double n = static_cast<double>(batch.size());
  out.loss /= n;
  out.gradient /= n;
  return out;
}

double slot_accuracy(const DeactivationMlp& mlp, const std::vector<Stage2Sample>& samples) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& s : samples) {
    const auto lambda = mlp.forward(s.slots.z);
    for (std::size_t k = 0; k < s.slot_is_object.size(); ++k) {
      const bool active = lambda(static_cast<Eigen::Index>(k)) > 0.5;
      correct += active == static_cast<bool>(s.slot_is_object[k]);
      ++total;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<EpochLog> train_deactivator(DeactivationMlp& mlp, const std::vector<Stage2Sample>& samples,
                                        const Stage2Options& options) {
  if (options.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  options.loss.validate();
  std::mt19937_64 rng(options.shuffle_seed);
  AdamState adam(options.lr);
  Eigen::VectorXd params = mlp.flat_parameters();
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      std::vector<const Stage2Sample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + options.batch_size); ++i) {
        batch.push_back(&samples[order[i]]);
      }
      const auto g = stage2_batch_gradient(mlp, batch, options);
      adam_step(adam, params, g.gradient);
      mlp.set_flat_parameters(params);
      loss_sum += g.loss;
      ++batches;
    }
    log.push_back({epoch, batches ? loss_sum / batches : 0.0, slot_accuracy(mlp, samples)});
  }
  return log;
}

MetricsReport evaluate_deactivator(const DeactivationMlp& mlp, const std::vector<Stage2Sample>& samples) {
  std::vector<ImageMetrics> images;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto out = apply_deactivation(s.slots.masks, mlp.forward(s.slots.z), true);
    char name[32];
    std::snprintf(name, sizeof name, "%06zu", i);
    images.push_back(evaluate_image(name, out.instances, s.gt));
  }
  return aggregate(std::move(images));
}

std::vector<Stage2Sample> make_stage2_fixtures(const Stage2FixtureOptions& options) {
  if (options.count < 0 || options.static_objects < 0) {
    throw Error(ErrorCode::InvalidArgument, "fixture counts must be >= 0");
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> static_size(options.static_min_size, options.static_max_size);
  std::vector<Stage2Sample> samples;
  samples.reserve(static_cast<std::size_t>(options.count));
  for (int i = 0; i < options.count; ++i) {
    SceneSpec spec;
    bool placed_all = false;
    for (int scene_try = 0; scene_try < 100 && !placed_all; ++scene_try) {
      spec = sample_mover_scene(rng, options.scene);
      placed_all = true;
      for (int s = 0; s < options.static_objects && placed_all; ++s) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
          SceneObject o;
          o.shape = Shape::Rect;
          o.w = std::min(static_size(rng), spec.width - 2);
          o.h = std::min(static_size(rng), spec.height - 2);
          o.x = std::uniform_int_distribution<int>(1, spec.width - o.w - 1)(rng);
          o.y = std::uniform_int_distribution<int>(1, spec.height - o.h - 1)(rng);
          o.depth = 1000.0 + s;
          placed = std::none_of(spec.objects.begin(), spec.objects.end(), [&](const SceneObject& m) {
            return o.x < m.x + m.w + 1 && m.x < o.x + o.w + 1 && o.y < m.y + m.h + 1 && m.y < o.y + o.h + 1;
          });
          if (placed) spec.objects.push_back(o);
        }
        placed_all = placed;
      }
    }
    if (!placed_all) throw Error(ErrorCode::InvalidArgument, "no room for static objects");
    const auto scene = render(spec);
    const auto pseudo = generate_pseudo_label(scene.flow, options.pseudo);
    SlotFixtureOptions slot_options = options.slots;
    slot_options.seed = rng();
    auto fx = make_slot_fixture(spec, slot_options);
    fx.slots.alpha.clear();  // only the masks are used from here on
    samples.push_back(make_stage2_sample(std::move(fx.slots), pseudo.fg, pseudo.instances,
                                         std::move(fx.slot_is_object), std::move(fx.gt)));
    samples.back().duplicate_of = std::move(fx.duplicate_of);
  }
  return samples;
}

Stage1Step stage1_loss(const MaskHead& head, const Stage1Sample& sample, Eigen::VectorXd* gradient) {
  const auto masks = softmax_masks(head.logits(sample.features, sample.width, sample.height));
  const auto instances = sample.pseudo_instances.masks();
  Stage1Step step;
  step.match = hungarian(mask_cost_matrix(masks, instances));

  SlotMasks dmasks(masks.size(), Grid<double>(sample.width, sample.height, 0.0));
  for (const auto& [slot, inst] : step.match.pairs) {
    const auto loss = wbce(masks[static_cast<std::size_t>(slot)], instances[static_cast<std::size_t>(inst)]);
    step.loss += loss.loss;
    dmasks[static_cast<std::size_t>(slot)] = loss.grad;
  }
  if (gradient) *gradient = head.backward(sample.features, softmax_backward(masks, dmasks));
  return step;
}

std::vector<double> train_mask_head(MaskHead& head, const std::vector<Stage1Sample>& samples,
                                    double lr, int epochs) {
  AdamState adam(lr);
  Eigen::VectorXd params = head.flat_parameters();
  std::vector<double> losses;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(params.size());
    double loss = 0.0;
    for (const auto& s : samples) {
      Eigen::VectorXd g;
      loss += stage1_loss(head, s, &g).loss;
      total += g;
    }
    if (!samples.empty()) total /= static_cast<double>(samples.size());
    adam_step(adam, params, total);
    head.set_flat_parameters(params);
    losses.push_back(samples.empty() ? 0.0 : loss / static_cast<double>(samples.size()));
  }
  return losses;
}

}  // namespace motionseg
