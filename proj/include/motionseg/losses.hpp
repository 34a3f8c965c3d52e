#pragma once

#include <vector>

#include <Eigen/Dense>

#include "motionseg/assignment.hpp"
#include "motionseg/slot_model.hpp"

namespace motionseg {

struct LossConfig {
  double eps = 1e-7;      // probability clamp before logs
  double r_bg = 0.2;      // background regularization weight
  double tau_drop = 0.99; // cosine similarity above which an unmatched slot is dropped

  void validate() const;
};

struct LossValue {
  double loss = 0.0;
  Grid<double> grad;  // d loss / d prediction, same shape as the prediction
};

// -(1/HW) sum [(2 - r_s) p log m + (1 - p) log(1 - m)], r_s = mean(p),
// m clamped to [eps, 1 - eps]; clamped pixels get zero gradient.
LossValue wbce(const Grid<double>& m_tilde, const BinaryMask& p, double eps = 1e-7);

struct DropGateResult {
  std::vector<int> kept;              // unmatched slots that stay in the loss
  std::vector<int> dropped;           // unmatched slots too similar to a matched one
  std::vector<double> max_similarity; // per unmatched slot, -inf when nothing is matched
  bool zero_vector = false;           // some cosine involved a zero vector (treated as 0)
};

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool* zero = nullptr);

// Keep unmatched slot u iff max_s cos(z_u, z_s) <= tau_drop over matched s.
DropGateResult drop_gate(const MatchResult& match, const Eigen::MatrixXd& z, double tau_drop);

// sum over matched s of lambda_s m_s + sum over kept u of lambda_u m_u.
Grid<double> fg_prediction(const SlotMasks& masks, const Eigen::VectorXd& lambda,
                           const std::vector<int>& kept_unmatched, const MatchResult& match);

// Slots that enter fg_prediction, ascending.
std::vector<int> contributing_slots(const std::vector<int>& kept_unmatched,
                                    const MatchResult& match);

struct FgBgLoss {
  double fg = 0.0;
  double bg = 0.0;
  double total = 0.0;
  Grid<double> grad;
};

// L_fg = -(1/HW) sum p log clamp(m); L_bg = r_bg / N_bg * sum_{p=0} m
// (zero when there is no background pixel).
FgBgLoss fg_bg_loss(const Grid<double>& m_hat, const BinaryMask& p_fg, double r_bg,
                    double eps = 1e-7);

}  // namespace motionseg
