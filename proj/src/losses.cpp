#include "motionseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace motionseg {

void LossConfig::validate() const {
  if (!(eps > 0.0 && eps < 0.5)) throw Error(ErrorCode::BadConfig, "eps must lie in (0, 0.5)");
  if (!(r_bg > 0.0)) throw Error(ErrorCode::BadConfig, "r_bg must be positive");
  if (!(tau_drop > 0.0 && tau_drop <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "tau_drop must lie in (0, 1]");
  }
}

LossValue wbce(const Grid<double>& m_tilde, const BinaryMask& p, double eps) {
  require_same_shape(m_tilde, p, "wbce: prediction and target differ in size");
  const double hw = static_cast<double>(m_tilde.size());
  const double r_s = static_cast<double>(count(p)) / hw;
  const double fg_weight = 2.0 - r_s;
  LossValue out{0.0, Grid<double>(m_tilde.width(), m_tilde.height(), 0.0)};
  double sum = 0.0;
  for (std::size_t i = 0; i < m_tilde.size(); ++i) {
    const double raw = m_tilde[i];
    const double m = std::clamp(raw, eps, 1.0 - eps);
    const bool inside = raw >= eps && raw <= 1.0 - eps;
    if (p[i]) {
      sum += fg_weight * std::log(m);
      if (inside) out.grad[i] = -fg_weight / (m * hw);
    } else {
      sum += std::log(1.0 - m);
      if (inside) out.grad[i] = 1.0 / ((1.0 - m) * hw);
    }
  }
  out.loss = -sum / hw;
  return out;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool* zero) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    if (zero) *zero = true;
    return 0.0;
  }
  return a.dot(b) / (na * nb);
}

DropGateResult drop_gate(const MatchResult& match, const Eigen::MatrixXd& z, double tau_drop) {
  DropGateResult out;
  for (const auto& [s, inst] : match.pairs) {
    if (s < 0 || s >= z.rows()) throw Error(ErrorCode::DimensionMismatch, "matched slot out of range");
  }
  for (int u : match.unmatched_slots) {
    if (u < 0 || u >= z.rows()) throw Error(ErrorCode::DimensionMismatch, "unmatched slot out of range");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [s, inst] : match.pairs) {
      bool zero = false;
      best = std::max(best, cosine_similarity(z.row(u).transpose(), z.row(s).transpose(), &zero));
      out.zero_vector = out.zero_vector || zero;
    }
    out.max_similarity.push_back(best);
    (best <= tau_drop ? out.kept : out.dropped).push_back(u);
  }
  return out;
}

std::vector<int> contributing_slots(const std::vector<int>& kept_unmatched,
                                    const MatchResult& match) {
  std::vector<int> slots = kept_unmatched;
  for (const auto& [s, inst] : match.pairs) slots.push_back(s);
  std::sort(slots.begin(), slots.end());
  slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
  return slots;
}

Grid<double> fg_prediction(const SlotMasks& masks, const Eigen::VectorXd& lambda,
                           const std::vector<int>& kept_unmatched, const MatchResult& match) {
  if (masks.empty()) throw Error(ErrorCode::InvalidArgument, "fg_prediction: no slots");
  if (static_cast<std::size_t>(lambda.size()) != masks.size()) {
    throw Error(ErrorCode::DimensionMismatch, "lambda length differs from slot count");
  }
  Grid<double> out(masks.front().width(), masks.front().height(), 0.0);
  for (int s : contributing_slots(kept_unmatched, match)) {
    if (s < 0 || static_cast<std::size_t>(s) >= masks.size()) {
      throw Error(ErrorCode::DimensionMismatch, "slot index out of range");
    }
    const auto& m = masks[static_cast<std::size_t>(s)];
    require_same_shape(m, out, "slot masks differ in size");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += lambda(s) * m[i];
  }
  return out;
}

FgBgLoss fg_bg_loss(const Grid<double>& m_hat, const BinaryMask& p_fg, double r_bg, double eps) {
  require_same_shape(m_hat, p_fg, "fg_bg_loss: prediction and target differ in size");
  const double hw = static_cast<double>(m_hat.size());
  const std::size_t fg_count = count(p_fg);
  const std::size_t bg_count = m_hat.size() - fg_count;
  FgBgLoss out;
  out.grad = Grid<double>(m_hat.width(), m_hat.height(), 0.0);
  double fg_sum = 0.0;
  double bg_sum = 0.0;
  for (std::size_t i = 0; i < m_hat.size(); ++i) {
    const double raw = m_hat[i];
    if (p_fg[i]) {
      const double m = std::clamp(raw, eps, 1.0 - eps);
      fg_sum += std::log(m);
      if (raw >= eps && raw <= 1.0 - eps) out.grad[i] = -1.0 / (m * hw);
    } else if (bg_count > 0) {
      bg_sum += raw;
      out.grad[i] = r_bg / static_cast<double>(bg_count);
    }
  }
  out.fg = -fg_sum / hw;
  out.bg = bg_count > 0 ? r_bg * bg_sum / static_cast<double>(bg_count) : 0.0;
  out.total = out.fg + out.bg;
  return out;
}

}  // namespace motionseg
