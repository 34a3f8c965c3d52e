#include "motionseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "motionseg/losses.hpp"
#include "motionseg/slot_model.hpp"

namespace motionseg {
namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

Grid<double> random_probabilities(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Grid<double> g(w, h, 0.0);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

BinaryMask random_mask(std::mt19937_64& rng, int w, int h) {
  std::bernoulli_distribution b(0.4);
  BinaryMask m(w, h, 0);
  for (auto& v : m.values()) v = b(rng) ? 1 : 0;
  return m;
}

template <typename Loss>
double check_pixels(Grid<double> x, const Grid<double>& analytic, double h, Loss&& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double lp = loss(x);
    x[i] = x0 - h;
    const double lm = loss(x);
    x[i] = x0;
    worst = std::max(worst, rel_error(analytic[i], (lp - lm) / (2.0 * h)));
  }
  return worst;
}

}  // namespace

GradcheckReport run_gradcheck(int instances, std::uint64_t seed, double h) {
  if (instances < 1) throw Error(ErrorCode::InvalidArgument, "instances must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> side(2, 6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  GradcheckReport report;
  report.instances = instances;

  for (int t = 0; t < instances; ++t) {
    const int w = side(rng);
    const int hh = side(rng);
    const auto m = random_probabilities(rng, w, hh);
    const auto p = random_mask(rng, w, hh);
    const auto analytic = wbce(m, p).grad;
    report.wbce = std::max(report.wbce, check_pixels(m, analytic, h, [&](const Grid<double>& x) {
                             return wbce(x, p).loss;
                           }));

    const auto m_hat = random_probabilities(rng, w, hh);
    const auto p_fg = random_mask(rng, w, hh);
    const auto fb = fg_bg_loss(m_hat, p_fg, 0.2).grad;
    report.fg_bg = std::max(report.fg_bg, check_pixels(m_hat, fb, h, [&](const Grid<double>& x) {
                              return fg_bg_loss(x, p_fg, 0.2).total;
                            }));

    // Scalar objective sum_k c_k lambda_k over a small MLP.
    const int k = side(rng);
    const int d = side(rng);
    DeactivationMlp mlp(d, side(rng) + 1, std::uniform_int_distribution<int>(1, 4)(rng), rng());
    // Nonzero biases keep ReLU inputs off the kink at exactly zero.
    for (auto& layer : mlp.layers()) {
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.5 * gauss(rng);
    }
    Eigen::MatrixXd z(k, d);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = gauss(rng);
    Eigen::VectorXd c(k);
    for (int i = 0; i < k; ++i) c(i) = gauss(rng);
    const auto grads = mlp_backward(mlp, z, c);
    auto objective = [&](const DeactivationMlp& net, const Eigen::MatrixXd& zz) {
      return c.dot(net.forward(zz));
    };
    const Eigen::VectorXd flat = mlp.flat_parameters();
    const Eigen::VectorXd analytic_flat = DeactivationMlp::flatten(grads.layers);
    DeactivationMlp probe = mlp;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Eigen::VectorXd q = flat;
      q(i) = flat(i) + h;
      probe.set_flat_parameters(q);
      const double lp = objective(probe, z);
      q(i) = flat(i) - h;
      probe.set_flat_parameters(q);
      const double lm = objective(probe, z);
      report.mlp = std::max(report.mlp, rel_error(analytic_flat(i), (lp - lm) / (2.0 * h)));
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Eigen::MatrixXd zz = z;
      zz.data()[i] += h;
      const double lp = objective(mlp, zz);
      zz.data()[i] -= 2.0 * h;
      const double lm = objective(mlp, zz);
      report.mlp = std::max(report.mlp, rel_error(grads.dz.data()[i], (lp - lm) / (2.0 * h)));
    }
  }
  return report;
}

}  // namespace motionseg
