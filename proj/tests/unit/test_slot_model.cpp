#include <doctest.h>

#include <cmath>
#include <fstream>

#include "motionseg/slot_model.hpp"
#include "support.hpp"

using namespace motionseg;

namespace {

SlotMasks planes(int k, int w, int h, double fill = 0.0) {
  return SlotMasks(static_cast<std::size_t>(k), Grid<double>(w, h, fill));
}

Eigen::MatrixXd random_z(std::mt19937_64& rng, int k, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd z(k, d);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
  return z;
}

}  // namespace

TEST_CASE("softmax masks") {
  auto eq = softmax_masks(planes(2, 3, 2, 1.5));
  for (const auto& m : eq) {
    for (double v : m.values()) CHECK(v == doctest::Approx(0.5));
  }
  auto big = planes(3, 2, 2, 0.0);
  for (auto& v : big[1].values()) v = 1000.0;
  const auto m = softmax_masks(big);
  for (double v : m[1].values()) CHECK(v == doctest::Approx(1.0));
  CHECK(partition_error(m) < 1e-12);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 3.0);
  auto alpha = planes(3, 2, 2);
  for (auto& p : alpha) {
    for (auto& v : p.values()) v = g(rng);
  }
  const auto soft = softmax_masks(alpha);
  for (std::size_t i = 0; i < 4; ++i) {
    long double denom = 0.0L;
    for (const auto& p : alpha) denom += std::exp(static_cast<long double>(p[i]));
    for (std::size_t k = 0; k < 3; ++k) {
      const long double want = std::exp(static_cast<long double>(alpha[k][i])) / denom;
      CHECK(std::abs(static_cast<long double>(soft[k][i]) - want) < 1e-15L);
    }
  }
  CHECK(partition_error(soft) < 1e-12);
}

TEST_CASE("deactivation forward pass") {
  std::vector<DenseLayer> zero_layers{{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4)},
                                      {Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)}};
  DeactivationMlp zero(zero_layers);
  std::mt19937_64 rng(5);
  const auto z = random_z(rng, 6, 3);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(deactivate(zero, z)(i) == 0.5);

  DeactivationMlp mlp(3, 8, 4, 9);
  const auto lambda = deactivate(mlp, z);
  const auto ref = deactivate_reference(mlp, z);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(lambda(i) == doctest::Approx(ref(i)).epsilon(1e-13));
    CHECK(lambda(i) > 0.0);
    CHECK(lambda(i) < 1.0);
  }

  Eigen::MatrixXd permuted(6, 3);
  const int perm[6] = {3, 0, 5, 1, 4, 2};
  for (int i = 0; i < 6; ++i) permuted.row(i) = z.row(perm[i]);
  const auto lp = deactivate(mlp, permuted);
  for (int i = 0; i < 6; ++i) CHECK(lp(i) == lambda(perm[i]));

  CHECK_THROWS_AS(deactivate(mlp, random_z(rng, 2, 4)), Error);
}

TEST_CASE("paper architecture builds") {
  DeactivationMlp mlp(32, 2048, 4, 1);
  CHECK(mlp.layer_count() == 4);
  CHECK(mlp.layers()[0].weight.rows() == 2048);
  CHECK(mlp.layers()[3].weight.rows() == 1);
  CHECK(mlp.parameter_count() == 32u * 2048 + 2048 + 2 * (2048u * 2048 + 2048) + 2048 + 1);
}

TEST_CASE("mlp_backward basics") {
  std::mt19937_64 rng(11);
  DeactivationMlp mlp(4, 5, 3, 2);
  const auto z = random_z(rng, 7, 4);
  const auto zero = mlp_backward(mlp, z, Eigen::VectorXd::Zero(7));
  CHECK(DeactivationMlp::flatten(zero.layers).cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.dz.cwiseAbs().maxCoeff() == 0.0);
  Eigen::VectorXd up = Eigen::VectorXd::Random(7);
  const auto g1 = DeactivationMlp::flatten(mlp_backward(mlp, z, up).layers);
  const auto g2 = DeactivationMlp::flatten(mlp_backward(mlp, z, 2.0 * up).layers);
  CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mlp_backward matches central differences") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    DeactivationMlp mlp(3, 4, 2 + t % 3, rng());
    for (auto& l : mlp.layers()) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.3 * g(rng);
    }
    const auto z = random_z(rng, 5, 3);
    Eigen::VectorXd c(5);
    for (int i = 0; i < 5; ++i) c(i) = g(rng);
    const auto analytic = DeactivationMlp::flatten(mlp_backward(mlp, z, c).layers);
    const Eigen::VectorXd p = mlp.flat_parameters();
    DeactivationMlp probe = mlp;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Eigen::VectorXd q = p;
      q(i) += 1e-5;
      probe.set_flat_parameters(q);
      const double lp = c.dot(probe.forward(z));
      q(i) -= 2e-5;
      probe.set_flat_parameters(q);
      const double lm = c.dot(probe.forward(z));
      const double num = (lp - lm) / 2e-5;
      CHECK(std::abs(num - analytic(i)) / std::max({std::abs(num), std::abs(analytic(i)), 1e-6}) < 1e-4);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("mrdc");
  DeactivationMlp mlp(5, 6, 3, 4);
  mlp.save(dir / "m.mrdc");
  const auto back = DeactivationMlp::load(dir / "m.mrdc");
  REQUIRE(back.layer_count() == 3);
  const auto a = mlp.flat_parameters();
  const auto b = back.flat_parameters();
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(b(i) == static_cast<double>(static_cast<float>(a(i))));
  CHECK(std::filesystem::file_size(dir / "m.mrdc") == 12u + 3 * 8u + 4u * mlp.parameter_count());
  {
    std::ofstream out(dir / "bad.mrdc", std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(DeactivationMlp::load(dir / "bad.mrdc"), Error);
}

TEST_CASE("apply_deactivation") {
  auto alpha = planes(3, 4, 1, 0.0);
  alpha[0][0] = alpha[0][1] = 6.0;
  alpha[1][2] = 6.0;
  alpha[2][3] = 6.0;
  const auto m = softmax_masks(alpha);
  const auto none = apply_deactivation(m, Eigen::Vector3d::Zero(), true);
  CHECK(none.instances.instance_count() == 0);
  CHECK(none.kept.empty());

  const auto one = apply_deactivation(m, Eigen::Vector3d(1.0, 0.0, 0.0), true);
  CHECK(one.kept == std::vector<int>{0});
  CHECK(one.instances.instance_count() == 1);
  CHECK(one.instances[0] == 1);
  CHECK(one.instances[1] == 1);
  CHECK(one.instances[2] == 0);

  const auto soft = apply_deactivation(m, Eigen::Vector3d(0.5, 0.25, 1.0), false);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(soft.fg[i] == doctest::Approx(0.5 * m[0][i] + 0.25 * m[1][i] + m[2][i]));
  }
}

TEST_CASE("adam") {
  AdamState s(0.01);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 2.0);
  adam_step(s, x, Eigen::VectorXd::Zero(3));
  CHECK(x == Eigen::VectorXd::Constant(3, 2.0));

  AdamState c(0.01);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
  double before = 0.0;
  for (int i = 0; i < 200; ++i) {
    before = y(0);
    adam_step(c, y, Eigen::VectorXd::Constant(1, 3.0));
  }
  CHECK(before - y(0) == doctest::Approx(0.01).epsilon(1e-3));

  // Minimize (x - 1)^2 with lr = 4e-5 * 1000.
  AdamState q(4e-5 * 1000.0);
  Eigen::VectorXd x1 = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < 500; ++i) adam_step(q, x1, Eigen::VectorXd::Constant(1, 2.0 * (x1(0) - 1.0)));
  CHECK(std::abs(x1(0) - 1.0) < 1e-3);
}

TEST_CASE("mask head and softmax backward") {
  std::mt19937_64 rng(3);
  MaskHead head(3, 2, 7);
  Eigen::MatrixXd features = Eigen::MatrixXd::Random(6, 2);
  const auto alpha = head.logits(features, 3, 2);
  REQUIRE(alpha.size() == 3);
  const auto m = softmax_masks(alpha);
  auto dm = planes(3, 3, 2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& p : dm) {
    for (auto& v : p.values()) v = g(rng);
  }
  const auto grad = head.backward(features, softmax_backward(m, dm));
  auto objective = [&](const MaskHead& h) {
    const auto mm = softmax_masks(h.logits(features, 3, 2));
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < 6; ++i) s += dm[k][i] * mm[k][i];
    }
    return s;
  };
  const Eigen::VectorXd p = head.flat_parameters();
  MaskHead probe = head;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Eigen::VectorXd q = p;
    q(i) += 1e-5;
    probe.set_flat_parameters(q);
    const double lp = objective(probe);
    q(i) -= 2e-5;
    probe.set_flat_parameters(q);
    const double lm = objective(probe);
    CHECK(grad(i) == doctest::Approx((lp - lm) / 2e-5).epsilon(1e-6));
  }
}
