#include <doctest.h>

#include <cmath>

#include "motionseg/losses.hpp"
#include "support.hpp"

using namespace motionseg;

namespace {

MatchResult matched(std::vector<std::pair<int, int>> pairs, std::vector<int> unmatched) {
  MatchResult r;
  r.pairs = std::move(pairs);
  r.unmatched_slots = std::move(unmatched);
  return r;
}

}  // namespace

TEST_CASE("wbce closed forms") {
  const auto p = testing::mask(2, 2, {1, 0, 0, 0});
  const auto half = wbce(Grid<double>(2, 2, 0.5), p);
  CHECK(half.loss == doctest::Approx(1.1875 * std::log(2.0)).epsilon(1e-14));

  Grid<double> perfect(2, 2, 0.0);
  perfect[0] = 1.0;
  CHECK(wbce(perfect, p).loss < 4e-7);

  // Full-image p: r_s = 1 so the foreground weight is 1.
  const BinaryMask full(2, 2, 1);
  CHECK(wbce(Grid<double>(2, 2, 0.5), full).loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(wbce(Grid<double>(3, 2, 0.5), p), Error);
}

TEST_CASE("wbce gradient matches central differences") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::bernoulli_distribution b(0.4);
  for (int t = 0; t < 20; ++t) {
    Grid<double> m(3, 3, 0.0);
    BinaryMask p(3, 3, 0);
    for (std::size_t i = 0; i < 9; ++i) {
      m[i] = u(rng);
      p[i] = b(rng);
    }
    const auto v = wbce(m, p);
    for (std::size_t i = 0; i < 9; ++i) {
      auto mp = m;
      auto mm = m;
      mp[i] += 1e-5;
      mm[i] -= 1e-5;
      const double num = (wbce(mp, p).loss - wbce(mm, p).loss) / 2e-5;
      CHECK(v.grad[i] == doctest::Approx(num).epsilon(1e-6));
    }
  }
}

TEST_CASE("drop gate") {
  Eigen::MatrixXd z(4, 2);
  z << 1, 0,   //
      1, 0,    // duplicate of 0
      0, 1,    // orthogonal
      0, 0;    // zero vector
  const auto g = drop_gate(matched({{0, 0}}, {1, 2, 3}), z, 0.99);
  CHECK(g.dropped == std::vector<int>{1});
  CHECK(g.kept == std::vector<int>{2, 3});
  CHECK(g.zero_vector);
  CHECK(g.max_similarity[0] == doctest::Approx(1.0));

  const auto none = drop_gate(matched({}, {0, 1, 2}), z, 0.99);
  CHECK(none.kept == std::vector<int>{0, 1, 2});
  CHECK(std::isinf(none.max_similarity[0]));
  CHECK(none.max_similarity[0] < 0);
}

TEST_CASE("fg prediction") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  SlotMasks alpha(4, Grid<double>(3, 2, 0.0));
  for (auto& a : alpha) {
    for (auto& v : a.values()) v = g(rng);
  }
  const auto m = softmax_masks(alpha);
  const auto all = matched({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {});
  const auto ones = fg_prediction(m, Eigen::VectorXd::Ones(4), {}, all);
  for (double v : ones.values()) CHECK(v == doctest::Approx(1.0));
  const auto zeros = fg_prediction(m, Eigen::VectorXd::Zero(4), {}, all);
  for (double v : zeros.values()) CHECK(v == 0.0);

  const auto match = matched({{2, 0}}, {0, 1, 3});
  Eigen::VectorXd lambda(4);
  lambda << 0.3, 0.9, 0.6, 0.1;
  const auto pred = fg_prediction(m, lambda, {1, 3}, match);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(pred[i] == doctest::Approx(0.6 * m[2][i] + 0.9 * m[1][i] + 0.1 * m[3][i]));
  }
  CHECK(contributing_slots({3, 1}, match) == std::vector<int>{1, 2, 3});
}

TEST_CASE("fg/bg loss") {
  const auto p = testing::mask(2, 2, {1, 1, 0, 0});
  Grid<double> ideal(2, 2, 0.0);
  ideal[0] = ideal[1] = 1.0;
  CHECK(fg_bg_loss(ideal, p, 0.2).total < 1e-6);
  const auto ones = fg_bg_loss(Grid<double>(2, 2, 1.0), p, 0.2);
  CHECK(ones.fg < 1e-6);
  CHECK(ones.bg == doctest::Approx(0.2));

  // 3x3 instance against a long-double evaluation of the same formula.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Grid<double> m(3, 3, 0.0);
  for (auto& v : m.values()) v = u(rng);
  const auto q = testing::mask(3, 3, {1, 0, 1, 1, 0, 0, 0, 1, 0});
  long double fg = 0.0L;
  long double bg = 0.0L;
  int nbg = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    if (q[i]) {
      fg -= std::log(static_cast<long double>(m[i]));
    } else {
      bg += m[i];
      ++nbg;
    }
  }
  const long double want = fg / 9.0L + 0.2L * bg / nbg;
  const auto got = fg_bg_loss(m, q, 0.2);
  CHECK(std::abs(static_cast<long double>(got.total) - want) < 1e-15L);
  for (std::size_t i = 0; i < 9; ++i) {
    auto mp = m;
    auto mm = m;
    mp[i] += 1e-5;
    mm[i] -= 1e-5;
    const double num = (fg_bg_loss(mp, q, 0.2).total - fg_bg_loss(mm, q, 0.2).total) / 2e-5;
    CHECK(std::abs(num - got.grad[i]) / std::max({std::abs(num), std::abs(got.grad[i]), 1e-6}) < 1e-4);
  }
  CHECK(fg_bg_loss(Grid<double>(2, 2, 0.7), BinaryMask(2, 2, 1), 0.2).bg == 0.0);
}

TEST_CASE("loss defaults") {
  LossConfig c;
  CHECK(c.r_bg == 0.2);
  CHECK(c.tau_drop == 0.99);
  CHECK_NOTHROW(c.validate());
  c.r_bg = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}
