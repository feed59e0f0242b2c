#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "qpace/gradcheck.hpp"
#include "qpace/loss.hpp"
#include "qpace/metrics.hpp"
#include "qpace/random.hpp"
#include "test_support.hpp"

using namespace qpace;

TEST_CASE("pinball hand values") {
  CHECK(pinball(100.0, 110.0, 0.1) == 9.0);
  for (double alpha : {0.1, 0.5, 0.9}) CHECK(pinball(7.0, 7.0, alpha) == 0.0);
  // alpha = 0.5 is half the absolute error on both branches
  CHECK(pinball(3.0, 5.0, 0.5) == 0.5 * 2.0);
  CHECK(pinball(5.0, 3.0, 0.5) == 0.5 * 2.0);
}

TEST_CASE("pinball is nonnegative and convex with the stated subgradient") {
  RandomStream rs(31);
  for (int i = 0; i < 200; ++i) {
    const double y = rs.uniform(-5.0, 5.0);
    const double yh = rs.uniform(-5.0, 5.0);
    const double alpha = rs.uniform(0.05, 0.95);
    REQUIRE(pinball(y, yh, alpha) >= 0.0);
    if (std::fabs(yh - y) < 1e-3) continue;  // stay away from the kink
    auto f = [&](const Tensor& t) { return pinball(y, t[0], alpha); };
    Tensor at({1}, {yh});
    const double fd = finite_diff_grad(f, at, 1e-5)[0];
    CHECK_THAT(pinball_subgrad(y, yh, alpha), Catch::Matchers::WithinAbs(fd, 1e-8));
    // convexity via midpoint
    const double a = rs.uniform(-5.0, 5.0), b = rs.uniform(-5.0, 5.0);
    CHECK(pinball(y, 0.5 * (a + b), alpha) <= 0.5 * pinball(y, a, alpha) +
                                                  0.5 * pinball(y, b, alpha) + 1e-12);
  }
}

namespace {

// Brute-force reference for the per-instance loss tensor.
LossTensor reference_loss(const Tensor& preds, const Tensor& targets, const QuantileSet& qs) {
  const std::size_t w = preds.dim(0), t_out = preds.dim(1), n = preds.dim(2), q = preds.dim(3);
  LossTensor ref(n, w, q);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t k = 0; k < q; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t < t_out; ++t) {
          acc += pinball(targets[(j * t_out + t) * n + i],
                         preds[((j * t_out + t) * n + i) * q + k], qs.levels[k]);
        }
        ref.at(i, j, k) = acc / static_cast<double>(t_out);
      }
    }
  }
  return ref;
}

}  // namespace

TEST_CASE("instance loss tensor against a triple-loop reference") {
  QuantileSet qs = QuantileSet::defaults();
  RandomStream rs(8);
  Tensor preds({4, 3, 5, 3});
  Tensor targets({4, 3, 5});
  for (auto& v : preds.values()) v = rs.uniform(-3.0, 3.0);
  for (auto& v : targets.values()) v = rs.uniform(-3.0, 3.0);

  LossTensor got = instance_loss_tensor(preds, targets, qs);
  LossTensor ref = reference_loss(preds, targets, qs);
  for (std::size_t i = 0; i < got.values.size(); ++i) CHECK(got.values[i] == ref.values[i]);

  SECTION("zero when predictions equal targets") {
    Tensor perfect({2, 3, 2, 3});
    Tensor tg({2, 3, 2});
    for (auto& v : tg.values()) v = rs.uniform(-1.0, 1.0);
    for (std::size_t flat = 0; flat < tg.size(); ++flat) {
      for (std::size_t k = 0; k < 3; ++k) perfect[flat * 3 + k] = tg[flat];
    }
    LossTensor zero = instance_loss_tensor(perfect, tg, qs);
    for (double v : zero.values.values()) CHECK(v == 0.0);
  }

  SECTION("node permutation permutes the tensor") {
    const std::size_t n = 5;
    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    Tensor preds_p(preds.shape());
    Tensor targets_p(targets.shape());
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t c = 0; c < n; ++c) {
          targets_p[(j * 3 + t) * n + c] = targets[(j * 3 + t) * n + perm[c]];
          for (std::size_t k = 0; k < 3; ++k) {
            preds_p[((j * 3 + t) * n + c) * 3 + k] = preds[((j * 3 + t) * n + perm[c]) * 3 + k];
          }
        }
      }
    }
    LossTensor lp = instance_loss_tensor(preds_p, targets_p, qs);
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t k = 0; k < 3; ++k) {
          CHECK(lp.at(c, j, k) == got.at(perm[c], j, k));
        }
      }
    }
  }
}

TEST_CASE("masked objective") {
  LossTensor loss(2, 2, 2);
  const double vals[] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
  std::copy(std::begin(vals), std::end(vals), loss.values.data());

  SECTION("full mask is the plain mean") {
    Tensor ones = Tensor::full({2, 2, 2}, 1.0);
    MaskedValue m = masked_objective(loss, ones);
    CHECK(m.any_active);
    CHECK(m.value == loss.values.mean());
  }
  SECTION("all-zero mask reports no active instances") {
    Tensor zeros({2, 2, 2});
    MaskedValue m = masked_objective(loss, zeros);
    CHECK_FALSE(m.any_active);
    CHECK(m.value == 0.0);
  }
  SECTION("mixed weights match the hand-computed weighted mean") {
    Tensor v({2, 2, 2}, {1.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.0, 0.25});
    // (1*1 + 0.5*3 + 1*5 + 0.25*8) / (1 + 0.5 + 1 + 0.25) = 9.5 / 2.75
    MaskedValue m = masked_objective(loss, v);
    CHECK_THAT(m.value, Catch::Matchers::WithinAbs(9.5 / 2.75, 1e-15));
  }
}

TEST_CASE("self-paced objective identities") {
  RandomStream rs(77);
  for (int trial = 0; trial < 50; ++trial) {
    LossTensor loss(2, 3, 2);
    for (auto& v : loss.values.values()) v = rs.uniform(0.0, 2.0);
    const double lambda = rs.uniform(0.1, 2.5);

    Tensor v = instance_mask(loss, lambda);
    double expected = 0.0;
    for (double l : loss.values.values()) {
      if (l < lambda) expected += l - lambda;
    }
    CHECK_THAT(spl_objective(loss, v, lambda), Catch::Matchers::WithinAbs(expected, 1e-12));
    CHECK(spl_objective(loss, v, lambda) <= 1e-12);
  }

  SECTION("lambda above the maximum forces a negative value under full mask") {
    LossTensor loss(1, 1, 3);
    loss.values = Tensor({1, 1, 3}, {0.5, 0.7, 0.9});
    Tensor ones = Tensor::full({1, 1, 3}, 1.0);
    CHECK(spl_objective(loss, ones, 1.0) < 0.0);
    Tensor zeros({1, 1, 3});
    CHECK(spl_objective(loss, zeros, 1.0) == 0.0);
  }
}

TEST_CASE("point metrics hand computation") {
  Tensor targets({2}, {3.0, 4.0});
  Tensor preds({2}, {0.0, 0.0});
  PointMetrics m = point_metrics(preds, targets);
  CHECK_THAT(m.rmse, Catch::Matchers::WithinAbs(std::sqrt(12.5), 1e-12));
  CHECK_THAT(m.mae, Catch::Matchers::WithinAbs(3.5, 1e-12));
  CHECK_THAT(m.mape_percent, Catch::Matchers::WithinAbs(100.0, 1e-12));

  SECTION("perfect prediction") {
    PointMetrics z = point_metrics(targets, targets);
    CHECK(z.rmse == 0.0);
    CHECK(z.mae == 0.0);
    CHECK(z.mape_percent == 0.0);
  }
  SECTION("zero targets leave MAPE only") {
    Tensor t2({2}, {0.0, 4.0});
    Tensor p2({2}, {1.0, 5.0});
    PointMetrics m2 = point_metrics(p2, t2);
    CHECK_THAT(m2.rmse, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(m2.mae, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(m2.mape_percent, Catch::Matchers::WithinAbs(25.0, 1e-12));
  }
  SECTION("every target under the guard is an error") {
    Tensor t3({2}, {0.0, 1e-6});
    Tensor p3({2}, {1.0, 1.0});
    CHECK_THROWS_AS(point_metrics(p3, t3), ContractError);
  }
}

TEST_CASE("quantile report and the Q50 = MAE/2 identity") {
  QuantileSet qs = QuantileSet::defaults();
  RandomStream rs(15);
  Tensor preds({6, 4, 3, 3});
  Tensor targets({6, 4, 3});
  for (auto& v : preds.values()) v = rs.uniform(10.0, 90.0);
  for (auto& v : targets.values()) v = rs.uniform(10.0, 90.0);

  MetricsReport report = quantile_report(preds, targets, qs, {1, 2, 4});
  for (const auto& row : report.rows) {
    CHECK(row.q_loss[1] == row.mae / 2.0);  // exact, not approximate
  }

  SECTION("perfect forecasts zero every entry") {
    Tensor perfect(preds.shape());
    for (std::size_t flat = 0; flat < targets.size(); ++flat) {
      for (std::size_t k = 0; k < 3; ++k) perfect[flat * 3 + k] = targets[flat];
    }
    MetricsReport zero = quantile_report(perfect, targets, qs, {1, 4});
    for (const auto& row : zero.rows) {
      CHECK(row.rmse == 0.0);
      CHECK(row.mae == 0.0);
      for (double q : row.q_loss) CHECK(q == 0.0);
    }
  }
  SECTION("horizon outside the output block") {
    CHECK_THROWS_AS(quantile_report(preds, targets, qs, {5}), ContractError);
    CHECK_THROWS_AS(quantile_report(preds, targets, qs, {0}), ContractError);
  }
}

TEST_CASE("the constant minimizing mean pinball is the empirical quantile") {
  RandomStream rs(1234);
  const std::size_t n = 4000;
  std::vector<double> sample(n);
  for (auto& s : sample) s = rs.normal() * 3.0 + 1.0;
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());

  for (double alpha : {0.1, 0.5, 0.9}) {
    // brute-force scan over candidate constants on a percentile grid
    double best_c = sorted.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; r += 4) {
      const double c = sorted[r];
      double loss = 0.0;
      for (double y : sample) loss += pinball(y, c, alpha);
      if (loss < best_loss) {
        best_loss = loss;
        best_c = c;
      }
    }
    const double rank =
        std::lower_bound(sorted.begin(), sorted.end(), best_c) - sorted.begin();
    const double percentile = rank / static_cast<double>(n);
    CHECK_THAT(percentile, Catch::Matchers::WithinAbs(alpha, 0.02));
  }
}
