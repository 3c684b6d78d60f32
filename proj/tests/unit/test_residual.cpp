#include <doctest.h>

#include <cmath>

#include "odt/residual.hpp"

using namespace odt;

namespace {

double se(double a, double b, const GpHyper& h) {
  const double d = a - b;
  return h.sigma_f * h.sigma_f * std::exp(-0.5 * d * d / (h.length_scale * h.length_scale));
}

}  // namespace

TEST_CASE("two point posterior by hand") {
  const GpHyper h{2.0, 1.5, 0.3};
  const std::vector<double> x{1.0, 4.0};
  const std::vector<double> y{2.0, 3.0};
  const auto m = ResidualModel::fit(x, y, h);
  const double q = 2.5;
  const double n2 = h.sigma_n * h.sigma_n;
  const double k11 = se(1, 1, h) + n2, k12 = se(1, 4, h), k22 = se(4, 4, h) + n2;
  const double det = k11 * k22 - k12 * k12;
  const double r1 = y[0] - x[0], r2 = y[1] - x[1];
  const double a1 = (k22 * r1 - k12 * r2) / det;
  const double a2 = (-k12 * r1 + k11 * r2) / det;
  const double s1 = se(q, 1, h), s2 = se(q, 4, h);
  const double mean = q + s1 * a1 + s2 * a2;
  const double quad = (s1 * (k22 * s1 - k12 * s2) + s2 * (-k12 * s1 + k11 * s2)) / det;
  const double var = h.sigma_f * h.sigma_f - quad;
  CHECK(std::abs(m.mean(q) - mean) <= 1e-9);
  CHECK(std::abs(m.variance(q) - var) <= 1e-9);
  CHECK(std::abs(m.predictive_variance(q) - var - n2) <= 1e-9);
}

TEST_CASE("noiseless posterior interpolates") {
  const GpHyper h{1.0, 2.0, 0.0};
  const std::vector<double> x{0.0, 1.5, 3.0, 7.0};
  const std::vector<double> y{0.5, 1.0, 4.0, 6.5};
  const auto m = ResidualModel::fit(x, y, h);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(m.mean(x[i]) - y[i]) <= 1e-8);
    CHECK(std::abs(m.variance(x[i])) <= 1e-8);
    Rng rng(i);
    CHECK(std::abs(sample_virtual_ground_truth(m, x[i], rng) - m.mean(x[i])) <= 1e-3);
  }
}

TEST_CASE("far queries return to the prior") {
  const GpHyper h{1.0, 2.0, 0.1};
  const std::vector<double> x{0.0, 1.0, 2.0};
  const std::vector<double> y{3.0, 4.0, 5.0};
  const auto m = ResidualModel::fit(x, y, h);
  CHECK(m.mean(100.0) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(m.variance(100.0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("posterior variance is never negative") {
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(20.0 * uniform01(rng));
    y.push_back(x.back() + g(rng));
  }
  const auto m = ResidualModel::fit(x, y, GpHyper{0.5, 1.0, 0.2});
  std::vector<double> q(10000), mean, var;
  for (auto& v : q) v = -5.0 + 30.0 * uniform01(rng);
  m.predict_many(q, mean, var);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(var[i] >= 0.0);
    if (i % 500 == 0) {
      CHECK(mean[i] == doctest::Approx(m.mean(q[i])).epsilon(1e-9));
      CHECK(var[i] == doctest::Approx(m.variance(q[i])).epsilon(1e-6));
    }
  }
}

TEST_CASE("fit errors") {
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(ResidualModel::fit(one, one, GpHyper{}), Error);
  const std::vector<double> bad{1.0, std::nan("")};
  const std::vector<double> ok{1.0, 2.0};
  CHECK_THROWS_AS(ResidualModel::fit(bad, ok, GpHyper{}), Error);
  CHECK_THROWS_AS(ResidualModel::fit(ok, ok, GpHyper{-1.0, 1.0, 0.1}), Error);
}

TEST_CASE("sampling") {
  const GpHyper h{2.0, 1.0, 0.5};
  const std::vector<double> x{0.0, 5.0, 10.0};
  const std::vector<double> y{1.0, 6.0, 9.0};
  const auto m = ResidualModel::fit(x, y, h);
  Rng rng(11);
  const int n = 10000;
  double acc = 0;
  for (int i = 0; i < n; ++i) acc += sample_virtual_ground_truth(m, 5.0, rng);
  const double se_mean = std::sqrt(m.predictive_variance(5.0) / n);
  CHECK(std::abs(acc / n - m.mean(5.0)) < 3 * se_mean);

  Rng r2(3);
  for (int i = 0; i < 1000; ++i) CHECK(sample_truncated(-5.0, 1.0, r2) >= 0.0);
  CHECK(sample_truncated(2.5, 0.0, r2) == 2.5);
  Rng a(8), b(8);
  CHECK(sample_truncated(1.0, 4.0, a) == sample_truncated(1.0, 4.0, b));
}

TEST_CASE("grid search prefers the generating noise level") {
  Rng rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x, y;
  for (int i = 0; i < 400; ++i) {
    x.push_back(30.0 * uniform01(rng));
    y.push_back(x.back() + 2.0 * g(rng));
  }
  GpGrid grid;
  const auto h = select_hyper(x, y, grid, 1);
  CHECK(h.sigma_n == 2.0);
  const auto m = fit_residual_model_grid(x, y, grid, 1);
  CHECK(m.hyper().sigma_n == h.sigma_n);
  CHECK(std::abs(m.mean(15.0) - 15.0) < 1.0);

  const TabulatedResidual t(m, -1.0, 31.0);
  for (double q = 0.0; q < 30.0; q += 0.37) {
    CHECK(t.mean(q) == doctest::Approx(m.mean(q)).epsilon(1e-3));
    CHECK(t.predictive_variance(q) == doctest::Approx(m.predictive_variance(q)).epsilon(1e-3));
  }
  CHECK(t.mean(80.0) == doctest::Approx(m.mean(80.0)));
}
