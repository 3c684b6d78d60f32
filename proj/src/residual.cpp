#include "odt/residual.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace odt {

namespace {

constexpr double kJitter = 1e-10;

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void check_pairs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("residual model: predicted/measured length mismatch");
  if (x.size() < 2) throw Error("residual model: need at least 2 pairs");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error("residual model: non-finite input");
  }
}

}  // namespace

double ResidualModel::kernel(double a, double b) const {
  const double d = (a - b) / hyper_.length_scale;
  return hyper_.sigma_f * hyper_.sigma_f * std::exp(-0.5 * d * d);
}

ResidualModel ResidualModel::fit(std::span<const double> predicted, std::span<const double> measured, GpHyper hyper) {
  check_pairs(predicted, measured);
  if (!(hyper.length_scale > 0.0) || !(hyper.sigma_f > 0.0) || !(hyper.sigma_n >= 0.0)) {
    throw Error("residual model: hyperparameters must be positive (sigma_n >= 0)");
  }
  ResidualModel m;
  m.hyper_ = hyper;
  const auto n = static_cast<Eigen::Index>(predicted.size());
  m.x_ = Eigen::Map<const Eigen::VectorXd>(predicted.data(), n);
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(measured.data(), n) - m.x_;
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = m.kernel(m.x_(i), m.x_(j));
  }
  K.diagonal().array() += hyper.sigma_n * hyper.sigma_n + kJitter * hyper.sigma_f * hyper.sigma_f;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "residual model: Cholesky factorization failed (n = " << n << ", eigenvalues in ["
        << es.eigenvalues().minCoeff() << ", " << es.eigenvalues().maxCoeff() << "], condition ~ "
        << es.eigenvalues().maxCoeff() / std::abs(es.eigenvalues().minCoeff()) << ")";
    throw Error(msg.str());
  }
  m.L_ = llt.matrixL();
  m.alpha_ = llt.solve(r);
  m.lml_ = -0.5 * r.dot(m.alpha_) - m.L_.diagonal().array().log().sum() -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return m;
}

double ResidualModel::mean(double s) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x_.size(); ++i) acc += kernel(s, x_(i)) * alpha_(i);
  return s + acc;
}

double ResidualModel::variance(double s) const {
  Eigen::VectorXd k(x_.size());
  for (Eigen::Index i = 0; i < x_.size(); ++i) k(i) = kernel(s, x_(i));
  L_.triangularView<Eigen::Lower>().solveInPlace(k);
  return std::max(0.0, hyper_.sigma_f * hyper_.sigma_f - k.squaredNorm());
}

void ResidualModel::predict_many(std::span<const double> q, std::vector<double>& mean,
                                 std::vector<double>& var) const {
  const auto m = static_cast<Eigen::Index>(q.size());
  Eigen::MatrixXd Ks(x_.size(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < x_.size(); ++i) Ks(i, j) = kernel(q[static_cast<std::size_t>(j)], x_(i));
  }
  mean.resize(q.size());
  var.resize(q.size());
  const Eigen::VectorXd mu = Ks.transpose() * alpha_;
  L_.triangularView<Eigen::Lower>().solveInPlace(Ks);
  for (Eigen::Index j = 0; j < m; ++j) {
    mean[static_cast<std::size_t>(j)] = q[static_cast<std::size_t>(j)] + mu(j);
    var[static_cast<std::size_t>(j)] = std::max(0.0, hyper_.sigma_f * hyper_.sigma_f - Ks.col(j).squaredNorm());
  }
}

double sample_truncated(double mean, double variance, Rng& rng) {
  const double sd = std::sqrt(std::max(0.0, variance));
  if (sd == 0.0) return std::max(0.0, mean);
  std::normal_distribution<double> gauss(mean, sd);
  for (int attempt = 0; attempt <= 8; ++attempt) {
    const double v = gauss(rng);
    if (v >= 0.0) return v;
  }
  return 0.0;
}

double sample_virtual_ground_truth(const ResidualModel& model, double s_tilde, Rng& rng) {
  if (!std::isfinite(s_tilde)) throw Error("virtual ground truth: non-finite prediction");
  return sample_truncated(model.mean(s_tilde), model.predictive_variance(s_tilde), rng);
}

GpHyper select_hyper(std::span<const double> predicted, std::span<const double> measured, const GpGrid& grid,
                     std::uint64_t seed) {
  check_pairs(predicted, measured);
  if (grid.length_scales.empty() || grid.sigma_f.empty() || grid.sigma_n.empty()) {
    throw Error("residual model: empty hyperparameter grid");
  }
  auto idx = shuffled_indices(predicted.size(), seed);
  idx.resize(std::min(idx.size(), std::max<std::size_t>(2, grid.search_pairs)));
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd x(n);
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = predicted[idx[static_cast<std::size_t>(i)]];
    r(i) = measured[idx[static_cast<std::size_t>(i)]] - x(i);
  }
  // For a fixed length scale, K = sf^2 Q diag(l) Q^T + sn^2 I, so every
  // (sf, sn) pair costs O(n) once the unit kernel is diagonalized.
  GpHyper best;
  double best_lml = -std::numeric_limits<double>::infinity();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (double ell : grid.length_scales) {
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double d = (x(i) - x(j)) / ell;
        K(i, j) = K(j, i) = std::exp(-0.5 * d * d);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXd proj = es.eigenvectors().transpose() * r;
    for (double sf : grid.sigma_f) {
      for (double sn : grid.sigma_n) {
        double lml = -0.5 * static_cast<double>(n) * log2pi;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double ev = sf * sf * (lambda(i) + kJitter) + sn * sn;
          lml -= 0.5 * (proj(i) * proj(i) / ev + std::log(ev));
        }
        if (lml > best_lml) {
          best_lml = lml;
          best = {ell, sf, sn};
        }
      }
    }
  }
  return best;
}

ResidualModel fit_residual_model_grid(std::span<const double> predicted, std::span<const double> measured,
                                      const GpGrid& grid, std::uint64_t seed) {
  check_pairs(predicted, measured);
  const GpHyper hyper = select_hyper(predicted, measured, grid, derive_seed(seed, "residual.search"));
  auto idx = shuffled_indices(predicted.size(), derive_seed(seed, "residual.subsample"));
  idx.resize(std::min(idx.size(), std::max<std::size_t>(2, grid.max_pairs)));
  std::sort(idx.begin(), idx.end());
  std::vector<double> x;
  std::vector<double> y;
  for (auto i : idx) {
    x.push_back(predicted[i]);
    y.push_back(measured[i]);
  }
  return ResidualModel::fit(x, y, hyper);
}

TabulatedResidual::TabulatedResidual(ResidualModel model, double lo, double hi, std::size_t points)
    : model_(std::move(model)), lo_(lo) {
  if (!(hi > lo) || points < 2) throw Error("tabulated residual: bad grid");
  step_ = (hi - lo) / static_cast<double>(points - 1);
  std::vector<double> q(points);
  for (std::size_t i = 0; i < points; ++i) q[i] = lo + step_ * static_cast<double>(i);
  model_.predict_many(q, mean_, var_);
  const double noise = model_.hyper().sigma_n * model_.hyper().sigma_n;
  for (auto& v : var_) v += noise;
}

double TabulatedResidual::mean(double s) const {
  const double pos = (s - lo_) / step_;
  if (mean_.empty() || pos < 0.0 || pos > static_cast<double>(mean_.size() - 1)) return model_.mean(s);
  const auto i = std::min(static_cast<std::size_t>(pos), mean_.size() - 2);
  const double f = pos - static_cast<double>(i);
  return mean_[i] + f * (mean_[i + 1] - mean_[i]);
}

double TabulatedResidual::predictive_variance(double s) const {
  const double pos = (s - lo_) / step_;
  if (var_.empty() || pos < 0.0 || pos > static_cast<double>(var_.size() - 1)) {
    return model_.predictive_variance(s);
  }
  const auto i = std::min(static_cast<std::size_t>(pos), var_.size() - 2);
  const double f = pos - static_cast<double>(i);
  return var_[i] + f * (var_[i + 1] - var_[i]);
}

double TabulatedResidual::sample(double s, Rng& rng) const {
  if (!std::isfinite(s)) throw Error("virtual ground truth: non-finite prediction");
  return sample_truncated(mean(s), predictive_variance(s), rng);
}

}  // namespace odt
