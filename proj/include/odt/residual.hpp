#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "odt/common.hpp"

namespace odt {

struct GpHyper {
  double length_scale = 1.0;  // MBit/s
  double sigma_f = 1.0;
  double sigma_n = 0.1;  // 0 selects noiseless interpolation (with jitter)
};

/// Gaussian-process posterior of the measured rate S given the predicted
/// rate S~, with prior mean m(S~) = S~ and a squared-exponential kernel.
class ResidualModel {
 public:
  static ResidualModel fit(std::span<const double> predicted, std::span<const double> measured, GpHyper hyper);

  double mean(double s_tilde) const;
  /// Latent-function variance (excludes observation noise).
  double variance(double s_tilde) const;
  /// Variance of a new observation: variance + sigma_n^2.
  double predictive_variance(double s_tilde) const { return variance(s_tilde) + hyper_.sigma_n * hyper_.sigma_n; }

  /// Batched mean/latent variance (one triangular solve for all queries).
  void predict_many(std::span<const double> queries, std::vector<double>& mean, std::vector<double>& var) const;

  const GpHyper& hyper() const { return hyper_; }
  std::size_t size() const { return static_cast<std::size_t>(x_.size()); }
  double log_marginal_likelihood() const { return lml_; }

 private:
  double kernel(double a, double b) const;

  GpHyper hyper_;
  Eigen::VectorXd x_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd L_;
  double lml_ = 0.0;
};

/// Draw from N(mean, predictive variance), resampling negative draws up to 8
/// times before clamping at 0.
double sample_virtual_ground_truth(const ResidualModel& model, double s_tilde, Rng& rng);
double sample_truncated(double mean, double variance, Rng& rng);

struct GpGrid {
  std::vector<double> length_scales{0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> sigma_f{0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> sigma_n{0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::size_t search_pairs = 500;  // subset used to score the grid
  std::size_t max_pairs = 1000;    // subset used for the final posterior
};

/// Log marginal likelihood of the residuals y - x under every grid point.
GpHyper select_hyper(std::span<const double> predicted, std::span<const double> measured, const GpGrid& grid,
                     std::uint64_t seed);

/// Seeded subsample, grid search, final fit.
ResidualModel fit_residual_model_grid(std::span<const double> predicted, std::span<const double> measured,
                                      const GpGrid& grid, std::uint64_t seed);

/// Posterior mean/variance tabulated on a uniform grid for fast replay.
/// Queries outside the grid fall back to the exact model.
class TabulatedResidual {
 public:
  TabulatedResidual() = default;
  TabulatedResidual(ResidualModel model, double lo, double hi, std::size_t points = 512);

  double mean(double s_tilde) const;
  double predictive_variance(double s_tilde) const;
  double sample(double s_tilde, Rng& rng) const;
  const ResidualModel& model() const { return model_; }

 private:
  ResidualModel model_;
  double lo_ = 0.0;
  double step_ = 0.0;
  std::vector<double> mean_;
  std::vector<double> var_;
};

}  // namespace odt
