#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odt/blackspot.hpp"
#include "odt/kpi.hpp"
#include "odt/predictor.hpp"
#include "odt/residual.hpp"
#include "odt/schemes.hpp"
#include "odt/trace.hpp"

namespace odt {

// --- predictors seen by the engine -----------------------------------------

class RatePredictor {
 public:
  virtual ~RatePredictor() = default;
  /// Predicted rate (MBit/s) for sending `payload_bytes` in the context `s`.
  virtual double predict(const ContextSample& s, double payload_bytes) const = 0;
};

class ForestPredictor : public RatePredictor {
 public:
  ForestPredictor(std::shared_ptr<const ForestModel> model, CellEncoder cells)
      : model_(std::move(model)), cells_(std::move(cells)) {}
  double predict(const ContextSample& s, double payload_bytes) const override;
  const ForestModel& model() const { return *model_; }
  const CellEncoder& cells() const { return cells_; }

 private:
  std::shared_ptr<const ForestModel> model_;
  CellEncoder cells_;
};

class NetPredictor : public RatePredictor {
 public:
  NetPredictor(std::shared_ptr<const IncrementalNetModel> model, CellEncoder cells)
      : model_(std::move(model)), cells_(std::move(cells)) {}
  double predict(const ContextSample& s, double payload_bytes) const override;

 private:
  std::shared_ptr<const IncrementalNetModel> model_;
  CellEncoder cells_;
};

/// Returns the trace's measured rate; for oracle experiments.
class OraclePredictor : public RatePredictor {
 public:
  double predict(const ContextSample& s, double payload_bytes) const override;
};

// --- virtual ground truth ---------------------------------------------------

/// Converts a prediction into a sampled achieved rate. Positions inside the
/// black-spot map use a separately fitted residual model.
class GroundTruthModel {
 public:
  /// S^ = S~ exactly.
  static GroundTruthModel passthrough();
  /// Fits one residual model outside and one inside the map (the inside one
  /// falls back to the outside model below `min_inside` samples).
  static GroundTruthModel fit(std::span<const ErrorSample> samples, std::shared_ptr<const BlackSpotMap> map,
                              const GpGrid& grid, std::uint64_t seed, std::size_t min_inside = 30);

  double sample(double s_tilde, Vec2 position, Rng& rng) const;
  double mean(double s_tilde, Vec2 position) const;
  bool is_passthrough() const { return outside_ == nullptr; }
  const ResidualModel* outside_model() const { return outside_ ? &outside_->model() : nullptr; }
  const ResidualModel* inside_model() const { return inside_ ? &inside_->model() : nullptr; }

 private:
  const TabulatedResidual* pick(Vec2 position) const;

  std::shared_ptr<const TabulatedResidual> outside_;
  std::shared_ptr<const TabulatedResidual> inside_;
  std::shared_ptr<const BlackSpotMap> map_;
};

// --- engine -----------------------------------------------------------------

struct SimConfig {
  double sensor_rate_bytes = 50000.0;  // generated per second
  double min_rate_mbits = 0.1;         // floor for sampled rates so durations stay finite
  bool flush_at_end = true;

  void validate() const;
};

struct SimModels {
  std::shared_ptr<const RatePredictor> predictor;
  std::shared_ptr<const GroundTruthModel> truth;
  const PrbTables* tables = nullptr;  // nullptr selects the embedded tables
  PowerModelParams power;
};

struct RunLogRow {
  TransmissionRecord record;
  Vec2 position;
  double sinr = 0.0;
  double s_tilde = 0.0;
  double s_hat = 0.0;  // sampled rate before the floor
  double prbs = 0.0;   // 0 when flagged
  double energy = 0.0;
  bool forced = false;  // deadline
  bool flush = false;   // end-of-trace flush
};

struct RunLog {
  std::vector<RunLogRow> rows;
  std::vector<TransmissionRecord> records() const;
};

struct EpochResult {
  std::size_t epoch = 0;
  double mean_rate = 0.0;
  double mean_aoi = 0.0;
  std::size_t transmissions = 0;
  double total_prbs = 0.0;
  double total_energy = 0.0;
  double generated_bytes = 0.0;
  double transmitted_bytes = 0.0;
  double buffered_bytes = 0.0;  // left in the buffer at the end (0 with flush)
};

struct EpochOutcome {
  EpochResult result;
  RunLog log;
};

/// Replays one trace: one sensor packet and one decision slot per sample.
EpochOutcome run_epoch(const Trace& trace, SchemeAgent& agent, const SimModels& models, const SimConfig& sim,
                       std::uint64_t seed, std::size_t epoch_index = 0);

using EpochCallback = std::function<void(const EpochOutcome&)>;

/// Epoch e replays traces[e % n] with seed derive_seed(seed, "epoch", e);
/// the agent keeps its learning state across epochs.
std::vector<EpochResult> train_epochs(std::span<const Trace> traces, SchemeAgent& agent, const SimModels& models,
                                      const SimConfig& sim, std::size_t n_epochs, std::uint64_t seed,
                                      const EpochCallback& on_epoch = {});

/// First epoch from which the relative change of the windowed moving average
/// stays below `tol` for the rest of the series.
std::optional<std::size_t> convergence_epoch(std::span<const double> series, std::size_t window, double tol);

std::string runlog_header();
std::string format_runlog(const RunLog& log);
void write_runlog(const RunLog& log, const std::filesystem::path& path);
RunLog parse_runlog(const std::string& text);

std::string epochs_header();
std::string format_epochs(std::span<const EpochResult> epochs);

}  // namespace odt
