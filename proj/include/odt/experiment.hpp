#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "odt/blackspot.hpp"
#include "odt/ddns.hpp"
#include "odt/kpi.hpp"
#include "odt/kvfile.hpp"
#include "odt/predictor.hpp"
#include "odt/residual.hpp"
#include "odt/schemes.hpp"
#include "odt/trace.hpp"

namespace odt {

struct DriftOptions {
  DriftParams params;
  int pretrain_drives = 2;
  int stream_drives = 2;
  std::vector<std::filesystem::path> stream_files;
  KeyValueFile synthetic_overrides;  // applied on top of `synthetic.*` for the stream
};

/// Fully resolved experiment description. See configs/ for the key list.
struct ExperimentConfig {
  KeyValueFile source;

  std::uint64_t seed = 1;
  std::size_t epochs = 1;
  std::size_t eval_epochs = 0;  // frozen epochs after training; KPIs come from these when > 0
  std::string scheme = "periodic";
  std::vector<std::string> compare_schemes;
  std::filesystem::path out = "out";

  std::string trace_source = "synthetic";  // synthetic | files
  std::vector<std::filesystem::path> train_files;
  std::vector<std::filesystem::path> validation_files;
  std::vector<std::filesystem::path> replay_files;
  TraceSchema schema;
  SyntheticConfig synthetic;
  int train_drives = 3;
  int validation_drives = 2;
  int replay_drives = 3;

  std::string predictor_kind = "forest";  // forest | net
  ForestParams forest;
  NetParams net;
  int net_epochs = 500;
  std::filesystem::path predictor_model;  // load instead of training when set

  bool blackspots_enabled = true;
  BlackSpotConfig blackspot;
  std::vector<double> tradeoff_thresholds{8.0, 6.0, 5.0, 4.0, 3.0, 2.5, 2.0, 1.5, 1.0, 0.5};

  std::string residual_kind = "gp";  // gp | passthrough
  GpGrid grid;

  SchemeConfig scheme_config;
  std::optional<double> s_star;  // derived from training targets when absent
  std::optional<double> s_max;
  double s_star_quantile = 0.75;

  SimConfig sim;
  PowerModelParams power;
  std::filesystem::path tables_file;

  DriftOptions drift;

  /// Rejects unknown keys and checks that referenced files exist.
  static ExperimentConfig parse(const KeyValueFile& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Names accepted by sweep().
const std::vector<std::string>& sweep_axes();
void apply_axis(ExperimentConfig& config, const std::string& axis, double value);

/// Trained artifacts shared by every run of one configuration.
struct ExperimentModels {
  std::vector<Trace> train;
  std::vector<Trace> validation;
  std::vector<Trace> replay;
  CellEncoder cells;
  std::shared_ptr<const ForestModel> forest;
  std::shared_ptr<const IncrementalNetModel> net;
  std::shared_ptr<const RatePredictor> predictor;
  RegressionMetrics validation_metrics;
  double s_star = 0.0;
  double s_max = 0.0;
  std::vector<ErrorSample> errors;
  std::shared_ptr<const BlackSpotMap> blackspots;
  std::shared_ptr<const GroundTruthModel> truth;
  std::shared_ptr<const PrbTables> tables;
};

std::vector<Trace> load_traces(const ExperimentConfig& config);  // all three sets, for inspection
ExperimentModels build_models(const ExperimentConfig& config);
/// Re-runs black-spot selection and residual fitting with the config's
/// current black-spot settings, keeping traces and predictor.
void refit_blackspots(const ExperimentConfig& config, ExperimentModels& models);
SchemeConfig resolved_scheme_config(const ExperimentConfig& config, const ExperimentModels& models);

struct ExperimentResult {
  std::string scheme;
  std::vector<EpochResult> epochs;
  std::vector<EpochResult> eval;
  std::vector<RunLog> logs;  // training epochs then evaluation epochs
  RunKpis kpis;
  std::optional<std::size_t> convergence;
};

/// Training plus optional frozen evaluation; writes the bundle when
/// `out` is non-empty.
ExperimentResult run_with_models(const ExperimentConfig& config, const ExperimentModels& models,
                                 const std::string& scheme, const std::filesystem::path& out);
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SweepRow {
  double value = 0.0;
  RunKpis kpis;
};

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& axis, const std::vector<double>& values);

struct CompareRow {
  std::string scheme;
  RunKpis kpis;
};

std::vector<CompareRow> compare_schemes(const ExperimentConfig& config, const std::vector<std::string>& schemes);

struct ClusterReport {
  BlackSpotMap map;
  std::vector<TradeoffRow> tradeoff;
  DwellReport dwell;
};

ClusterReport run_cluster(const ExperimentConfig& config);
DriftCurve run_drift(const ExperimentConfig& config);

std::string format_sweep(const std::string& axis, const std::vector<SweepRow>& rows);
std::string format_compare(const std::vector<CompareRow>& rows);
std::string format_compare_deltas(const std::vector<CompareRow>& rows);
std::string format_tradeoff(const std::vector<TradeoffRow>& rows);
std::string format_drift(const DriftCurve& curve);

}  // namespace odt
