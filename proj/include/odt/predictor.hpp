#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odt/common.hpp"
#include "odt/trace.hpp"

namespace odt {

// --- features ---------------------------------------------------------------

inline constexpr std::size_t kFeatureCount = 8;

/// Network, mobility and application context in a fixed order:
/// rsrp, rsrq, sinr, cqi, ta, velocity, cell code, payload bytes.
using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "rsrp", "rsrq", "sinr", "cqi", "ta", "velocity", "cell_id", "payload_bytes"};

/// Frequency-ranked cell id codes fixed at training time. The most frequent
/// cell gets code 0; unseen cells map to kUnknown.
class CellEncoder {
 public:
  static constexpr double kUnknown = -1.0;

  CellEncoder() = default;
  explicit CellEncoder(std::map<std::int64_t, int> codes) : codes_(std::move(codes)) {}

  static CellEncoder fit(std::span<const Trace> traces);
  double encode(std::int64_t cell_id) const;
  const std::map<std::int64_t, int>& codes() const { return codes_; }

 private:
  std::map<std::int64_t, int> codes_;
};

FeatureVector make_features(const ContextSample& sample, double payload_bytes, const CellEncoder& cells);

struct Dataset {
  std::vector<FeatureVector> x;
  std::vector<double> y;  // MBit/s

  std::size_t size() const { return y.size(); }
  void push(const FeatureVector& f, double target) {
    x.push_back(f);
    y.push_back(target);
  }
};

/// Rows for every sample that carries both a measured rate and a payload.
Dataset build_dataset(std::span<const Trace> traces, const CellEncoder& cells);

// --- metrics ----------------------------------------------------------------

struct RegressionMetrics {
  std::optional<double> r2;  // nullopt when the targets are constant
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

RegressionMetrics evaluate(std::span<const double> predictions, std::span<const double> targets);

// --- regression forest ------------------------------------------------------

struct ForestParams {
  int n_trees = 100;
  int max_depth = 15;
  std::uint64_t seed = 1;
  int features_per_split = 3;  // ceil(sqrt(8))
  bool bootstrap = true;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean training target (leaves)
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;
  int depth() const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

/// Bagged regression trees; prediction is the mean over trees, clamped at 0.
class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<RegressionTree> trees, ForestParams params, std::size_t n_features);

  double predict(std::span<const double> x) const;
  double predict_raw_mean(std::span<const double> x) const;
  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }

 private:
  std::vector<RegressionTree> trees_;
  ForestParams params_;
  std::size_t n_features_ = kFeatureCount;
};

/// Tree i is grown from Rng(params.seed + i), so a forest with more trees
/// extends a smaller one without changing the shared prefix.
ForestModel train_forest(const Dataset& data, const ForestParams& params);

// --- incremental neural network --------------------------------------------

struct NetParams {
  std::size_t hidden = 10;
  double learning_rate = 0.1;
  double momentum = 0.001;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

/// inputs -> sigmoid(hidden) -> sigmoid(hidden) -> identity. Inputs are
/// standardized with stored moments; targets are divided by a power-of-two
/// scale so that rescaling is exact.
class IncrementalNetModel {
 public:
  /// Uniform [-0.5, 0.5] weights drawn from params.seed.
  explicit IncrementalNetModel(NetParams params, std::size_t n_inputs = kFeatureCount);
  static IncrementalNetModel zeros(NetParams params, std::size_t n_inputs = kFeatureCount);

  /// Fixes input standardization and target scale from `data`.
  void set_normalization(const Dataset& data);
  /// Minibatch SGD over shuffled epochs; sets normalization first.
  void fit_offline(const Dataset& data, int epochs, std::uint64_t shuffle_seed);

  double predict(std::span<const double> x) const;

  /// Buffers the sample; returns true when the buffer reached batch_size and
  /// one momentum step was applied (the buffer is then cleared).
  bool update_online(std::span<const double> x, double target);

  std::size_t buffered() const { return buffer_y_.size(); }
  std::size_t n_inputs() const { return n_inputs_; }
  const NetParams& params() const { return params_; }
  double target_scale() const { return target_scale_; }
  const std::vector<double>& input_mean() const { return mean_; }
  const std::vector<double>& input_std() const { return std_; }

  /// Flat parameter vector: W1, b1, W2, b2, W3, b3 (row-major weights).
  const std::vector<double>& weights() const { return w_; }
  void set_weights(std::vector<double> w);
  void set_normalization(std::vector<double> mean, std::vector<double> stdev, double target_scale);

  /// Mean squared error over a batch in scaled target units.
  double batch_loss(std::span<const FeatureVector> x, std::span<const double> y) const;
  std::vector<double> batch_gradient(std::span<const FeatureVector> x, std::span<const double> y) const;

 private:
  void step(std::span<const FeatureVector> x, std::span<const double> y);
  double forward(std::span<const double> x, std::vector<double>* h1, std::vector<double>* h2,
                 std::vector<double>* z) const;

  NetParams params_;
  std::size_t n_inputs_;
  std::vector<double> w_;
  std::vector<double> velocity_;
  std::vector<double> mean_;
  std::vector<double> std_;
  double target_scale_ = 1.0;
  std::vector<FeatureVector> buffer_x_;
  std::vector<double> buffer_y_;
};

// --- concept drift ----------------------------------------------------------

struct DriftParams {
  double train_fraction = 0.8;
  int pretrain_epochs = 500;
  NetParams net;
  std::uint64_t seed = 1;
};

/// RMSE on both held-out test sets; index 0 is the pretrained model, index
/// k the model after the k-th minibatch update on the stream.
struct DriftCurve {
  std::vector<double> rmse_a;
  std::vector<double> rmse_b;
};

DriftCurve concept_drift_experiment(const Dataset& pretrain, const Dataset& stream, const DriftParams& params);

// --- serialization ----------------------------------------------------------

void save_forest(const ForestModel& model, const CellEncoder& cells, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path, CellEncoder* cells = nullptr);
void save_net(const IncrementalNetModel& model, const std::filesystem::path& path);
IncrementalNetModel load_net(const std::filesystem::path& path);

std::string format_metrics(const RegressionMetrics& m);

}  // namespace odt
