#include "odt/predictor.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "odt/kvfile.hpp"

namespace odt {

// --- features ---------------------------------------------------------------

CellEncoder CellEncoder::fit(std::span<const Trace> traces) {
  std::map<std::int64_t, std::size_t> counts;
  for (const auto& t : traces) {
    for (const auto& s : t.samples()) ++counts[s.cell_id];
  }
  std::vector<std::pair<std::int64_t, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<std::int64_t, int> codes;
  for (std::size_t i = 0; i < ranked.size(); ++i) codes[ranked[i].first] = static_cast<int>(i);
  return CellEncoder(std::move(codes));
}

double CellEncoder::encode(std::int64_t cell_id) const {
  auto it = codes_.find(cell_id);
  return it == codes_.end() ? kUnknown : static_cast<double>(it->second);
}

FeatureVector make_features(const ContextSample& s, double payload_bytes, const CellEncoder& cells) {
  return {s.rsrp, s.rsrq, s.sinr, static_cast<double>(s.cqi), static_cast<double>(s.ta), s.velocity,
          cells.encode(s.cell_id), payload_bytes};
}

Dataset build_dataset(std::span<const Trace> traces, const CellEncoder& cells) {
  Dataset d;
  for (const auto& t : traces) {
    for (const auto& s : t.samples()) {
      if (!s.measured_data_rate || !s.payload_bytes) continue;
      d.push(make_features(s, *s.payload_bytes, cells), *s.measured_data_rate);
    }
  }
  return d;
}

// --- metrics ----------------------------------------------------------------

RegressionMetrics evaluate(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw Error("evaluate: length mismatch");
  if (targets.size() < 2) throw Error("evaluate: need at least 2 samples");
  const double n = static_cast<double>(targets.size());
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = targets[i] - predictions[i];
    ss_res += e * e;
    abs_sum += std::abs(e);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  RegressionMetrics m;
  m.n = targets.size();
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(ss_res / n);
  if (ss_tot > 0.0) m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

std::string format_metrics(const RegressionMetrics& m) {
  std::ostringstream out;
  out.precision(17);
  out << "n = " << m.n << "\n";
  out << "r2 = ";
  if (m.r2) {
    out << *m.r2;
  } else {
    out << "undefined";
  }
  out << "\nmae = " << m.mae << "\nrmse = " << m.rmse << "\n";
  return out.str();
}

// --- regression forest ------------------------------------------------------

double RegressionTree::predict(std::span<const double> x) const {
  if (nodes_.empty()) throw Error("empty regression tree");
  int i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& n = nodes_[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[i].value;
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes_[i].feature >= 0) {
      stack.push_back({nodes_[i].left, d + 1});
      stack.push_back({nodes_[i].right, d + 1});
    }
  }
  return best;
}

ForestModel::ForestModel(std::vector<RegressionTree> trees, ForestParams params, std::size_t n_features)
    : trees_(std::move(trees)), params_(params), n_features_(n_features) {
  if (trees_.empty()) throw Error("forest without trees");
}

double ForestModel::predict_raw_mean(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw Error("feature arity mismatch: model expects " + std::to_string(n_features_) + ", got " +
                std::to_string(x.size()));
  }
  double acc = 0.0;
  for (const auto& t : trees_) acc += t.predict(x);
  return acc / static_cast<double>(trees_.size());
}

double ForestModel::predict(std::span<const double> x) const { return std::max(0.0, predict_raw_mean(x)); }

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestParams& params, Rng& rng)
      : data_(data), params_(params), rng_(rng) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(rows, 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // reduction in sum of squared errors
  };

  static double mean_of(const Dataset& d, const std::vector<std::size_t>& rows) {
    double acc = 0.0;
    for (auto r : rows) acc += d.y[r];
    return acc / static_cast<double>(rows.size());
  }

  Split best_split_on(int f, std::vector<std::size_t>& rows) const {
    const auto fs = static_cast<std::size_t>(f);
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      const double xa = data_.x[a][fs];
      const double xb = data_.x[b][fs];
      return xa < xb || (xa == xb && a < b);
    });
    double total = 0.0;
    double total_sq = 0.0;
    for (auto r : rows) {
      total += data_.y[r];
      total_sq += data_.y[r] * data_.y[r];
    }
    const double n = static_cast<double>(rows.size());
    const double parent_sse = total_sq - total * total / n;
    Split best;
    double left = 0.0;
    double left_sq = 0.0;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      left += data_.y[rows[i]];
      left_sq += data_.y[rows[i]] * data_.y[rows[i]];
      const double xi = data_.x[rows[i]][fs];
      const double xn = data_.x[rows[i + 1]][fs];
      if (!(xi < xn)) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = n - nl;
      const double right = total - left;
      const double right_sq = total_sq - left_sq;
      const double sse = (left_sq - left * left / nl) + (right_sq - right * right / nr);
      const double gain = parent_sse - sse;
      if (gain > best.score + 1e-12 * std::max(1.0, parent_sse)) {
        best = {f, 0.5 * (xi + xn), gain};
        if (best.threshold >= xn) best.threshold = xi;
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t>& rows, int depth) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[index].value = mean_of(data_, rows);
    if (depth >= params_.max_depth || rows.size() < 2) return index;

    const std::size_t nf = data_.x.front().size();
    std::vector<int> order(nf);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(params_.features_per_split), 1, nf);

    Split best;
    for (std::size_t i = 0; i < nf; ++i) {
      if (i >= k && best.feature >= 0) break;
      const Split s = best_split_on(order[i], rows);
      if (s.feature >= 0 && s.score > best.score) best = s;
    }
    if (best.feature < 0) return index;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto r : rows) {
      (data_.x[r][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[index].feature = best.feature;
    nodes_[index].threshold = best.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[index].left = l;
    nodes_[index].right = r;
    return index;
  }

  const Dataset& data_;
  const ForestParams& params_;
  Rng& rng_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

ForestModel train_forest(const Dataset& data, const ForestParams& params) {
  if (data.size() == 0) throw Error("train_forest: empty dataset");
  if (params.n_trees < 1) throw Error("train_forest: n_trees must be >= 1");
  if (params.max_depth < 0) throw Error("train_forest: negative max_depth");
  for (double y : data.y) {
    if (!std::isfinite(y) || y < 0.0) throw Error("train_forest: targets must be finite and >= 0");
  }
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  const std::size_t n = data.size();
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(params.seed + static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder(data, params, rng);
    trees.push_back(builder.build(std::move(rows)));
  }
  return ForestModel(std::move(trees), params, data.x.front().size());
}

// --- incremental neural network --------------------------------------------

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t weight_count(std::size_t in, std::size_t h) { return in * h + h + h * h + h + h + 1; }

}  // namespace

IncrementalNetModel::IncrementalNetModel(NetParams params, std::size_t n_inputs)
    : params_(params), n_inputs_(n_inputs) {
  if (params_.hidden == 0 || n_inputs_ == 0) throw Error("net layers must be non-empty");
  if (params_.batch_size == 0) throw Error("net batch size must be positive");
  w_.resize(weight_count(n_inputs_, params_.hidden));
  Rng rng(params_.seed);
  std::uniform_real_distribution<double> init(-0.5, 0.5);
  for (auto& w : w_) w = init(rng);
  velocity_.assign(w_.size(), 0.0);
  mean_.assign(n_inputs_, 0.0);
  std_.assign(n_inputs_, 1.0);
}

IncrementalNetModel IncrementalNetModel::zeros(NetParams params, std::size_t n_inputs) {
  IncrementalNetModel m(params, n_inputs);
  std::fill(m.w_.begin(), m.w_.end(), 0.0);
  return m;
}

void IncrementalNetModel::set_weights(std::vector<double> w) {
  if (w.size() != w_.size()) throw Error("net weight vector has wrong length");
  w_ = std::move(w);
}

void IncrementalNetModel::set_normalization(std::vector<double> mean, std::vector<double> stdev,
                                            double target_scale) {
  if (mean.size() != n_inputs_ || stdev.size() != n_inputs_) throw Error("normalization arity mismatch");
  if (!(target_scale > 0.0)) throw Error("target scale must be positive");
  mean_ = std::move(mean);
  std_ = std::move(stdev);
  target_scale_ = target_scale;
}

void IncrementalNetModel::set_normalization(const Dataset& data) {
  if (data.size() == 0) throw Error("normalization from an empty dataset");
  std::vector<double> mean(n_inputs_, 0.0);
  std::vector<double> sd(n_inputs_, 0.0);
  const double n = static_cast<double>(data.size());
  for (const auto& x : data.x) {
    for (std::size_t j = 0; j < n_inputs_; ++j) mean[j] += x[j] / n;
  }
  for (const auto& x : data.x) {
    for (std::size_t j = 0; j < n_inputs_; ++j) sd[j] += (x[j] - mean[j]) * (x[j] - mean[j]) / n;
  }
  for (auto& s : sd) s = s > 0.0 ? std::sqrt(s) : 1.0;
  const double ymax = *std::max_element(data.y.begin(), data.y.end());
  const double scale = ymax > 0.0 ? std::exp2(std::ceil(std::log2(ymax))) : 1.0;
  set_normalization(std::move(mean), std::move(sd), scale);
}

double IncrementalNetModel::forward(std::span<const double> x, std::vector<double>* h1, std::vector<double>* h2,
                                    std::vector<double>*) const {
  const std::size_t H = params_.hidden;
  const double* W1 = w_.data();
  const double* b1 = W1 + H * n_inputs_;
  const double* W2 = b1 + H;
  const double* b2 = W2 + H * H;
  const double* W3 = b2 + H;
  const double b3 = W3[H];
  std::vector<double> a1(H);
  std::vector<double> a2(H);
  for (std::size_t i = 0; i < H; ++i) {
    double z = b1[i];
    for (std::size_t j = 0; j < n_inputs_; ++j) z += W1[i * n_inputs_ + j] * (x[j] - mean_[j]) / std_[j];
    a1[i] = sigmoid(z);
  }
  for (std::size_t i = 0; i < H; ++i) {
    double z = b2[i];
    for (std::size_t j = 0; j < H; ++j) z += W2[i * H + j] * a1[j];
    a2[i] = sigmoid(z);
  }
  double out = b3;
  for (std::size_t j = 0; j < H; ++j) out += W3[j] * a2[j];
  if (h1) *h1 = std::move(a1);
  if (h2) *h2 = std::move(a2);
  return out;
}

double IncrementalNetModel::predict(std::span<const double> x) const {
  if (x.size() != n_inputs_) {
    throw Error("feature arity mismatch: model expects " + std::to_string(n_inputs_) + ", got " +
                std::to_string(x.size()));
  }
  return forward(x, nullptr, nullptr, nullptr) * target_scale_;
}

double IncrementalNetModel::batch_loss(std::span<const FeatureVector> x, std::span<const double> y) const {
  if (x.size() != y.size() || x.empty()) throw Error("batch_loss: bad batch");
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = forward(x[k], nullptr, nullptr, nullptr) - y[k] / target_scale_;
    acc += e * e;
  }
  return acc / static_cast<double>(x.size());
}

std::vector<double> IncrementalNetModel::batch_gradient(std::span<const FeatureVector> x,
                                                        std::span<const double> y) const {
  if (x.size() != y.size() || x.empty()) throw Error("batch_gradient: bad batch");
  const std::size_t H = params_.hidden;
  const std::size_t oW1 = 0;
  const std::size_t ob1 = H * n_inputs_;
  const std::size_t oW2 = ob1 + H;
  const std::size_t ob2 = oW2 + H * H;
  const std::size_t oW3 = ob2 + H;
  const std::size_t ob3 = oW3 + H;
  std::vector<double> g(w_.size(), 0.0);
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<double> d2(H);
  std::vector<double> xs(n_inputs_);
  const double scale = 2.0 / static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double out = forward(x[k], &h1, &h2, nullptr);
    const double d_out = scale * (out - y[k] / target_scale_);
    if (d_out == 0.0) continue;
    g[ob3] += d_out;
    for (std::size_t j = 0; j < H; ++j) {
      g[oW3 + j] += d_out * h2[j];
      d2[j] = d_out * w_[oW3 + j] * h2[j] * (1.0 - h2[j]);
    }
    for (std::size_t i = 0; i < H; ++i) {
      g[ob2 + i] += d2[i];
      for (std::size_t j = 0; j < H; ++j) g[oW2 + i * H + j] += d2[i] * h1[j];
    }
    for (std::size_t j = 0; j < n_inputs_; ++j) xs[j] = (x[k][j] - mean_[j]) / std_[j];
    for (std::size_t j = 0; j < H; ++j) {
      double back = 0.0;
      for (std::size_t i = 0; i < H; ++i) back += d2[i] * w_[oW2 + i * H + j];
      const double d1 = back * h1[j] * (1.0 - h1[j]);
      g[ob1 + j] += d1;
      for (std::size_t m = 0; m < n_inputs_; ++m) g[oW1 + j * n_inputs_ + m] += d1 * xs[m];
    }
  }
  return g;
}

void IncrementalNetModel::step(std::span<const FeatureVector> x, std::span<const double> y) {
  const auto g = batch_gradient(x, y);
  for (std::size_t i = 0; i < w_.size(); ++i) {
    velocity_[i] = params_.momentum * velocity_[i] - params_.learning_rate * g[i];
    w_[i] += velocity_[i];
  }
}

bool IncrementalNetModel::update_online(std::span<const double> x, double target) {
  if (x.size() != n_inputs_) throw Error("update_online: feature arity mismatch");
  FeatureVector f{};
  std::copy(x.begin(), x.end(), f.begin());
  buffer_x_.push_back(f);
  buffer_y_.push_back(target);
  if (buffer_y_.size() < params_.batch_size) return false;
  step(buffer_x_, buffer_y_);
  buffer_x_.clear();
  buffer_y_.clear();
  return true;
}

void IncrementalNetModel::fit_offline(const Dataset& data, int epochs, std::uint64_t shuffle_seed) {
  if (data.size() == 0) throw Error("fit_offline: empty dataset");
  set_normalization(data);
  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<FeatureVector> bx;
  std::vector<double> by;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += params_.batch_size) {
      const std::size_t end = std::min(order.size(), start + params_.batch_size);
      bx.clear();
      by.clear();
      for (std::size_t i = start; i < end; ++i) {
        bx.push_back(data.x[order[i]]);
        by.push_back(data.y[order[i]]);
      }
      step(bx, by);
    }
  }
}

// --- concept drift ----------------------------------------------------------

namespace {

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(d.size())));
  Dataset train;
  Dataset test;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? train : test).push(d.x[order[i]], d.y[order[i]]);
  return {train, test};
}

double rmse_on(const IncrementalNetModel& m, const Dataset& d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double e = m.predict(d.x[i]) - d.y[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(d.size()));
}

}  // namespace

DriftCurve concept_drift_experiment(const Dataset& pretrain, const Dataset& stream, const DriftParams& params) {
  if (!(params.train_fraction > 0.0 && params.train_fraction < 1.0)) {
    throw Error("drift: train fraction must be in (0, 1)");
  }
  if (pretrain.size() < 2) throw Error("drift: pretraining dataset too small");
  auto [a_train, a_test] = split_dataset(pretrain, params.train_fraction, derive_seed(params.seed, "drift.split.a"));
  if (a_train.size() == 0 || a_test.size() == 0) throw Error("drift: pretraining split left an empty side");

  IncrementalNetModel net(params.net);
  net.fit_offline(a_train, params.pretrain_epochs, derive_seed(params.seed, "drift.pretrain"));

  DriftCurve curve;
  if (stream.size() == 0) {
    curve.rmse_a.push_back(rmse_on(net, a_test));
    return curve;
  }
  auto [b_train, b_test] = split_dataset(stream, params.train_fraction, derive_seed(params.seed, "drift.split.b"));
  if (b_train.size() < params.net.batch_size || b_test.size() == 0) {
    throw Error("drift: stream too small for a " + std::to_string(params.net.batch_size) + "-element batch");
  }
  curve.rmse_a.push_back(rmse_on(net, a_test));
  curve.rmse_b.push_back(rmse_on(net, b_test));
  for (std::size_t i = 0; i < b_train.size(); ++i) {
    if (net.update_online(b_train.x[i], b_train.y[i])) {
      curve.rmse_a.push_back(rmse_on(net, a_test));
      curve.rmse_b.push_back(rmse_on(net, b_test));
    }
  }
  return curve;
}

// --- serialization ----------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

class ModelReader {
 public:
  ModelReader(const std::filesystem::path& path, const std::string& magic) : path_(path), in_(path) {
    if (!in_) throw Error("cannot open model file " + path.string());
    if (word() != magic || word() != "1") throw Error(path.string() + ": not a '" + magic + " 1' file");
  }

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw Error(path_.string() + ": truncated model file");
    return w;
  }
  void expect(const std::string& w) {
    const auto got = word();
    if (got != w) throw Error(path_.string() + ": expected '" + w + "', got '" + got + "'");
  }
  double real() { return parse_double(word(), path_.string() + " value"); }
  long long integer() {
    const auto w = word();
    long long v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) throw Error(path_.string() + ": bad integer '" + w + "'");
    return v;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void check_features(ModelReader& r, std::size_t n) {
  r.expect("features");
  if (static_cast<std::size_t>(r.integer()) != n) throw Error("model feature count mismatch");
  for (std::size_t i = 0; i < n; ++i) r.expect(kFeatureNames[i]);
}

}  // namespace

void save_forest(const ForestModel& model, const CellEncoder& cells, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path.string());
  const auto& p = model.params();
  out << "odt-forest 1\n";
  out << "features " << model.n_features();
  for (std::size_t i = 0; i < model.n_features(); ++i) out << ' ' << kFeatureNames[i];
  out << "\nparams " << p.n_trees << ' ' << p.max_depth << ' ' << p.seed << ' ' << p.features_per_split << ' '
      << (p.bootstrap ? 1 : 0) << "\n";
  out << "cells " << cells.codes().size() << "\n";
  for (const auto& [id, code] : cells.codes()) out << id << ' ' << code << "\n";
  out << "trees " << model.trees().size() << "\n";
  for (const auto& t : model.trees()) {
    out << "tree " << t.nodes().size() << "\n";
    for (const auto& n : t.nodes()) {
      out << n.feature << ' ' << num(n.threshold) << ' ' << n.left << ' ' << n.right << ' ' << num(n.value) << "\n";
    }
  }
}

ForestModel load_forest(const std::filesystem::path& path, CellEncoder* cells) {
  ModelReader r(path, "odt-forest");
  check_features(r, kFeatureCount);
  r.expect("params");
  ForestParams p;
  p.n_trees = static_cast<int>(r.integer());
  p.max_depth = static_cast<int>(r.integer());
  p.seed = static_cast<std::uint64_t>(r.integer());
  p.features_per_split = static_cast<int>(r.integer());
  p.bootstrap = r.integer() != 0;
  r.expect("cells");
  std::map<std::int64_t, int> codes;
  for (auto n = r.integer(); n > 0; --n) {
    const auto id = r.integer();
    codes[id] = static_cast<int>(r.integer());
  }
  if (cells) *cells = CellEncoder(std::move(codes));
  r.expect("trees");
  std::vector<RegressionTree> trees;
  for (auto n = r.integer(); n > 0; --n) {
    r.expect("tree");
    const auto count = r.integer();
    std::vector<TreeNode> nodes(static_cast<std::size_t>(count));
    for (auto& node : nodes) {
      node.feature = static_cast<int>(r.integer());
      node.threshold = r.real();
      node.left = static_cast<int>(r.integer());
      node.right = static_cast<int>(r.integer());
      node.value = r.real();
      if (node.feature >= static_cast<int>(kFeatureCount) || node.left >= count || node.right >= count) {
        throw Error(path.string() + ": corrupt tree node");
      }
    }
    trees.emplace_back(std::move(nodes));
  }
  return ForestModel(std::move(trees), p, kFeatureCount);
}

void save_net(const IncrementalNetModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path.string());
  const auto& p = model.params();
  out << "odt-net 1\n";
  out << "features " << model.n_inputs();
  for (std::size_t i = 0; i < model.n_inputs(); ++i) out << ' ' << kFeatureNames[i];
  out << "\nlayers " << model.n_inputs() << ' ' << p.hidden << ' ' << p.hidden << " 1\n";
  out << "params " << num(p.learning_rate) << ' ' << num(p.momentum) << ' ' << p.batch_size << ' ' << p.seed << "\n";
  out << "target_scale " << num(model.target_scale()) << "\nmean";
  for (double v : model.input_mean()) out << ' ' << num(v);
  out << "\nstd";
  for (double v : model.input_std()) out << ' ' << num(v);
  out << "\nweights " << model.weights().size() << "\n";
  for (double v : model.weights()) out << num(v) << "\n";
}

IncrementalNetModel load_net(const std::filesystem::path& path) {
  ModelReader r(path, "odt-net");
  check_features(r, kFeatureCount);
  r.expect("layers");
  const auto n_in = static_cast<std::size_t>(r.integer());
  NetParams p;
  p.hidden = static_cast<std::size_t>(r.integer());
  if (static_cast<std::size_t>(r.integer()) != p.hidden || r.integer() != 1 || n_in != kFeatureCount) {
    throw Error(path.string() + ": unsupported layer layout");
  }
  r.expect("params");
  p.learning_rate = r.real();
  p.momentum = r.real();
  p.batch_size = static_cast<std::size_t>(r.integer());
  p.seed = static_cast<std::uint64_t>(r.integer());
  r.expect("target_scale");
  const double scale = r.real();
  std::vector<double> mean(n_in);
  std::vector<double> sd(n_in);
  r.expect("mean");
  for (auto& v : mean) v = r.real();
  r.expect("std");
  for (auto& v : sd) v = r.real();
  r.expect("weights");
  std::vector<double> w(static_cast<std::size_t>(r.integer()));
  for (auto& v : w) v = r.real();
  IncrementalNetModel m(p, n_in);
  m.set_normalization(std::move(mean), std::move(sd), scale);
  m.set_weights(std::move(w));
  return m;
}

}  // namespace odt
