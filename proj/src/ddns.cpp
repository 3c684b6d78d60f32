#include "odt/ddns.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

#include "odt/kvfile.hpp"

namespace odt {

double ForestPredictor::predict(const ContextSample& s, double payload_bytes) const {
  return model_->predict(make_features(s, payload_bytes, cells_));
}

double NetPredictor::predict(const ContextSample& s, double payload_bytes) const {
  return std::max(0.0, model_->predict(make_features(s, payload_bytes, cells_)));
}

double OraclePredictor::predict(const ContextSample& s, double) const {
  if (!s.measured_data_rate) throw Error("oracle predictor: sample without a measured rate");
  return *s.measured_data_rate;
}

// --- ground truth -----------------------------------------------------------

GroundTruthModel GroundTruthModel::passthrough() { return {}; }

namespace {

std::shared_ptr<const TabulatedResidual> fit_region(const std::vector<double>& x, const std::vector<double>& y,
                                                    const GpGrid& grid, std::uint64_t seed) {
  auto model = fit_residual_model_grid(x, y, grid, seed);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double pad = std::max(1.0, model.hyper().length_scale);
  return std::make_shared<const TabulatedResidual>(std::move(model), *lo - pad, *hi + pad);
}

}  // namespace

GroundTruthModel GroundTruthModel::fit(std::span<const ErrorSample> samples, std::shared_ptr<const BlackSpotMap> map,
                                       const GpGrid& grid, std::uint64_t seed, std::size_t min_inside) {
  if (!map) map = std::make_shared<const BlackSpotMap>();
  std::vector<double> xo;
  std::vector<double> yo;
  std::vector<double> xi;
  std::vector<double> yi;
  for (const auto& s : samples) {
    if (in_any_black_spot(*map, s.position)) {
      xi.push_back(s.predicted);
      yi.push_back(s.measured);
    } else {
      xo.push_back(s.predicted);
      yo.push_back(s.measured);
    }
  }
  if (xo.size() < 2) {
    // Degenerate map covering (almost) everything: a single model for all.
    xo.insert(xo.end(), xi.begin(), xi.end());
    yo.insert(yo.end(), yi.begin(), yi.end());
    xi.clear();
  }
  GroundTruthModel g;
  g.map_ = std::move(map);
  g.outside_ = fit_region(xo, yo, grid, derive_seed(seed, "truth.outside"));
  g.inside_ = xi.size() >= std::max<std::size_t>(2, min_inside) ? fit_region(xi, yi, grid, derive_seed(seed, "truth.inside"))
                                                                 : g.outside_;
  return g;
}

const TabulatedResidual* GroundTruthModel::pick(Vec2 position) const {
  if (!outside_) return nullptr;
  return map_ && in_any_black_spot(*map_, position) ? inside_.get() : outside_.get();
}

double GroundTruthModel::sample(double s_tilde, Vec2 position, Rng& rng) const {
  const auto* m = pick(position);
  return m ? m->sample(s_tilde, rng) : s_tilde;
}

double GroundTruthModel::mean(double s_tilde, Vec2 position) const {
  const auto* m = pick(position);
  return m ? m->mean(s_tilde) : s_tilde;
}

// --- engine -----------------------------------------------------------------

void SimConfig::validate() const {
  if (!(sensor_rate_bytes > 0.0)) throw Error("sim: sensor rate must be positive");
  if (!(min_rate_mbits > 0.0)) throw Error("sim: min_rate_mbits must be positive");
}

std::vector<TransmissionRecord> RunLog::records() const {
  std::vector<TransmissionRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.record);
  return out;
}

EpochOutcome run_epoch(const Trace& trace, SchemeAgent& agent, const SimModels& models, const SimConfig& sim,
                       std::uint64_t seed, std::size_t epoch_index) {
  sim.validate();
  if (!models.predictor) throw Error("run_epoch: no predictor");
  const auto truth = models.truth ? models.truth : std::make_shared<const GroundTruthModel>();
  const PrbTables& tables = models.tables ? *models.tables : PrbTables::embedded();
  const double dt_max = agent.config().delta_t_max;
  const double packet = sim.sensor_rate_bytes * trace.sample_interval();

  Rng agent_rng(derive_seed(seed, "agent"));
  EpochOutcome out;
  out.result.epoch = epoch_index;
  std::deque<SensorPacket> buffer;
  double buffered = 0.0;
  double busy_until = -std::numeric_limits<double>::infinity();

  auto transmit = [&](const ContextSample& s, double now, double s_tilde, std::size_t slot, bool forced, bool flush) {
    Rng truth_rng(derive_seed(seed, "truth", slot));
    RunLogRow row;
    row.s_tilde = s_tilde;
    row.s_hat = truth->sample(s_tilde, s.position, truth_rng);
    const double rate = std::max(row.s_hat, sim.min_rate_mbits);
    auto& rec = row.record;
    rec.send_time = now;
    rec.payload = buffered;
    rec.duration = buffered * 8.0 / (rate * 1e6);
    rec.achieved_rate = rec.payload * 8.0 / rec.duration / 1e6;
    rec.oldest_generated_at = buffer.front().generated_at;
    rec.cqi = s.cqi;
    rec.rsrp = s.rsrp;
    row.position = s.position;
    row.sinr = s.sinr;
    const auto prb = estimate_prbs(rec, tables);
    row.prbs = prb.valid ? prb.total : 0.0;
    row.energy = transmission_energy(rec, models.power);
    row.forced = forced;
    row.flush = flush;
    out.result.transmitted_bytes += buffered;
    buffer.clear();
    buffered = 0.0;
    busy_until = now + rec.duration;
    out.log.rows.push_back(row);
    return rate;
  };

  agent.begin_epoch(trace[0].timestamp, trace.sample_interval());
  const auto samples = trace.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const double now = s.timestamp;
    buffer.push_back({now, packet});
    buffered += packet;
    out.result.generated_bytes += packet;
    if (now < busy_until) continue;

    DecisionContext ctx;
    ctx.now = now;
    ctx.position = s.position;
    ctx.sinr = s.sinr;
    ctx.delta_t = now - buffer.front().generated_at;
    ctx.s_tilde = models.predictor->predict(s, buffered);
    Action a = agent.decide(ctx, agent_rng);
    const bool forced = ctx.delta_t >= dt_max;
    if (forced) a = Action::Tx;
    if (a == Action::Tx) {
      const double rate = transmit(s, now, ctx.s_tilde, i, forced, false);
      agent.learn(ctx, Action::Tx, rate);
    } else {
      agent.learn(ctx, Action::Idle, 0.0);
    }
  }
  if (sim.flush_at_end && !buffer.empty()) {
    const auto& s = samples.back();
    const double now = std::max(s.timestamp, busy_until);
    transmit(s, now, models.predictor->predict(s, buffered), samples.size(), false, true);
  }
  out.result.buffered_bytes = buffered;

  auto& r = out.result;
  r.transmissions = out.log.rows.size();
  for (const auto& row : out.log.rows) {
    r.mean_rate += row.record.achieved_rate;
    r.mean_aoi += aoi(row.record);
    r.total_prbs += row.prbs;
    r.total_energy += row.energy;
  }
  if (r.transmissions > 0) {
    r.mean_rate /= static_cast<double>(r.transmissions);
    r.mean_aoi /= static_cast<double>(r.transmissions);
  }
  return out;
}

std::vector<EpochResult> train_epochs(std::span<const Trace> traces, SchemeAgent& agent, const SimModels& models,
                                      const SimConfig& sim, std::size_t n_epochs, std::uint64_t seed,
                                      const EpochCallback& on_epoch) {
  if (traces.empty()) throw Error("train_epochs: no traces");
  if (n_epochs < 1) throw Error("train_epochs: n_epochs must be >= 1");
  std::vector<EpochResult> results;
  results.reserve(n_epochs);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    auto outcome = run_epoch(traces[e % traces.size()], agent, models, sim, derive_seed(seed, "epoch", e), e);
    if (on_epoch) on_epoch(outcome);
    results.push_back(outcome.result);
  }
  return results;
}

std::optional<std::size_t> convergence_epoch(std::span<const double> series, std::size_t window, double tol) {
  if (window < 2) throw Error("convergence_epoch: window must be >= 2");
  if (series.size() <= window) return std::nullopt;
  std::vector<double> ma(series.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    acc += series[k];
    if (k >= window) acc -= series[k - window];
    ma[k] = acc / static_cast<double>(window);
  }
  // Scan backwards for the longest tail of small relative changes.
  std::optional<std::size_t> first;
  for (std::size_t k = series.size() - 1; k >= window; --k) {
    const double prev = ma[k - 1];
    const double change = prev != 0.0 ? std::abs(ma[k] - prev) / std::abs(prev) : (ma[k] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (!(change < tol)) break;
    first = k;
  }
  return first;
}

// --- files ------------------------------------------------------------------

namespace {
std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
}  // namespace

std::string runlog_header() {
  return "send_time_s,duration_s,payload_bytes,achieved_rate_mbits,oldest_generated_at_s,aoi_s,cqi,rsrp_dbm,"
         "sinr_db,x_m,y_m,s_tilde_mbits,s_hat_mbits,prbs,energy_j,forced,flush";
}

std::string format_runlog(const RunLog& log) {
  std::ostringstream out;
  out << runlog_header() << "\n";
  for (const auto& row : log.rows) {
    const auto& r = row.record;
    out << num(r.send_time) << ',' << num(r.duration) << ',' << num(r.payload) << ',' << num(r.achieved_rate) << ','
        << num(r.oldest_generated_at) << ',' << num(aoi(r)) << ',' << r.cqi << ',' << num(r.rsrp) << ','
        << num(row.sinr) << ',' << num(row.position.x) << ',' << num(row.position.y) << ',' << num(row.s_tilde)
        << ',' << num(row.s_hat) << ',' << num(row.prbs) << ',' << num(row.energy) << ',' << (row.forced ? 1 : 0)
        << ',' << (row.flush ? 1 : 0) << "\n";
  }
  return out.str();
}

void write_runlog(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write run log " + path.string());
  out << format_runlog(log);
}

RunLog parse_runlog(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != runlog_header()) throw Error("run log: unexpected header");
  RunLog log;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 17) throw Error("run log: expected 17 fields");
    std::vector<double> v;
    for (const auto& s : f) v.push_back(parse_double(s, "run log field"));
    RunLogRow row;
    row.record = {v[0], v[1], v[2], v[3], v[4], static_cast<int>(v[6]), v[7]};
    row.sinr = v[8];
    row.position = {v[9], v[10]};
    row.s_tilde = v[11];
    row.s_hat = v[12];
    row.prbs = v[13];
    row.energy = v[14];
    row.forced = v[15] != 0.0;
    row.flush = v[16] != 0.0;
    log.rows.push_back(row);
  }
  return log;
}

std::string epochs_header() {
  return "epoch,mean_rate_mbits,mean_aoi_s,transmissions,total_prbs,total_energy_j,generated_bytes,"
         "transmitted_bytes,buffered_bytes";
}

std::string format_epochs(std::span<const EpochResult> epochs) {
  std::ostringstream out;
  out << epochs_header() << "\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << num(e.mean_rate) << ',' << num(e.mean_aoi) << ',' << e.transmissions << ','
        << num(e.total_prbs) << ',' << num(e.total_energy) << ',' << num(e.generated_bytes) << ','
        << num(e.transmitted_bytes) << ',' << num(e.buffered_bytes) << "\n";
  }
  return out.str();
}

}  // namespace odt
