#include "odt/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace odt {

namespace {

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::filesystem::path> paths(const KeyValueFile& kv, const std::string& key) {
  std::vector<std::filesystem::path> out;
  for (const auto& s : kv.get_strings(key, {})) out.emplace_back(s);
  return out;
}

void require_files(const std::vector<std::filesystem::path>& files, const std::string& what) {
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) throw Error("missing " + what + " " + f.string());
  }
}

void reject_unused(const KeyValueFile& kv, const std::string& prefix = "") {
  const auto extra = kv.unused_keys();
  if (!extra.empty()) throw Error(kv.origin() + ": unknown config key '" + prefix + extra.front() + "'");
}

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

const std::set<std::string> kDriveKeys{"train_drives", "validation_drives", "replay_drives"};

}  // namespace

// --- config -----------------------------------------------------------------

ExperimentConfig ExperimentConfig::parse(const KeyValueFile& kv) {
  ExperimentConfig c;
  c.source = kv;
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  c.epochs = static_cast<std::size_t>(kv.get_int("epochs", 1));
  c.eval_epochs = static_cast<std::size_t>(kv.get_int("eval_epochs", 0));
  c.scheme = kv.get_string("scheme", c.scheme);
  c.out = kv.get_string("out", c.out.string());
  if (c.epochs < 1) throw Error("epochs must be >= 1");

  const auto compare = kv.section("compare");
  c.compare_schemes = compare.get_strings("schemes", {});
  reject_unused(compare, "compare.");
  kv.absorb(compare, "compare");

  const auto trace = kv.section("trace");
  c.trace_source = trace.get_string("source", c.trace_source);
  c.train_files = paths(trace, "train_files");
  c.validation_files = paths(trace, "validation_files");
  c.replay_files = paths(trace, "replay_files");
  c.schema.sample_interval = trace.get_double("sample_interval", c.schema.sample_interval);
  reject_unused(trace, "trace.");
  kv.absorb(trace, "trace");
  if (c.trace_source != "synthetic" && c.trace_source != "files") {
    throw Error("trace.source must be 'synthetic' or 'files'");
  }
  if (c.trace_source == "files") {
    if (c.train_files.empty()) throw Error("trace.train_files is required for trace.source = files");
    require_files(c.train_files, "trace file");
    require_files(c.validation_files, "trace file");
    require_files(c.replay_files, "trace file");
  }

  const auto syn = kv.section("synthetic");
  c.synthetic = SyntheticConfig::from(syn);
  c.train_drives = static_cast<int>(syn.get_int("train_drives", c.train_drives));
  c.validation_drives = static_cast<int>(syn.get_int("validation_drives", c.validation_drives));
  c.replay_drives = static_cast<int>(syn.get_int("replay_drives", c.replay_drives));
  reject_unused(syn, "synthetic.");
  kv.absorb(syn, "synthetic");
  if (c.train_drives < 1 || c.validation_drives < 1 || c.replay_drives < 1) {
    throw Error("synthetic drive counts must be >= 1");
  }

  const auto pred = kv.section("predictor");
  c.predictor_kind = pred.get_string("kind", c.predictor_kind);
  c.forest.n_trees = static_cast<int>(pred.get_int("n_trees", c.forest.n_trees));
  c.forest.max_depth = static_cast<int>(pred.get_int("max_depth", c.forest.max_depth));
  c.forest.features_per_split = static_cast<int>(pred.get_int("features_per_split", c.forest.features_per_split));
  c.forest.bootstrap = pred.get_bool("bootstrap", c.forest.bootstrap);
  c.forest.seed = derive_seed(c.seed, "predictor.forest");
  c.net.hidden = static_cast<std::size_t>(pred.get_int("net_hidden", static_cast<long long>(c.net.hidden)));
  c.net.learning_rate = pred.get_double("net_learning_rate", c.net.learning_rate);
  c.net.momentum = pred.get_double("net_momentum", c.net.momentum);
  c.net.batch_size = static_cast<std::size_t>(pred.get_int("net_batch_size", static_cast<long long>(c.net.batch_size)));
  c.net.seed = derive_seed(c.seed, "predictor.net");
  c.net_epochs = static_cast<int>(pred.get_int("net_epochs", c.net_epochs));
  c.predictor_model = pred.get_string("model", "");
  reject_unused(pred, "predictor.");
  kv.absorb(pred, "predictor");
  if (c.predictor_kind != "forest" && c.predictor_kind != "net") throw Error("predictor.kind must be 'forest' or 'net'");
  if (!c.predictor_model.empty()) require_files({c.predictor_model}, "model file");

  const auto bs = kv.section("blackspot");
  c.blackspots_enabled = bs.get_bool("enabled", c.blackspots_enabled);
  c.blackspot.n_clusters = static_cast<int>(bs.get_int("n_clusters", c.blackspot.n_clusters));
  c.blackspot.rmse_max = bs.get_double("rmse_max", c.blackspot.rmse_max);
  c.blackspot.max_track_elimination = bs.get_double("max_track_elimination", c.blackspot.max_track_elimination);
  c.blackspot.b_min = bs.get_double("b_min", c.blackspot.b_min);
  c.blackspot.max_iter = static_cast<int>(bs.get_int("max_iter", c.blackspot.max_iter));
  c.blackspot.seed = derive_seed(c.seed, "blackspot.kmeans");
  c.tradeoff_thresholds = bs.get_doubles("thresholds", c.tradeoff_thresholds);
  reject_unused(bs, "blackspot.");
  kv.absorb(bs, "blackspot");
  c.blackspot.validate();

  const auto res = kv.section("residual");
  c.residual_kind = res.get_string("kind", c.residual_kind);
  c.grid.length_scales = res.get_doubles("length_scales", c.grid.length_scales);
  c.grid.sigma_f = res.get_doubles("sigma_f", c.grid.sigma_f);
  c.grid.sigma_n = res.get_doubles("sigma_n", c.grid.sigma_n);
  c.grid.search_pairs = static_cast<std::size_t>(res.get_int("search_pairs", static_cast<long long>(c.grid.search_pairs)));
  c.grid.max_pairs = static_cast<std::size_t>(res.get_int("max_pairs", static_cast<long long>(c.grid.max_pairs)));
  reject_unused(res, "residual.");
  kv.absorb(res, "residual");
  if (c.residual_kind != "gp" && c.residual_kind != "passthrough") {
    throw Error("residual.kind must be 'gp' or 'passthrough'");
  }

  const auto sch = kv.section("scheme");
  c.scheme_config = SchemeConfig::from(sch);
  if (sch.has("s_star")) c.s_star = c.scheme_config.s_star;
  if (sch.has("s_max")) c.s_max = c.scheme_config.s_max;
  c.s_star_quantile = sch.get_double("s_star_quantile", c.s_star_quantile);
  reject_unused(sch, "scheme.");
  kv.absorb(sch, "scheme");
  if (!(c.s_star_quantile >= 0.0 && c.s_star_quantile <= 1.0)) throw Error("scheme.s_star_quantile must be in [0, 1]");

  const auto sim = kv.section("sim");
  c.sim.sensor_rate_bytes = sim.get_double("sensor_rate_bytes", c.sim.sensor_rate_bytes);
  c.sim.min_rate_mbits = sim.get_double("min_rate_mbits", c.sim.min_rate_mbits);
  c.sim.flush_at_end = sim.get_bool("flush_at_end", c.sim.flush_at_end);
  reject_unused(sim, "sim.");
  kv.absorb(sim, "sim");
  c.sim.validate();

  const auto power = kv.section("power");
  c.power = PowerModelParams::from(power);
  reject_unused(power, "power.");
  kv.absorb(power, "power");

  const auto kpi = kv.section("kpi");
  c.tables_file = kpi.get_string("tables", "");
  reject_unused(kpi, "kpi.");
  kv.absorb(kpi, "kpi");
  if (!c.tables_file.empty()) require_files({c.tables_file}, "table file");

  const auto drift = kv.section("drift");
  auto& dp = c.drift.params;
  dp.train_fraction = drift.get_double("train_fraction", dp.train_fraction);
  dp.pretrain_epochs = static_cast<int>(drift.get_int("pretrain_epochs", dp.pretrain_epochs));
  dp.net = c.net;
  dp.net.learning_rate = drift.get_double("learning_rate", dp.net.learning_rate);
  dp.net.momentum = drift.get_double("momentum", dp.net.momentum);
  dp.net.batch_size = static_cast<std::size_t>(drift.get_int("batch_size", static_cast<long long>(dp.net.batch_size)));
  dp.net.hidden = static_cast<std::size_t>(drift.get_int("hidden", static_cast<long long>(dp.net.hidden)));
  dp.net.seed = derive_seed(c.seed, "drift.net");
  dp.seed = derive_seed(c.seed, "drift");
  c.drift.pretrain_drives = static_cast<int>(drift.get_int("pretrain_drives", c.drift.pretrain_drives));
  c.drift.stream_drives = static_cast<int>(drift.get_int("stream_drives", c.drift.stream_drives));
  c.drift.stream_files = paths(drift, "stream_files");
  require_files(c.drift.stream_files, "trace file");
  c.drift.synthetic_overrides = drift.section("synthetic");
  for (const auto& [k, v] : c.drift.synthetic_overrides.entries()) drift.mark_used("synthetic." + k);
  reject_unused(drift, "drift.");
  kv.absorb(drift, "drift");
  {
    KeyValueFile merged;
    for (const auto& [k, v] : syn.entries()) {
      if (!kDriveKeys.count(k)) merged.set(k, v);
    }
    for (const auto& [k, v] : c.drift.synthetic_overrides.entries()) merged.set(k, v);
    SyntheticConfig::from(merged);
    reject_unused(merged, "drift.synthetic.");
  }

  reject_unused(kv);
  c.scheme_config.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return stage("config", [&] { return parse(KeyValueFile::load(path)); });
}

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"w", "delta_t_max", "rmse_max", "epochs", "periodic_interval", "s_star"};
  return axes;
}

void apply_axis(ExperimentConfig& c, const std::string& axis, double value) {
  if (axis == "w") {
    c.scheme_config.w = value;
  } else if (axis == "delta_t_max") {
    c.scheme_config.delta_t_max = value;
    // Keep CAT's lower bound below short deadlines.
    c.scheme_config.delta_t_min = std::min(c.scheme_config.delta_t_min, 0.5 * value);
  } else if (axis == "rmse_max") {
    c.blackspot.rmse_max = value;
  } else if (axis == "epochs") {
    if (value < 1.0 || value != std::floor(value)) throw Error("epochs axis needs positive integers");
    c.epochs = static_cast<std::size_t>(value);
  } else if (axis == "periodic_interval") {
    c.scheme_config.periodic_interval = value;
  } else if (axis == "s_star") {
    c.s_star = value;
  } else {
    std::string valid;
    for (const auto& a : sweep_axes()) valid += (valid.empty() ? "" : ", ") + a;
    throw Error("unknown sweep axis '" + axis + "' (valid: " + valid + ")");
  }
  c.scheme_config.validate();
  c.blackspot.validate();
}

// --- models -----------------------------------------------------------------

namespace {

std::vector<Trace> synthetic_set(const SyntheticConfig& base, std::uint64_t seed, const std::string& name, int n) {
  std::vector<Trace> out;
  for (int i = 0; i < n; ++i) {
    SyntheticConfig cfg = base;
    cfg.label = base.label + "-" + name + "-" + std::to_string(i);
    out.push_back(generate_synthetic_trace(cfg, derive_seed(seed, "trace." + name, static_cast<std::uint64_t>(i))));
  }
  return out;
}

std::vector<Trace> file_set(const std::vector<std::filesystem::path>& files, const TraceSchema& schema) {
  std::vector<Trace> out;
  for (const auto& f : files) out.push_back(load_trace(f, schema));
  return out;
}

std::vector<std::vector<Vec2>> tracks_of(const std::vector<Trace>& traces) {
  std::vector<std::vector<Vec2>> out;
  for (const auto& t : traces) {
    std::vector<Vec2> track;
    for (const auto& s : t.samples()) track.push_back(s.position);
    out.push_back(std::move(track));
  }
  return out;
}

}  // namespace

std::vector<Trace> load_traces(const ExperimentConfig& c) {
  ExperimentModels m;
  auto all = stage("trace", [&] {
    std::vector<Trace> out;
    if (c.trace_source == "files") {
      for (auto* files : {&c.train_files, &c.validation_files, &c.replay_files}) {
        auto part = file_set(*files, c.schema);
        out.insert(out.end(), part.begin(), part.end());
      }
    } else {
      for (auto [name, n] : {std::pair{"train", c.train_drives}, std::pair{"validation", c.validation_drives},
                             std::pair{"replay", c.replay_drives}}) {
        auto part = synthetic_set(c.synthetic, c.seed, name, n);
        out.insert(out.end(), part.begin(), part.end());
      }
    }
    return out;
  });
  return all;
}

ExperimentModels build_models(const ExperimentConfig& c) {
  ExperimentModels m;
  stage("trace", [&] {
    if (c.trace_source == "files") {
      m.train = file_set(c.train_files, c.schema);
      m.validation = c.validation_files.empty() ? m.train : file_set(c.validation_files, c.schema);
      m.replay = c.replay_files.empty() ? m.validation : file_set(c.replay_files, c.schema);
    } else {
      m.train = synthetic_set(c.synthetic, c.seed, "train", c.train_drives);
      m.validation = synthetic_set(c.synthetic, c.seed, "validation", c.validation_drives);
      m.replay = synthetic_set(c.synthetic, c.seed, "replay", c.replay_drives);
    }
    return 0;
  });

  stage("predictor", [&] {
    m.cells = CellEncoder::fit(m.train);
    const Dataset train = build_dataset(m.train, m.cells);
    if (train.size() == 0) throw Error("training traces carry no (data rate, payload) samples");
    if (c.predictor_kind == "forest") {
      if (!c.predictor_model.empty()) {
        m.forest = std::make_shared<const ForestModel>(load_forest(c.predictor_model, &m.cells));
      } else {
        m.forest = std::make_shared<const ForestModel>(train_forest(train, c.forest));
      }
      m.predictor = std::make_shared<const ForestPredictor>(m.forest, m.cells);
    } else {
      if (!c.predictor_model.empty()) {
        m.net = std::make_shared<const IncrementalNetModel>(load_net(c.predictor_model));
      } else {
        IncrementalNetModel net(c.net);
        net.fit_offline(train, c.net_epochs, derive_seed(c.seed, "predictor.net.shuffle"));
        m.net = std::make_shared<const IncrementalNetModel>(std::move(net));
      }
      m.predictor = std::make_shared<const NetPredictor>(m.net, m.cells);
    }
    m.s_max = c.s_max ? *c.s_max : *std::max_element(train.y.begin(), train.y.end());
    m.s_star = c.s_star ? *c.s_star : quantile(train.y, c.s_star_quantile);
    if (!(m.s_max > 0.0)) throw Error("S_max must be positive (all training rates are 0)");

    std::vector<double> pred;
    std::vector<double> meas;
    for (const auto& t : m.validation) {
      for (const auto& s : t.samples()) {
        if (!s.measured_data_rate || !s.payload_bytes) continue;
        const double p = m.predictor->predict(s, *s.payload_bytes);
        m.errors.push_back({s.position, p, *s.measured_data_rate});
        pred.push_back(p);
        meas.push_back(*s.measured_data_rate);
      }
    }
    if (pred.size() < 2) throw Error("validation traces carry fewer than 2 labelled samples");
    m.validation_metrics = evaluate(pred, meas);
    return 0;
  });

  m.tables = stage("kpi", [&] {
    return std::make_shared<const PrbTables>(c.tables_file.empty() ? PrbTables::embedded()
                                                                    : PrbTables::load(c.tables_file));
  });
  refit_blackspots(c, m);
  return m;
}

void refit_blackspots(const ExperimentConfig& c, ExperimentModels& m) {
  m.blackspots = stage("blackspot", [&] {
    if (!c.blackspots_enabled) return std::make_shared<const BlackSpotMap>();
    const auto tracks = tracks_of(m.validation);
    return std::make_shared<const BlackSpotMap>(detect_black_spots(m.errors, c.blackspot, tracks));
  });
  m.truth = stage("residual", [&] {
    if (c.residual_kind == "passthrough") return std::make_shared<const GroundTruthModel>(GroundTruthModel::passthrough());
    return std::make_shared<const GroundTruthModel>(
        GroundTruthModel::fit(m.errors, m.blackspots, c.grid, derive_seed(c.seed, "residual")));
  });
}

SchemeConfig resolved_scheme_config(const ExperimentConfig& c, const ExperimentModels& m) {
  SchemeConfig s = c.scheme_config;
  s.s_star = m.s_star;
  s.s_max = m.s_max;
  s.validate();
  return s;
}

// --- runs -------------------------------------------------------------------

namespace {

std::string manifest(const ExperimentConfig& c, const ExperimentModels& m, const std::string& scheme,
                     const SchemeConfig& sc) {
  std::ostringstream out;
  out << "# odt experiment manifest 1\n[config]\n" << c.source.to_string();
  out << "[resolved]\n";
  out << "scheme = " << scheme << "\n";
  out << "seed = " << c.seed << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "eval_epochs = " << c.eval_epochs << "\n";
  out << "scheme.w = " << num(sc.w) << "\n";
  out << "scheme.delta_t_max = " << num(sc.delta_t_max) << "\n";
  out << "scheme.delta_t_min = " << num(sc.delta_t_min) << "\n";
  out << "scheme.s_star = " << num(sc.s_star) << "\n";
  out << "scheme.s_max = " << num(sc.s_max) << "\n";
  out << "blackspot.rmse_max = " << num(c.blackspot.rmse_max) << "\n";
  out << "blackspot.ellipses = " << m.blackspots->ellipses.size() << "\n";
  out << "blackspot.eliminated_fraction = " << num(m.blackspots->eliminated_fraction) << "\n";
  out << "predictor.kind = " << c.predictor_kind << "\n";
  out << "predictor.validation_rmse = " << num(m.validation_metrics.rmse) << "\n";
  out << "predictor.validation_mae = " << num(m.validation_metrics.mae) << "\n";
  out << "predictor.validation_r2 = "
      << (m.validation_metrics.r2 ? num(*m.validation_metrics.r2) : std::string("undefined")) << "\n";
  if (const auto* gp = m.truth->outside_model()) {
    out << "residual.outside = " << num(gp->hyper().length_scale) << " " << num(gp->hyper().sigma_f) << " "
        << num(gp->hyper().sigma_n) << "\n";
  }
  if (const auto* gp = m.truth->inside_model()) {
    out << "residual.inside = " << num(gp->hyper().length_scale) << " " << num(gp->hyper().sigma_f) << " "
        << num(gp->hyper().sigma_n) << "\n";
  }
  out << "kpi.tables_checksum = " << m.tables->checksum() << "\n";
  out << "[seeds]\n";
  out << "predictor.forest = " << c.forest.seed << "\n";
  out << "blackspot.kmeans = " << c.blackspot.seed << "\n";
  out << "residual = " << derive_seed(c.seed, "residual") << "\n";
  out << "sim = " << derive_seed(c.seed, "sim") << "\n";
  out << "eval = " << derive_seed(c.seed, "eval") << "\n";
  return out.str();
}

std::string runlog_name(const char* kind, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.csv", kind, i);
  return buf;
}

}  // namespace

ExperimentResult run_with_models(const ExperimentConfig& c, const ExperimentModels& m, const std::string& scheme,
                                 const std::filesystem::path& out) {
  ExperimentResult r;
  r.scheme = scheme;
  const SchemeConfig sc = stage("scheme", [&] { return resolved_scheme_config(c, m); });
  auto agent = stage("scheme", [&] { return make_agent(scheme, sc, m.blackspots); });
  SimModels sim_models{m.predictor, m.truth, m.tables.get(), c.power};

  stage("simulation", [&] {
    r.epochs = train_epochs(m.replay, *agent, sim_models, c.sim, c.epochs, derive_seed(c.seed, "sim"),
                            [&](const EpochOutcome& o) { r.logs.push_back(o.log); });
    agent->set_learning(false);
    for (std::size_t e = 0; e < c.eval_epochs; ++e) {
      auto o = run_epoch(m.replay[e % m.replay.size()], *agent, sim_models, c.sim,
                         derive_seed(derive_seed(c.seed, "eval"), "epoch", e), e);
      r.eval.push_back(o.result);
      r.logs.push_back(std::move(o.log));
    }
    return 0;
  });

  stage("kpi", [&] {
    std::vector<TransmissionRecord> records;
    const std::size_t first = c.eval_epochs > 0 ? c.epochs : c.epochs - 1;
    for (std::size_t i = first; i < r.logs.size(); ++i) {
      const auto recs = r.logs[i].records();
      records.insert(records.end(), recs.begin(), recs.end());
    }
    r.kpis = summarize_run(records, sc, *m.tables, c.power);
    std::vector<double> rates;
    for (const auto& e : r.epochs) rates.push_back(e.mean_rate);
    if (rates.size() > 20) r.convergence = convergence_epoch(rates, 20, 0.05);
    return 0;
  });

  if (!out.empty()) {
    stage("output", [&] {
      std::filesystem::create_directories(out / "runlogs");
      write_text(out / "manifest.txt", manifest(c, m, scheme, sc));
      write_text(out / "epochs.csv", format_epochs(r.epochs));
      if (!r.eval.empty()) write_text(out / "eval.csv", format_epochs(r.eval));
      for (std::size_t i = 0; i < r.logs.size(); ++i) {
        const bool train = i < c.epochs;
        write_text(out / "runlogs" / runlog_name(train ? "epoch" : "eval", train ? i : i - c.epochs),
                   format_runlog(r.logs[i]));
      }
      std::string kpi = "scheme = " + scheme + "\n" + format_kpis(r.kpis);
      kpi += "convergence_epoch = " + (r.convergence ? std::to_string(*r.convergence) : std::string("none")) + "\n";
      write_text(out / "kpi.txt", kpi);
      write_text(out / "blackspots.txt", format_black_spots(*m.blackspots));
      return 0;
    });
  }
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  const auto models = build_models(c);
  return run_with_models(c, models, c.scheme, c.out);
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& axis, const std::vector<double>& values) {
  if (values.empty()) throw StageError("config", "sweep needs at least one value");
  // Validate the axis before training anything.
  stage("config", [&] {
    ExperimentConfig probe = config;
    apply_axis(probe, axis, values.front());
    return 0;
  });
  const auto base = build_models(config);
  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig c = config;
    stage("config", [&] {
      apply_axis(c, axis, v);
      return 0;
    });
    const std::filesystem::path out = config.out.empty() ? std::filesystem::path{} : config.out / (axis + "_" + num(v));
    if (axis == "rmse_max") {
      ExperimentModels m = base;
      refit_blackspots(c, m);
      rows.push_back({v, run_with_models(c, m, c.scheme, out).kpis});
    } else {
      rows.push_back({v, run_with_models(c, base, c.scheme, out).kpis});
    }
  }
  if (!config.out.empty()) {
    stage("output", [&] {
      std::filesystem::create_directories(config.out);
      write_text(config.out / "sweep.csv", format_sweep(axis, rows));
      return 0;
    });
  }
  return rows;
}

std::vector<CompareRow> compare_schemes(const ExperimentConfig& config, const std::vector<std::string>& schemes) {
  stage("config", [&] {
    if (schemes.size() < 2) throw Error("compare needs at least 2 schemes");
    for (const auto& s : schemes) make_agent(s, SchemeConfig{});
    return 0;
  });
  const auto models = build_models(config);
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    const std::filesystem::path out =
        config.out.empty() ? std::filesystem::path{} : config.out / (std::to_string(i) + "_" + schemes[i]);
    rows.push_back({schemes[i], run_with_models(config, models, schemes[i], out).kpis});
  }
  if (!config.out.empty()) {
    stage("output", [&] {
      std::filesystem::create_directories(config.out);
      write_text(config.out / "compare.csv", format_compare(rows));
      write_text(config.out / "compare_deltas.csv", format_compare_deltas(rows));
      return 0;
    });
  }
  return rows;
}

ClusterReport run_cluster(const ExperimentConfig& config) {
  const auto m = build_models(config);
  ClusterReport rep;
  rep.map = *m.blackspots;
  stage("blackspot", [&] {
    const auto tracks = tracks_of(m.validation);
    rep.tradeoff = tradeoff_curve(m.errors, config.blackspot, config.tradeoff_thresholds, tracks);
    std::vector<BlackSpotMap> maps{rep.map};
    rep.dwell.per_operator.resize(1);
    for (const auto& t : m.replay) {
      const auto d = dwell_statistics(t, maps);
      auto merge = [](DwellStats& into, const DwellStats& from) {
        into.durations.insert(into.durations.end(), from.durations.begin(), from.durations.end());
        into.distances.insert(into.distances.end(), from.distances.begin(), from.distances.end());
        into.total_time += from.total_time;
        into.total_distance += from.total_distance;
      };
      merge(rep.dwell.per_operator[0], d.per_operator[0]);
      merge(rep.dwell.best_of_operators, d.best_of_operators);
    }
    return 0;
  });
  if (!config.out.empty()) {
    stage("output", [&] {
      std::filesystem::create_directories(config.out);
      write_text(config.out / "blackspots.txt", format_black_spots(rep.map));
      write_text(config.out / "tradeoff.csv", format_tradeoff(rep.tradeoff));
      std::ostringstream dwell;
      dwell << "quantity,value,cumulative_probability\n";
      for (const auto& [v, p] : ecdf(rep.dwell.per_operator[0].durations)) dwell << "time_s," << num(v) << ',' << num(p) << "\n";
      for (const auto& [v, p] : ecdf(rep.dwell.per_operator[0].distances)) dwell << "distance_m," << num(v) << ',' << num(p) << "\n";
      write_text(config.out / "dwell_ecdf.csv", dwell.str());
      return 0;
    });
  }
  return rep;
}

DriftCurve run_drift(const ExperimentConfig& config) {
  auto [a, b] = stage("trace", [&] {
    std::vector<Trace> ta;
    std::vector<Trace> tb;
    if (config.trace_source == "files") {
      ta = file_set(config.train_files, config.schema);
    } else {
      ta = synthetic_set(config.synthetic, derive_seed(config.seed, "drift.a"), "drift-a", config.drift.pretrain_drives);
    }
    if (!config.drift.stream_files.empty()) {
      tb = file_set(config.drift.stream_files, config.schema);
    } else {
      KeyValueFile merged;
      const auto base = config.source.section("synthetic");
      for (const auto& [k, v] : base.entries()) {
        if (!kDriveKeys.count(k)) merged.set(k, v);
      }
      for (const auto& [k, v] : config.drift.synthetic_overrides.entries()) merged.set(k, v);
      tb = synthetic_set(SyntheticConfig::from(merged), derive_seed(config.seed, "drift.b"), "drift-b",
                         config.drift.stream_drives);
    }
    return std::pair{ta, tb};
  });
  const auto curve = stage("predictor", [&] {
    const auto cells = CellEncoder::fit(a);
    return concept_drift_experiment(build_dataset(a, cells), build_dataset(b, cells), config.drift.params);
  });
  if (!config.out.empty()) {
    stage("output", [&] {
      std::filesystem::create_directories(config.out);
      write_text(config.out / "drift.csv", format_drift(curve));
      return 0;
    });
  }
  return curve;
}

// --- tables -----------------------------------------------------------------

namespace {
std::string kpi_columns() { return "mean_rate_mbits,mean_aoi_s,e_s,e_aoi,prb_per_mb,mean_energy_j,transmissions"; }
std::string kpi_values(const RunKpis& k) {
  return num(k.mean_rate) + "," + num(k.mean_aoi) + "," + num(k.e_s) + "," + num(k.e_aoi) + "," +
         (k.prb_per_mb ? num(*k.prb_per_mb) : std::string("")) + "," + num(k.mean_energy) + "," +
         std::to_string(k.transmissions);
}
}  // namespace

std::string format_sweep(const std::string& axis, const std::vector<SweepRow>& rows) {
  std::string out = axis + "," + kpi_columns() + "\n";
  for (const auto& r : rows) out += num(r.value) + "," + kpi_values(r.kpis) + "\n";
  return out;
}

std::string format_compare(const std::vector<CompareRow>& rows) {
  std::string out = "scheme," + kpi_columns() + "\n";
  for (const auto& r : rows) out += r.scheme + "," + kpi_values(r.kpis) + "\n";
  return out;
}

std::string format_compare_deltas(const std::vector<CompareRow>& rows) {
  auto rel = [](double base, double v) { return base != 0.0 ? num((v - base) / base) : std::string(""); };
  std::string out = "baseline,scheme,d_mean_rate,d_mean_aoi,d_prb_per_mb,d_mean_energy\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (i == j) continue;
      const auto& a = rows[i].kpis;
      const auto& b = rows[j].kpis;
      out += rows[i].scheme + "," + rows[j].scheme + "," + rel(a.mean_rate, b.mean_rate) + "," +
             rel(a.mean_aoi, b.mean_aoi) + "," +
             (a.prb_per_mb && b.prb_per_mb ? rel(*a.prb_per_mb, *b.prb_per_mb) : std::string("")) + "," +
             rel(a.mean_energy, b.mean_energy) + "\n";
    }
  }
  return out;
}

std::string format_tradeoff(const std::vector<TradeoffRow>& rows) {
  std::string out = "rmse_max,eliminated_fraction,ellipses,samples_outside,r2,rmse,degenerate\n";
  for (const auto& r : rows) {
    out += num(r.rmse_max) + "," + num(r.eliminated_fraction) + "," + std::to_string(r.ellipses) + "," +
           std::to_string(r.samples_outside) + "," + (r.r2 ? num(*r.r2) : std::string("")) + "," +
           (r.degenerate ? std::string("") : num(r.rmse)) + "," + (r.degenerate ? "1" : "0") + "\n";
  }
  return out;
}

std::string format_drift(const DriftCurve& curve) {
  std::string out = "batch,rmse_test_a,rmse_test_b\n";
  for (std::size_t i = 0; i < curve.rmse_a.size(); ++i) {
    out += std::to_string(i) + "," + num(curve.rmse_a[i]) + "," +
           (i < curve.rmse_b.size() ? num(curve.rmse_b[i]) : std::string("")) + "\n";
  }
  return out;
}

}  // namespace odt
