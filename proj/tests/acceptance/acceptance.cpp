// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 when any fails.
//
//   odt_acceptance <configs-dir> [<data-dir>]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "odt/experiment.hpp"

using namespace odt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = dt < limit_s;
  const bool ok = o.pass && in_time;
  failures += !ok;
  std::printf("%s  %2d  %-28s %s  [%.2f s, limit %.0f s%s]\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), dt,
              limit_s, in_time ? "" : ", too slow");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Series checks with a single tolerated adjacent-pair violation of relative size <= tol.
bool trend(const std::vector<double>& x, int dir, bool strict, double tol) {
  int bad = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double step = dir * (x[i + 1] - x[i]);
    const bool ok = strict ? step > 0.0 : step >= 0.0;
    if (ok) continue;
    if (++bad > 1 || std::abs(x[i + 1] - x[i]) > tol * std::abs(x[i])) return false;
  }
  return true;
}

std::string join(const std::vector<double>& x) {
  std::string s;
  for (double v : x) s += (s.empty() ? "" : " ") + fmt("%.3f", v);
  return s;
}

// --- 1 ----------------------------------------------------------------------

Outcome formulas() {
  double worst = 0.0;
  int checks = 0;
  auto eq = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want));
    ++checks;
  };
  auto truth = [&](bool got, bool want) {
    worst = std::max(worst, got == want ? 0.0 : 1.0);
    ++checks;
  };

  CatParams p{0.0, 10.0, 10.0, 120.0, 1.0};
  eq(cat_probability(7.0, 5.0, p), 0.0);
  eq(cat_probability(7.0, 121.0, p), 1.0);
  eq(cat_probability(5.0, 60.0, p), 0.5);
  eq(cat_probability(-4.0, 60.0, p), 0.0);
  p.exponent = 3.0;
  eq(cat_probability(10.0, 60.0, p), 1.0);
  p.exponent = 2.0;
  eq(cat_probability(3.0, 60.0, p), 0.09);

  eq(q_update(0.0, 1.0, 0.5), 0.5);
  eq(q_update(0.7, 0.7, 0.3), 0.7);
  eq(q_update(0.2, -0.4, 1.0), -0.4);
  double q = 2.0;
  for (int n = 0; n < 25; ++n) q = q_update(q, -1.0, 0.1);
  eq(q, -1.0 + std::pow(0.9, 25) * 3.0);

  SchemeConfig c;
  c.w = 0.9;
  c.s_star = 15.0;
  c.s_max = 40.0;
  c.delta_t_max = 120.0;
  eq(tx_reward(20.0, 60.0, c), 0.9 * 5.0 / 40.0 + 0.1 * 60.0 / 120.0);
  eq(tx_reward(20.0, 60.0, c), 0.1625);
  eq(tx_reward(15.0, 0.0, c), 0.0);
  SchemeConfig c1 = c;
  c1.w = 1.0;
  c1.s_star = 0.0;
  eq(tx_reward(40.0, 30.0, c1), 1.0);
  eq(idle_reward(119.9, c), 0.0);
  eq(idle_reward(120.0, c), -1.0);
  eq(idle_reward(300.0, c), -1.0);

  const auto e = efficiency_indicators(10.0, 30.0, c);
  eq(e.e_s, 10.0 / 15.0);
  eq(e.e_aoi, 0.75);
  const auto e1 = efficiency_indicators(15.0, 0.0, c);
  eq(e1.e_s, 1.0);
  eq(e1.e_aoi, 1.0);

  eq(LinUcb::alpha_for(0.1), 1.0 + std::sqrt(std::log(20.0) / 2.0));

  const std::vector<double> t2{0.0, 2.0};
  const std::vector<double> p2{1.0, 1.0};
  const auto m = evaluate(p2, t2);
  eq(m.mae, 1.0);
  eq(m.rmse, 1.0);
  eq(m.r2.value_or(99.0), 0.0);
  Rng rng(17);
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    t.push_back(10.0 * uniform01(rng));
    y.push_back(t.back() + uniform01(rng) - 0.5);
  }
  double mean = 0.0, ae = 0.0, se = 0.0, st = 0.0;
  for (double v : t) mean += v / t.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    ae += std::abs(y[i] - t[i]);
    se += (y[i] - t[i]) * (y[i] - t[i]);
    st += (t[i] - mean) * (t[i] - mean);
  }
  const auto mr = evaluate(y, t);
  eq(mr.mae, ae / t.size());
  eq(mr.rmse, std::sqrt(se / t.size()));
  eq(*mr.r2, 1.0 - se / st);

  BlackSpotEllipse el{{100.0, 50.0}, 10.0, 2.0, 0.0, 0.0};
  truth(contains(el, {100.0, 50.0}), true);
  truth(contains(el, {110.0, 50.0}), true);
  truth(contains(el, {100.0, 53.0}), false);
  BlackSpotEllipse rot{{0.0, 0.0}, 10.0, 2.0, std::numbers::pi / 4, 0.0};
  truth(contains(rot, {7.0, 7.0}), true);     // u = 9.90, w = 0
  truth(contains(rot, {-1.5, 1.5}), false);   // u = 0, w = -2.12
  truth(contains(rot, {-1.0, 1.0}), true);    // w = -1.41

  TransmissionRecord r;
  r.send_time = 12.0;
  r.oldest_generated_at = 0.0;
  eq(aoi(r), 12.0);

  return {worst <= 1e-9, fmt("%d checks, max deviation %.1e (tol 1e-9)", checks, worst)};
}

// --- 2 ----------------------------------------------------------------------

struct NaiveArm {
  std::vector<Eigen::Vector2d> c;
  std::vector<double> r;

  // A = I + sum c c^T, b = sum r c, inverse by the adjugate.
  void solve(double& a00, double& a01, double& a11, Eigen::Vector2d& theta) const {
    double m00 = 1.0, m01 = 0.0, m11 = 1.0, b0 = 0.0, b1 = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      m00 += c[i].x() * c[i].x();
      m01 += c[i].x() * c[i].y();
      m11 += c[i].y() * c[i].y();
      b0 += r[i] * c[i].x();
      b1 += r[i] * c[i].y();
    }
    const double det = m00 * m11 - m01 * m01;
    a00 = m11 / det;
    a01 = -m01 / det;
    a11 = m00 / det;
    theta = {a00 * b0 + a01 * b1, a01 * b0 + a11 * b1};
  }

  double score(const Eigen::Vector2d& x, double alpha) const {
    double a00, a01, a11;
    Eigen::Vector2d th;
    solve(a00, a01, a11, th);
    const double quad = x.x() * (a00 * x.x() + a01 * x.y()) + x.y() * (a01 * x.x() + a11 * x.y());
    return th.dot(x) + alpha * std::sqrt(quad);
  }
};

Outcome linucb_oracle() {
  double worst = 0.0;
  int mismatches = 0;
  const double alpha = 1.0 + std::sqrt(std::log(2.0 / 0.1) / 2.0);
  for (int ep = 0; ep < 20; ++ep) {
    Rng rng(derive_seed(2024, "acceptance.linucb", ep));
    LinUcb bandit(0.1);
    NaiveArm arms[2];
    for (int step = 0; step < 500; ++step) {
      const Eigen::Vector2d x(2.0 * uniform01(rng) - 1.0, uniform01(rng));
      const double s_idle = arms[0].score(x, alpha);
      const double s_tx = arms[1].score(x, alpha);
      const Action want = s_tx > s_idle ? Action::Tx : Action::Idle;
      const Action got = bandit.select(x);
      mismatches += got != want;
      const double mu = got == Action::Tx ? 0.8 * x.x() - 0.2 * x.y() : 0.1 * x.y();
      const double reward = mu + 0.3 * (uniform01(rng) - 0.5);
      bandit.update(got, x, reward);
      auto& arm = arms[static_cast<int>(got)];
      arm.c.push_back(x);
      arm.r.push_back(reward);
      for (int a = 0; a < 2; ++a) {
        double a00, a01, a11;
        Eigen::Vector2d th;
        arms[a].solve(a00, a01, a11, th);
        worst = std::max(worst, (bandit.arm(static_cast<Action>(a)).theta - th).cwiseAbs().maxCoeff());
      }
    }
  }
  return {mismatches == 0 && worst <= 1e-9,
          fmt("20 x 500 steps, select mismatches %d, max |theta diff| %.1e (tol 1e-9)", mismatches, worst)};
}

// --- 3 ----------------------------------------------------------------------

Outcome regret() {
  const Eigen::Vector2d theta[2] = {{0.3, -0.2}, {-0.4, 0.6}};
  double at_1k = 0.0, at_10k = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(99, "acceptance.regret", seed));
    std::normal_distribution<double> noise(0.0, 0.1);
    LinUcb bandit(0.1);
    double cum = 0.0;
    for (int t = 1; t <= 10000; ++t) {
      const Eigen::Vector2d x(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
      const Action a = bandit.select(x);
      const double best = std::max(theta[0].dot(x), theta[1].dot(x));
      cum += best - theta[static_cast<int>(a)].dot(x);
      bandit.update(a, x, theta[static_cast<int>(a)].dot(x) + noise(rng));
      if (t == 1000) at_1k += cum / 1000.0 / 20.0;
      if (t == 10000) at_10k += cum / 10000.0 / 20.0;
    }
  }
  const double ratio = at_10k / at_1k;
  return {ratio < 0.5, fmt("regret/T %.4f at 1k, %.4f at 10k, ratio %.3f (< 0.5)", at_1k, at_10k, ratio)};
}

// --- 4 and 10 share one set of hotspot runs ---------------------------------

struct HotspotRuns {
  ExperimentConfig config;
  std::vector<std::string> names{"periodic", "cat", "ml-cat", "rl-cat", "bs-cb"};
  std::vector<ExperimentResult> results;
};

const HotspotRuns& hotspot(const fs::path& configs) {
  static HotspotRuns runs = [&] {
    HotspotRuns h;
    h.config = ExperimentConfig::load(configs / "hotspot.cfg");
    h.config.out.clear();
    const auto models = build_models(h.config);
    for (const auto& n : h.names) h.results.push_back(run_with_models(h.config, models, n, ""));
    return h;
  }();
  return runs;
}

const ExperimentResult& result(const HotspotRuns& h, const std::string& name) {
  const auto i = std::find(h.names.begin(), h.names.end(), name) - h.names.begin();
  return h.results[static_cast<std::size_t>(i)];
}

// Mean training rate from the convergence epoch on (last 100 epochs when the
// series never settles).
double converged_mean(const ExperimentResult& r) {
  std::vector<double> rate;
  for (const auto& e : r.epochs) rate.push_back(e.mean_rate);
  const auto c = convergence_epoch(rate, 20, 0.05);
  const std::size_t from = c ? *c : rate.size() - std::min<std::size_t>(100, rate.size());
  double s = 0.0;
  for (std::size_t i = from; i < rate.size(); ++i) s += rate[i];
  return s / static_cast<double>(rate.size() - from);
}

Outcome convergence(const fs::path& configs) {
  const auto& h = hotspot(configs);
  const auto& bs = result(h, "bs-cb");
  const auto& rl = result(h, "rl-cat");
  std::vector<double> rate;
  for (const auto& e : bs.epochs) rate.push_back(e.mean_rate);
  const auto c = convergence_epoch(rate, 20, 0.05);
  const double m_bs = converged_mean(bs);
  const double m_rl = converged_mean(rl);
  const bool ok = c && *c <= 300 && bs.epochs.size() >= 300 && m_bs > m_rl;
  return {ok, fmt("bs-cb converged at epoch %s of %zu, converged rate bs-cb %.3f vs rl-cat %.3f MBit/s",
                  c ? std::to_string(*c).c_str() : "never", bs.epochs.size(), m_bs, m_rl)};
}

Outcome ordering(const fs::path& configs) {
  const auto& h = hotspot(configs);
  std::vector<double> rate, prb;
  for (const auto* n : {"periodic", "cat", "ml-cat", "bs-cb"}) {
    const auto& k = result(h, n).kpis;
    rate.push_back(k.mean_rate);
    prb.push_back(k.prb_per_mb.value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  bool ok = true;
  for (std::size_t i = 0; i + 1 < rate.size(); ++i) {
    ok = ok && rate[i + 1] >= 0.95 * rate[i];
    ok = ok && prb[i + 1] <= 1.05 * prb[i];
  }
  return {ok, fmt("periodic/cat/ml-cat/bs-cb rate [%s] MBit/s, PRB/MB [%s] (5%% tol)", join(rate).c_str(),
                  join(prb).c_str())};
}

// --- 5, 6 -------------------------------------------------------------------

Outcome w_sweep(const fs::path& configs) {
  auto cfg = ExperimentConfig::load(configs / "hotspot.cfg");
  cfg.out.clear();
  const auto rows = sweep(cfg, "w", {0.1, 0.3, 0.5, 0.7, 0.9});
  std::vector<double> es, ea;
  for (const auto& r : rows) {
    es.push_back(r.kpis.e_s);
    ea.push_back(r.kpis.e_aoi);
  }
  const bool ok = trend(es, +1, false, 0.02) && trend(ea, -1, false, 0.02);
  return {ok, fmt("w 0.1..0.9: E_s [%s], E_AoI [%s]", join(es).c_str(), join(ea).c_str())};
}

Outcome dt_sweep(const fs::path& configs) {
  auto cfg = ExperimentConfig::load(configs / "hotspot.cfg");
  cfg.out.clear();
  const auto rows = sweep(cfg, "delta_t_max", {10, 30, 60, 120});
  std::vector<double> rate, age;
  for (const auto& r : rows) {
    rate.push_back(r.kpis.mean_rate);
    age.push_back(r.kpis.mean_aoi);
  }
  const double gain_lo = (rate[1] - rate[0]) / rate[0];
  const double gain_hi = (rate[3] - rate[2]) / rate[2];
  const bool ok = trend(rate, +1, false, 0.02) && gain_hi < gain_lo && trend(age, +1, true, 0.02);
  return {ok, fmt("dt_max 10..120: rate [%s] (gain 10->30 %.2f, 60->120 %.2f), AoI [%s]", join(rate).c_str(),
                  gain_lo, gain_hi, join(age).c_str())};
}

// --- 7 ----------------------------------------------------------------------

Outcome blackspot_tradeoff() {
  // 40 stretches of 50 samples along a road; twelve carry large errors.
  Rng rng(derive_seed(7, "acceptance.blackspot"));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<ErrorSample> samples;
  for (int g = 0; g < 40; ++g) {
    const bool bad = g % 10 == 2 || g % 10 == 5 || g % 10 == 8;
    const double sd = bad ? 4.0 + 0.25 * g / 4.0 : 1.0;
    for (int j = 0; j < 50; ++j) {
      const double pred = 10.0 + 5.0 * uniform01(rng);
      samples.push_back({{120.0 * g + 2.0 * j, 3.0 * uniform01(rng)}, pred, std::max(0.0, pred + sd * unit(rng))});
    }
  }
  BlackSpotConfig cfg;
  cfg.n_clusters = 40;
  cfg.max_track_elimination = 0.20;
  cfg.seed = 3;
  const std::vector<double> thresholds{std::numeric_limits<double>::infinity(), 8, 6, 5, 4, 3, 2.5, 2, 1.5};
  const auto rows = tradeoff_curve(samples, cfg, thresholds);
  double worst_fraction = 0.0;
  for (const auto& r : rows) worst_fraction = std::max(worst_fraction, r.eliminated_fraction);
  const double base = rows.front().rmse;
  const double capped = rows.back().rmse;

  // Independent recomputation of the capped row.
  cfg.rmse_max = thresholds.back();
  const auto map = detect_black_spots(samples, cfg);
  double se = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    bool inside = false;
    for (const auto& e : map.ellipses) {
      const double c = std::cos(e.alpha), sn = std::sin(e.alpha);
      const double dx = s.position.x - e.centroid.x, dy = s.position.y - e.centroid.y;
      const double u = c * dx + sn * dy, w = sn * dx - c * dy;
      inside = inside || u * u / (e.a * e.a) + w * w / (e.b * e.b) <= 1.0;
    }
    if (inside) continue;
    se += (s.predicted - s.measured) * (s.predicted - s.measured);
    ++n;
  }
  const double oracle = std::sqrt(se / static_cast<double>(n));
  const bool ok = rows.front().eliminated_fraction == 0.0 && capped <= 0.8 * base && worst_fraction <= 0.20 &&
                  std::abs(oracle - capped) <= 1e-9;
  return {ok, fmt("RMSE %.3f at 0%% -> %.3f at %.3f eliminated (%.0f%% lower, need 20%%), max fraction %.3f", base,
                  capped, rows.back().eliminated_fraction, 100.0 * (1.0 - capped / base), worst_fraction)};
}

// --- 8 ----------------------------------------------------------------------

Outcome drift(const fs::path& configs) {
  auto cfg = ExperimentConfig::load(configs / "drift.cfg");
  cfg.out.clear();
  const auto curve = run_drift(cfg);
  const auto& a = curve.rmse_a;
  const auto& b = curve.rmse_b;
  if (b.size() < 20) return {false, fmt("only %zu batch points", b.size())};
  const double a_after = *std::max_element(a.begin() + 1, a.begin() + 4);
  std::size_t run = 1, best = 1;
  double prev = (b[0] + b[1] + b[2]) / 3.0;
  for (std::size_t i = 2; i + 1 < b.size(); ++i) {
    const double ma = (b[i - 1] + b[i] + b[i + 1]) / 3.0;
    run = ma <= prev ? run + 1 : 1;
    best = std::max(best, run);
    prev = ma;
  }
  const bool ok = a_after >= 0.98 * a[0] && best >= 10 && b.back() < b.front();
  return {ok, fmt("%zu batches, test-A %.3f -> %.3f after first batches, longest falling run of test-B MA %zu, "
                  "test-B %.3f -> %.3f",
                  b.size() - 1, a[0], a_after, best, b.front(), b.back())};
}

// --- 9 ----------------------------------------------------------------------

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

Outcome prb_sanity(const fs::path& data) {
  const auto& tables = PrbTables::embedded();
  Rng rng(derive_seed(9, "acceptance.prb"));
  int violations = 0;
  for (int k = 0; k < 50; ++k) {
    TransmissionRecord r;
    r.achieved_rate = 0.1 + 59.9 * uniform01(rng);
    r.duration = 0.05 + 4.95 * uniform01(rng);
    r.payload = r.achieved_rate * r.duration * 1e6 / 8.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int cqi = 1; cqi <= 15; ++cqi) {
      r.cqi = cqi;
      const auto est = estimate_prbs(r, tables);
      violations += !est.valid || est.total > prev;
      prev = est.total;
    }
  }
  std::ifstream in(data / "lte_tables.txt", std::ios::binary);
  std::stringstream file;
  file << in.rdbuf();
  const std::uint64_t pinned = 11474068553202156400ull;
  const std::uint64_t sum = fnv1a(embedded_table_text());
  const bool same_file = file.str() == embedded_table_text();
  const bool spots = tables.tbs_bits(0, 1) == 16 && tables.tbs_bits(26, 110) == 75376 && tables.mcs_for_cqi(0) == -1 &&
                     tables.mcs_for_cqi(15) == 28;
  const bool ok = violations == 0 && sum == pinned && tables.checksum() == pinned && same_file && spots;
  return {ok, fmt("50 pairs x cqi 1..15, %d monotonicity violations, checksum %llu (%s), file %s, spot values %s",
                  violations, static_cast<unsigned long long>(sum), sum == pinned ? "matches" : "differs",
                  same_file ? "matches" : "differs", spots ? "ok" : "wrong")};
}

// --- 11 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const fs::path& configs) {
  std::size_t files = 0, differing = 0;
  for (const auto* scheme : {"bs-cb", "rl-cat", "cat"}) {
    fs::path dirs[2];
    for (int rep = 0; rep < 2; ++rep) {
      auto cfg = ExperimentConfig::load(configs / "hotspot.cfg");
      cfg.scheme = scheme;
      cfg.epochs = 25;
      cfg.eval_epochs = 2;
      dirs[rep] = fs::temp_directory_path() / fmt("odt_acceptance_det_%s_%d", scheme, rep);
      fs::remove_all(dirs[rep]);
      cfg.out = dirs[rep];
      run_experiment(cfg);
    }
    for (const auto& e : fs::directory_iterator(dirs[0] / "runlogs")) {
      ++files;
      differing += slurp(e.path()) != slurp(dirs[1] / "runlogs" / e.path().filename());
    }
    for (const auto& d : dirs) fs::remove_all(d);
  }
  return {files == 3 * 27 && differing == 0, fmt("%zu run logs compared across 3 schemes, %zu differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: odt_acceptance <configs-dir> [<data-dir>]\n");
    return 2;
  }
  const fs::path configs = argv[1];
  const fs::path data = argc > 2 ? fs::path(argv[2]) : configs.parent_path() / "data";

  report(1, "formula exactness", 1, formulas);
  report(2, "linucb oracle equivalence", 10, linucb_oracle);
  report(3, "bandit regret", 60, regret);
  report(4, "bs-cb convergence", 600, [&] { return convergence(configs); });
  report(5, "w trade-off trend", 600, [&] { return w_sweep(configs); });
  report(6, "dt_max trend", 600, [&] { return dt_sweep(configs); });
  report(7, "black-spot trade-off", 30, blackspot_tradeoff);
  report(8, "concept drift phases", 120, [&] { return drift(configs); });
  report(9, "prb estimation sanity", 5, [&] { return prb_sanity(data); });
  report(10, "scheme ordering", 600, [&] { return ordering(configs); });
  report(11, "determinism", 600, [&] { return determinism(configs); });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
