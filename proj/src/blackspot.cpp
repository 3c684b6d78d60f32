#include "odt/blackspot.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "odt/kvfile.hpp"
#include "odt/predictor.hpp"

namespace odt {

void BlackSpotConfig::validate() const {
  if (n_clusters < 1) throw Error("black spots: n_clusters must be >= 1");
  if (!(rmse_max > 0.0)) throw Error("black spots: rmse_max must be positive");
  if (!(max_track_elimination >= 0.0 && max_track_elimination <= 1.0)) {
    throw Error("black spots: max_track_elimination must be in [0, 1]");
  }
  if (!(b_min > 0.0)) throw Error("black spots: b_min must be positive");
  if (max_iter < 1) throw Error("black spots: max_iter must be >= 1");
}

// --- geometry ---------------------------------------------------------------

namespace {

double sq_dist(Vec2 a, Vec2 b) {
  const Vec2 d = a - b;
  return d.x * d.x + d.y * d.y;
}

int nearest(const std::vector<Vec2>& centroids, Vec2 p, double* d2 = nullptr) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(p, centroids[c]);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (d2) *d2 = bd;
  return best;
}

double normalize_angle(double alpha) {
  const double pi = std::numbers::pi;
  while (alpha >= pi / 2) alpha -= pi;
  while (alpha < -pi / 2) alpha += pi;
  return alpha;
}

}  // namespace

KMeansResult kmeans(std::span<const Vec2> points, int k, std::uint64_t seed, int max_iter) {
  if (points.empty()) throw Error("kmeans: no points");
  if (k < 1) throw Error("kmeans: k must be >= 1");
  std::set<std::pair<double, double>> distinct;
  for (auto p : points) distinct.insert({p.x, p.y});
  if (static_cast<std::size_t>(k) > distinct.size()) {
    throw Error("kmeans: k = " + std::to_string(k) + " exceeds " + std::to_string(distinct.size()) +
                " distinct points");
  }

  Rng rng(seed);
  const std::size_t n = points.size();
  KMeansResult r;
  r.centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], r.centroids[0]);
  while (r.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (double d : d2) total += d;
    double target = uniform01(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] <= 0.0) --pick;  // rounding left the cursor on a covered point
    r.centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points[i], points[pick]));
  }

  r.assignment.assign(n, -1);
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest(r.centroids, points[i]);
      if (c != r.assignment[i]) {
        r.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vec2> sum(r.centroids.size());
    std::vector<std::size_t> count(r.centroids.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.assignment[i]);
      sum[c] = sum[c] + points[i];
      ++count[c];
    }
    for (std::size_t c = 0; c < r.centroids.size(); ++c) {
      if (count[c] > 0) {
        r.centroids[c] = (1.0 / static_cast<double>(count[c])) * sum[c];
        continue;
      }
      // Empty cluster: move it onto the point worst served by its centroid.
      std::size_t worst = 0;
      double wd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sq_dist(points[i], r.centroids[static_cast<std::size_t>(r.assignment[i])]);
        if (d > wd) {
          wd = d;
          worst = i;
        }
      }
      r.centroids[c] = points[worst];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    r.assignment[i] = nearest(r.centroids, points[i], &d);
    r.inertia += d;
  }
  return r;
}

BlackSpotEllipse fit_ellipse(std::span<const Vec2> points, double b_min) {
  if (points.size() < 2) throw Error("fit_ellipse: need at least 2 points");
  if (!(b_min > 0.0)) throw Error("fit_ellipse: b_min must be positive");
  const double n = static_cast<double>(points.size());
  Vec2 c;
  for (auto p : points) c = c + p;
  c = (1.0 / n) * c;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (auto p : points) {
    const Vec2 v = p - c;
    sxx += v.x * v.x;
    syy += v.y * v.y;
    sxy += v.x * v.y;
  }
  const double alpha = normalize_angle(0.5 * std::atan2(2.0 * sxy, sxx - syy));
  const double ca = std::cos(alpha);
  const double sa = std::sin(alpha);
  double a0 = 0.0;
  double b0 = 0.0;
  for (auto p : points) {
    const Vec2 v = p - c;
    a0 = std::max(a0, std::abs(ca * v.x + sa * v.y));
    b0 = std::max(b0, std::abs(sa * v.x - ca * v.y));
  }
  double b = std::max(b0, b_min);
  double a = std::max(a0, b);
  // The axis-wise extents bound each coordinate separately; scale up so that
  // points extreme on both axes are still covered.
  double s = 1.0;
  for (auto p : points) {
    const Vec2 v = p - c;
    const double u = (ca * v.x + sa * v.y) / a;
    const double w = (sa * v.x - ca * v.y) / b;
    s = std::max(s, std::sqrt(u * u + w * w));
  }
  s *= 1.0 + 1e-12;  // rounding slack for the extreme points
  a *= s;
  b *= s;
  return {c, a, b, alpha, 0.0};
}

bool contains(const BlackSpotEllipse& e, Vec2 p) {
  const Vec2 v = p - e.centroid;
  const double c = std::cos(e.alpha);
  const double s = std::sin(e.alpha);
  const double u = c * v.x + s * v.y;
  const double w = s * v.x - c * v.y;
  return u * u / (e.a * e.a) + w * w / (e.b * e.b) <= 1.0;
}

bool in_any_black_spot(const BlackSpotMap& map, Vec2 p) {
  for (const auto& e : map.ellipses) {
    if (contains(e, p)) return true;
  }
  return false;
}

// --- detection --------------------------------------------------------------

ClusterAnalysis analyze_clusters(std::span<const ErrorSample> samples, const BlackSpotConfig& config,
                                 std::span<const std::vector<Vec2>> tracks) {
  config.validate();
  for (const auto& s : samples) {
    if (!(s.predicted >= 0.0) || !(s.measured >= 0.0)) throw Error("black spots: negative rate in error samples");
  }
  std::vector<Vec2> points;
  points.reserve(samples.size());
  for (const auto& s : samples) points.push_back(s.position);
  std::set<std::pair<double, double>> distinct;
  for (auto p : points) distinct.insert({p.x, p.y});
  if (distinct.size() < static_cast<std::size_t>(config.n_clusters)) {
    throw Error("black spots: too few samples (" + std::to_string(distinct.size()) + " distinct positions for " +
                std::to_string(config.n_clusters) + " clusters)");
  }

  ClusterAnalysis an;
  an.kmeans = kmeans(points, config.n_clusters, config.seed, config.max_iter);
  const auto k = static_cast<std::size_t>(config.n_clusters);
  an.clusters.resize(k);
  std::vector<double> sse(k, 0.0);
  std::vector<std::vector<Vec2>> members(k);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = static_cast<std::size_t>(an.kmeans.assignment[i]);
    const double e = samples[i].predicted - samples[i].measured;
    sse[c] += e * e;
    members[c].push_back(points[i]);
  }
  an.candidates.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& info = an.clusters[c];
    info.centroid = an.kmeans.centroids[c];
    info.members = members[c].size();
    info.rmse = info.members ? std::sqrt(sse[c] / static_cast<double>(info.members)) : 0.0;
    if (info.members >= 2) {
      an.candidates[c] = fit_ellipse(members[c], config.b_min);
    } else if (info.members == 1) {
      an.candidates[c] = {members[c][0], config.b_min, config.b_min, 0.0, 0.0};
    }
    an.candidates[c].cluster_rmse = info.rmse;
  }

  if (tracks.empty()) {
    an.tracks.push_back(points);
  } else {
    an.tracks.assign(tracks.begin(), tracks.end());
  }
  std::vector<Vec2> midpoints;
  for (const auto& t : an.tracks) {
    for (std::size_t i = 1; i < t.size(); ++i) {
      an.segment_length.push_back(distance(t[i - 1], t[i]));
      midpoints.push_back(0.5 * (t[i - 1] + t[i]));
    }
  }
  for (double l : an.segment_length) an.track_length += l;
  an.covered_segments.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (an.clusters[c].members == 0) continue;
    for (std::size_t s = 0; s < midpoints.size(); ++s) {
      if (contains(an.candidates[c], midpoints[s])) an.covered_segments[c].push_back(s);
    }
  }
  return an;
}

BlackSpotMap select_black_spots(const ClusterAnalysis& an, double rmse_max, double max_track_elimination) {
  BlackSpotMap map;
  map.clusters = an.clusters;
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < an.clusters.size(); ++c) {
    if (an.clusters[c].members > 0 && an.clusters[c].rmse > rmse_max) order.push_back(c);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return an.clusters[a].rmse > an.clusters[b].rmse; });
  std::vector<char> covered(an.segment_length.size(), 0);
  double covered_length = 0.0;
  for (auto c : order) {
    double added = 0.0;
    for (auto s : an.covered_segments[c]) {
      if (!covered[s]) added += an.segment_length[s];
    }
    const double fraction = an.track_length > 0.0 ? (covered_length + added) / an.track_length : 0.0;
    if (fraction > max_track_elimination) break;
    for (auto s : an.covered_segments[c]) covered[s] = 1;
    covered_length += added;
    map.ellipses.push_back(an.candidates[c]);
    map.ellipse_cluster.push_back(static_cast<int>(c));
  }
  map.eliminated_fraction = an.track_length > 0.0 ? covered_length / an.track_length : 0.0;
  return map;
}

BlackSpotMap detect_black_spots(std::span<const ErrorSample> samples, const BlackSpotConfig& config,
                                std::span<const std::vector<Vec2>> tracks) {
  const auto an = analyze_clusters(samples, config, tracks);
  return select_black_spots(an, config.rmse_max, config.max_track_elimination);
}

std::vector<TradeoffRow> tradeoff_curve(std::span<const ErrorSample> samples, const BlackSpotConfig& config,
                                        std::span<const double> thresholds,
                                        std::span<const std::vector<Vec2>> tracks) {
  if (thresholds.empty()) throw Error("tradeoff_curve: no thresholds");
  const auto an = analyze_clusters(samples, config, tracks);
  std::vector<TradeoffRow> rows;
  for (double t : thresholds) {
    const auto map = select_black_spots(an, t, config.max_track_elimination);
    TradeoffRow row;
    row.rmse_max = t;
    row.eliminated_fraction = map.eliminated_fraction;
    row.ellipses = map.ellipses.size();
    std::vector<double> pred;
    std::vector<double> meas;
    for (const auto& s : samples) {
      if (in_any_black_spot(map, s.position)) continue;
      pred.push_back(s.predicted);
      meas.push_back(s.measured);
    }
    row.samples_outside = pred.size();
    if (pred.size() < 2) {
      row.degenerate = true;
    } else {
      const auto m = evaluate(pred, meas);
      row.r2 = m.r2;
      row.rmse = m.rmse;
    }
    rows.push_back(row);
  }
  return rows;
}

// --- dwell statistics -------------------------------------------------------

namespace {

DwellStats dwell_from_flags(const Trace& trace, const std::vector<char>& inside) {
  DwellStats st;
  const auto samples = trace.samples();
  std::size_t i = 0;
  while (i < samples.size()) {
    if (!inside[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double dist = 0.0;
    while (j + 1 < samples.size() && inside[j + 1]) {
      dist += distance(samples[j].position, samples[j + 1].position);
      ++j;
    }
    const double dur = samples[j].timestamp - samples[i].timestamp;
    st.durations.push_back(dur);
    st.distances.push_back(dist);
    st.total_time += dur;
    st.total_distance += dist;
    i = j + 1;
  }
  return st;
}

}  // namespace

DwellReport dwell_statistics(const Trace& trace, std::span<const BlackSpotMap> maps) {
  DwellReport report;
  const auto samples = trace.samples();
  std::vector<char> all(samples.size(), maps.empty() ? 0 : 1);
  for (const auto& map : maps) {
    std::vector<char> inside(samples.size(), 0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      inside[i] = in_any_black_spot(map, samples[i].position) ? 1 : 0;
      all[i] = static_cast<char>(all[i] && inside[i]);
    }
    report.per_operator.push_back(dwell_from_flags(trace, inside));
  }
  report.best_of_operators = dwell_from_flags(trace, all);
  return report;
}

std::vector<std::pair<double, double>> ecdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

// --- files ------------------------------------------------------------------

namespace {
std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
}  // namespace

std::string format_black_spots(const BlackSpotMap& map) {
  std::ostringstream out;
  out << "# odt-blackspots 1\n";
  out << "# eliminated_fraction " << num(map.eliminated_fraction) << "\n";
  out << "# cx cy a b alpha_rad cluster_rmse\n";
  for (const auto& e : map.ellipses) {
    out << num(e.centroid.x) << ' ' << num(e.centroid.y) << ' ' << num(e.a) << ' ' << num(e.b) << ' '
        << num(e.alpha) << ' ' << num(e.cluster_rmse) << "\n";
  }
  return out.str();
}

void save_black_spots(const BlackSpotMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write black-spot map " + path.string());
  out << format_black_spots(map);
}

BlackSpotMap load_black_spots(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing black-spot map " + path.string());
  BlackSpotMap map;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::istringstream h(t.substr(1));
      std::string key;
      h >> key;
      if (key == "odt-blackspots") {
        int version = 0;
        h >> version;
        if (version != 1) throw Error(path.string() + ": unsupported black-spot map version");
        header = true;
      } else if (key == "eliminated_fraction") {
        std::string v;
        h >> v;
        map.eliminated_fraction = parse_double(v, path.string() + " eliminated_fraction");
      }
      continue;
    }
    if (!header) throw Error(path.string() + ": missing '# odt-blackspots 1' header");
    std::istringstream row(t);
    std::vector<double> f;
    std::string tok;
    while (row >> tok) f.push_back(parse_double(tok, path.string() + ":" + std::to_string(lineno)));
    if (f.size() != 6) throw Error(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    BlackSpotEllipse e{{f[0], f[1]}, f[2], f[3], f[4], f[5]};
    if (!(e.b > 0.0) || e.a < e.b) throw Error(path.string() + ":" + std::to_string(lineno) + ": need a >= b > 0");
    map.ellipses.push_back(e);
    map.ellipse_cluster.push_back(-1);
  }
  if (!header) throw Error(path.string() + ": missing '# odt-blackspots 1' header");
  return map;
}

}  // namespace odt
