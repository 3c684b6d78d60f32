#include "odt/trace.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "odt/kvfile.hpp"

namespace odt {

namespace {

constexpr double kEarthRadius = 6371000.0;
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kRouteStep = 10.0;
constexpr double kZoneLength = 2000.0;
constexpr double kTaUnit = 78.12;

std::string num(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

Vec2 project(const GeoAnchor& anchor, double lat_deg, double lon_deg) {
  const double x = (lon_deg - anchor.lon_deg) * kDeg * kEarthRadius * std::cos(anchor.lat_deg * kDeg);
  const double y = (lat_deg - anchor.lat_deg) * kDeg * kEarthRadius;
  return {x, y};
}

void unproject(const GeoAnchor& anchor, Vec2 p, double& lat_deg, double& lon_deg) {
  lat_deg = anchor.lat_deg + p.y / kEarthRadius / kDeg;
  lon_deg = anchor.lon_deg + p.x / (kEarthRadius * std::cos(anchor.lat_deg * kDeg)) / kDeg;
}

Trace::Trace(std::vector<ContextSample> samples, double sample_interval, std::string label,
             GeoAnchor anchor)
    : samples_(std::move(samples)),
      sample_interval_(sample_interval),
      label_(std::move(label)),
      anchor_(anchor) {
  if (samples_.empty()) throw Error("empty trace");
  if (!(sample_interval_ > 0.0)) throw Error("sample interval must be positive");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    const std::string where = " (sample " + std::to_string(i) + ")";
    if (!std::isfinite(s.timestamp) || s.timestamp < 0.0) throw Error("negative timestamp" + where);
    if (i > 0 && !(s.timestamp > samples_[i - 1].timestamp)) {
      throw Error("non-monotonic timestamps" + where);
    }
    if (s.cqi < 0 || s.cqi > 15) throw Error("cqi out of range" + where);
    if (!(s.velocity >= 0.0)) throw Error("negative velocity" + where);
    if (s.measured_data_rate && !(*s.measured_data_rate >= 0.0)) {
      throw Error("negative data rate" + where);
    }
    if (s.payload_bytes && !(*s.payload_bytes > 0.0)) throw Error("non-positive payload" + where);
  }
}

Trace parse_trace(const std::string& text, const TraceSchema& schema, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(origin + ": empty trace");
  std::vector<std::string> header = split(line, schema.delimiter);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;

  auto required = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw Error(origin + ": missing column '" + name + "'");
    return it->second;
  };
  auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = col.find(name);
    if (it == col.end()) return std::nullopt;
    return it->second;
  };
  const auto c_time = required(schema.timestamp);
  const auto c_lat = required(schema.lat);
  const auto c_lon = required(schema.lon);
  const auto c_vel = required(schema.velocity);
  const auto c_rsrp = required(schema.rsrp);
  const auto c_rsrq = required(schema.rsrq);
  const auto c_sinr = required(schema.sinr);
  const auto c_cqi = required(schema.cqi);
  const auto c_ta = required(schema.ta);
  const auto c_cell = required(schema.cell_id);
  const auto c_rate = optional_col(schema.data_rate);
  const auto c_payload = optional_col(schema.payload);

  std::vector<ContextSample> samples;
  GeoAnchor anchor;
  bool anchored = false;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line, schema.delimiter);
    const std::string where = origin + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) throw Error(where + ": expected " + std::to_string(header.size()) + " fields");
    auto number = [&](std::size_t c, const std::string& name) {
      return parse_double(fields[c], where + " column '" + name + "'");
    };
    auto integer = [&](std::size_t c, const std::string& name) -> long long {
      const double v = number(c, name);
      if (v != std::floor(v)) throw Error(where + ": column '" + name + "' must be an integer");
      return static_cast<long long>(v);
    };
    auto maybe = [&](std::optional<std::size_t> c, const std::string& name) -> std::optional<double> {
      if (!c) return std::nullopt;
      const std::string t = trim(fields[*c]);
      if (t.empty() || t == "NA" || t == "nan") return std::nullopt;
      return number(*c, name);
    };

    ContextSample s;
    s.timestamp = number(c_time, schema.timestamp);
    const double lat = number(c_lat, schema.lat);
    const double lon = number(c_lon, schema.lon);
    if (!anchored) {
      anchor = {lat, lon};
      anchored = true;
    }
    s.position = project(anchor, lat, lon);
    s.velocity = number(c_vel, schema.velocity);
    s.rsrp = number(c_rsrp, schema.rsrp);
    s.rsrq = number(c_rsrq, schema.rsrq);
    s.sinr = number(c_sinr, schema.sinr);
    const long long cqi = integer(c_cqi, schema.cqi);
    if (cqi < 0 || cqi > 15) throw Error(where + ": cqi out of range (" + std::to_string(cqi) + ")");
    s.cqi = static_cast<int>(cqi);
    s.ta = static_cast<int>(integer(c_ta, schema.ta));
    s.cell_id = integer(c_cell, schema.cell_id);
    s.measured_data_rate = maybe(c_rate, schema.data_rate);
    s.payload_bytes = maybe(c_payload, schema.payload);
    if (!samples.empty() && !(s.timestamp > samples.back().timestamp)) {
      throw Error(where + ": non-monotonic timestamps");
    }
    samples.push_back(s);
  }
  if (samples.empty()) throw Error(origin + ": empty trace");
  try {
    return Trace(std::move(samples), schema.sample_interval, schema.label, anchor);
  } catch (const Error& e) {
    throw Error(origin + ": " + e.what());
  }
}

Trace load_trace(const std::filesystem::path& path, const TraceSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("missing trace file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  TraceSchema s = schema;
  if (s.label.empty()) s.label = path.stem().string();
  return parse_trace(ss.str(), s, path.string());
}

std::string format_trace(const Trace& trace, const TraceSchema& schema) {
  std::ostringstream out;
  const char d = schema.delimiter;
  out << schema.timestamp << d << schema.lat << d << schema.lon << d << schema.velocity << d
      << schema.rsrp << d << schema.rsrq << d << schema.sinr << d << schema.cqi << d << schema.ta << d
      << schema.cell_id << d << schema.data_rate << d << schema.payload << "\n";
  for (const auto& s : trace.samples()) {
    double lat = 0.0;
    double lon = 0.0;
    unproject(trace.anchor(), s.position, lat, lon);
    out << num(s.timestamp) << d << num(lat) << d << num(lon) << d << num(s.velocity) << d
        << num(s.rsrp) << d << num(s.rsrq) << d << num(s.sinr) << d << s.cqi << d << s.ta << d
        << s.cell_id << d << (s.measured_data_rate ? num(*s.measured_data_rate) : "") << d
        << (s.payload_bytes ? num(*s.payload_bytes) : "") << "\n";
  }
  return out.str();
}

void write_trace(const Trace& trace, const std::filesystem::path& path, const TraceSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file " + path.string());
  out << format_trace(trace, schema);
}

// --- synthetic generation ---------------------------------------------------

namespace {

std::vector<Vec2> parse_positions(const std::string& text, const std::string& key) {
  std::vector<Vec2> out;
  for (const auto& item : split(text, ',')) {
    if (trim(item).empty()) continue;
    const auto xy = split(item, ':');
    if (xy.size() != 2) throw Error("synthetic." + key + ": expected x:y pairs");
    out.push_back({parse_double(xy[0], key), parse_double(xy[1], key)});
  }
  return out;
}

/// Unit-variance stationary Gaussian field from random Fourier features.
class SpatialField {
 public:
  SpatialField(Rng& rng, double corr_length, int features = 32) {
    std::normal_distribution<double> w(0.0, 1.0 / corr_length);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < features; ++i) {
      freq_.push_back({w(rng), w(rng)});
      phase_.push_back(phase(rng));
    }
  }
  double operator()(Vec2 p) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < freq_.size(); ++i) acc += std::cos(dot(freq_[i], p) + phase_[i]);
    return acc * std::sqrt(2.0 / static_cast<double>(freq_.size()));
  }

 private:
  std::vector<Vec2> freq_;
  std::vector<double> phase_;
};

Vec2 route_at(const std::vector<Vec2>& route, double s) {
  const double idx = std::clamp(s / kRouteStep, 0.0, static_cast<double>(route.size() - 1));
  const auto i = std::min(static_cast<std::size_t>(idx), route.size() - 2);
  const double f = idx - static_cast<double>(i);
  return route[i] + f * (route[i + 1] - route[i]);
}

Vec2 route_normal(const std::vector<Vec2>& route, double s) {
  const auto i = std::min(static_cast<std::size_t>(std::max(0.0, s / kRouteStep)), route.size() - 2);
  const Vec2 t = route[i + 1] - route[i];
  const double n = norm(t);
  return {-t.y / n, t.x / n};
}

std::vector<PlantedRegion> place_regions(const std::vector<Vec2>& route, int count, double radius,
                                         Rng& rng, double jitter_radius) {
  std::vector<PlantedRegion> out;
  const double length = kRouteStep * static_cast<double>(route.size() - 1);
  std::uniform_real_distribution<double> within(0.15, 0.85);
  std::uniform_real_distribution<double> lateral(-60.0, 60.0);
  std::uniform_real_distribution<double> scale(1.0 - jitter_radius, 1.0 + jitter_radius);
  for (int i = 0; i < count; ++i) {
    const double s = length * (static_cast<double>(i) + within(rng)) / static_cast<double>(count);
    const Vec2 c = route_at(route, s) + lateral(rng) * route_normal(route, s);
    out.push_back({c, radius * scale(rng)});
  }
  return out;
}

}  // namespace

SyntheticConfig SyntheticConfig::from(const KeyValueFile& kv) {
  SyntheticConfig c;
  c.duration_s = kv.get_double("duration_s", c.duration_s);
  c.sample_interval_s = kv.get_double("sample_interval_s", c.sample_interval_s);
  c.layout_seed = static_cast<std::uint64_t>(kv.get_int("layout_seed", static_cast<long long>(c.layout_seed)));
  c.label = kv.get_string("label", c.label);
  c.route_length_m = kv.get_double("route_length_m", c.route_length_m);
  c.route_turn_sigma = kv.get_double("route_turn_sigma", c.route_turn_sigma);
  c.speed_kmh = kv.get_double("speed_kmh", c.speed_kmh);
  c.speed_zone_variation = kv.get_double("speed_zone_variation", c.speed_zone_variation);
  c.speed_jitter_kmh = kv.get_double("speed_jitter_kmh", c.speed_jitter_kmh);
  c.hotspots = static_cast<int>(kv.get_int("hotspots", c.hotspots));
  if (kv.has("hotspot_positions")) {
    c.hotspot_positions = parse_positions(kv.get_string("hotspot_positions", ""), "hotspot_positions");
  }
  c.hotspot_radius_m = kv.get_double("hotspot_radius_m", c.hotspot_radius_m);
  c.hotspot_gain_db = kv.get_double("hotspot_gain_db", c.hotspot_gain_db);
  c.valley_sinr_db = kv.get_double("valley_sinr_db", c.valley_sinr_db);
  c.spatial_sigma_db = kv.get_double("spatial_sigma_db", c.spatial_sigma_db);
  c.spatial_corr_m = kv.get_double("spatial_corr_m", c.spatial_corr_m);
  c.white_noise_db = kv.get_double("white_noise_db", c.white_noise_db);
  c.disturbance_zones = static_cast<int>(kv.get_int("disturbance_zones", c.disturbance_zones));
  if (kv.has("disturbance_positions")) {
    c.disturbance_positions =
        parse_positions(kv.get_string("disturbance_positions", ""), "disturbance_positions");
  }
  c.disturbance_radius_m = kv.get_double("disturbance_radius_m", c.disturbance_radius_m);
  c.disturbance_min_factor = kv.get_double("disturbance_min_factor", c.disturbance_min_factor);
  c.cell_spacing_m = kv.get_double("cell_spacing_m", c.cell_spacing_m);
  c.rate_scale_mbits = kv.get_double("rate_scale_mbits", c.rate_scale_mbits);
  c.load_penalty = kv.get_double("load_penalty", c.load_penalty);
  c.payload_half_bytes = kv.get_double("payload_half_bytes", c.payload_half_bytes);
  c.payload_min_bytes = kv.get_double("payload_min_bytes", c.payload_min_bytes);
  c.payload_max_bytes = kv.get_double("payload_max_bytes", c.payload_max_bytes);
  c.rate_noise_sigma = kv.get_double("rate_noise_sigma", c.rate_noise_sigma);
  c.rate_offset_mbits = kv.get_double("rate_offset_mbits", c.rate_offset_mbits);
  c.validate();
  return c;
}

void SyntheticConfig::validate() const {
  if (!(duration_s > 0.0)) throw Error("synthetic duration must be positive");
  if (!(sample_interval_s > 0.0)) throw Error("synthetic sample interval must be positive");
  if (!(route_length_m >= 2.0 * kRouteStep)) throw Error("synthetic route too short");
  if (!(speed_kmh > 0.0)) throw Error("synthetic speed must be positive");
  if (hotspots < 0 || disturbance_zones < 0) throw Error("negative region count");
  if (!(hotspot_radius_m > 0.0) || !(disturbance_radius_m > 0.0)) throw Error("region radius must be positive");
  if (!(spatial_corr_m > 0.0)) throw Error("spatial correlation length must be positive");
  if (!(payload_min_bytes > 0.0) || payload_max_bytes < payload_min_bytes) throw Error("bad payload range");
  if (!(payload_half_bytes >= 0.0)) throw Error("payload half-saturation must be non-negative");
  if (!(cell_spacing_m > 0.0)) throw Error("cell spacing must be positive");
}

SyntheticWorld build_synthetic_world(const SyntheticConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.layout_seed, "synthetic.layout"));
  SyntheticWorld w;

  const auto steps = static_cast<std::size_t>(std::ceil(config.route_length_m / kRouteStep));
  std::normal_distribution<double> turn(0.0, config.route_turn_sigma);
  double heading = 0.0;
  Vec2 p{0.0, 0.0};
  w.route.push_back(p);
  for (std::size_t i = 0; i < steps; ++i) {
    if (config.route_turn_sigma > 0.0) heading += turn(rng);
    p = p + kRouteStep * Vec2{std::cos(heading), std::sin(heading)};
    w.route.push_back(p);
  }

  std::uniform_real_distribution<double> zone(-config.speed_zone_variation, config.speed_zone_variation);
  const auto zones = static_cast<std::size_t>(std::ceil(config.route_length_m / kZoneLength));
  for (std::size_t i = 0; i < zones; ++i) w.zone_speed_kmh.push_back(config.speed_kmh * (1.0 + zone(rng)));

  if (!config.hotspot_positions.empty()) {
    for (auto c : config.hotspot_positions) w.hotspots.push_back({c, config.hotspot_radius_m});
  } else {
    w.hotspots = place_regions(w.route, config.hotspots, config.hotspot_radius_m, rng, 0.3);
  }
  std::uniform_real_distribution<double> gain(0.8, 1.2);
  for (std::size_t i = 0; i < w.hotspots.size(); ++i) {
    w.hotspot_gain_db.push_back(config.hotspot_positions.empty() ? config.hotspot_gain_db * gain(rng)
                                                                 : config.hotspot_gain_db);
  }
  if (!config.disturbance_positions.empty()) {
    for (auto c : config.disturbance_positions) w.disturbances.push_back({c, config.disturbance_radius_m});
  } else {
    w.disturbances = place_regions(w.route, config.disturbance_zones, config.disturbance_radius_m, rng, 0.2);
  }

  const double length = kRouteStep * static_cast<double>(w.route.size() - 1);
  std::uniform_real_distribution<double> offset(100.0, 400.0);
  std::bernoulli_distribution side(0.5);
  for (double s = 0.5 * config.cell_spacing_m; s < length + config.cell_spacing_m; s += config.cell_spacing_m) {
    const double sc = std::min(s, length);
    const double off = offset(rng) * (side(rng) ? 1.0 : -1.0);
    w.cell_sites.push_back(route_at(w.route, sc) + off * route_normal(w.route, sc));
  }
  return w;
}

double synthetic_capacity(const SyntheticConfig& config, double sinr_db, double rsrq_db) {
  const double efficiency = std::log2(1.0 + std::pow(10.0, sinr_db / 10.0));
  const double load_factor = std::clamp(1.0 + config.load_penalty * (rsrq_db + 10.0) / 10.0, 0.1, 1.5);
  return config.rate_scale_mbits * efficiency * load_factor;
}

double synthetic_payload_factor(const SyntheticConfig& config, double payload_bytes) {
  return payload_bytes / (payload_bytes + config.payload_half_bytes);
}

Trace generate_synthetic_trace(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  const SyntheticWorld world = build_synthetic_world(config);

  Rng layout(derive_seed(config.layout_seed, "synthetic.fields"));
  const SpatialField sinr_field(layout, config.spatial_corr_m);
  const SpatialField load_field(layout, 1.5 * config.spatial_corr_m);

  Rng rng(derive_seed(seed, "synthetic.drive"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double length = kRouteStep * static_cast<double>(world.route.size() - 1);
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(config.duration_s / config.sample_interval_s)));
  std::vector<ContextSample> samples;
  samples.reserve(n);

  double s = 0.0;
  double direction = 1.0;
  const double log_pmin = std::log(config.payload_min_bytes);
  const double log_pmax = std::log(config.payload_max_bytes);
  for (std::size_t k = 0; k < n; ++k) {
    ContextSample cs;
    cs.timestamp = static_cast<double>(k) * config.sample_interval_s;
    cs.position = route_at(world.route, s);

    const auto zone = std::min(static_cast<std::size_t>(s / kZoneLength), world.zone_speed_kmh.size() - 1);
    cs.velocity = std::max(0.0, world.zone_speed_kmh[zone] + config.speed_jitter_kmh * gauss(rng));

    double sinr = config.valley_sinr_db + config.spatial_sigma_db * sinr_field(cs.position);
    for (std::size_t h = 0; h < world.hotspots.size(); ++h) {
      const double d = distance(cs.position, world.hotspots[h].center);
      const double r = world.hotspots[h].radius;
      sinr += world.hotspot_gain_db[h] * std::exp(-d * d / (2.0 * r * r));
    }
    sinr += config.white_noise_db * gauss(rng);
    cs.sinr = sinr;

    std::size_t site = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < world.cell_sites.size(); ++c) {
      const double d = distance(cs.position, world.cell_sites[c]);
      if (d < best) {
        best = d;
        site = c;
      }
    }
    cs.cell_id = 1000 + static_cast<std::int64_t>(site);
    cs.ta = static_cast<int>(std::lround(best / kTaUnit));
    cs.rsrp = std::clamp(-75.0 - 25.0 * std::log10(std::max(best, 50.0) / 50.0) +
                             0.6 * (sinr - config.valley_sinr_db) + 1.5 * gauss(rng),
                         -140.0, -44.0);
    const double load = std::clamp(0.5 + 0.25 * load_field(cs.position), 0.0, 1.0);
    cs.rsrq = std::clamp(-10.5 + 0.15 * sinr - 6.0 * load + 0.5 * gauss(rng), -19.5, -3.0);
    cs.cqi = static_cast<int>(std::clamp<long>(std::lround((sinr + 8.0) / 1.9), 1, 15));

    const double payload = std::exp(log_pmin + (log_pmax - log_pmin) * unit(rng));
    double disturbance = 1.0;
    for (const auto& z : world.disturbances) {
      if (distance(cs.position, z.center) <= z.radius) {
        disturbance = config.disturbance_min_factor + (1.0 - config.disturbance_min_factor) * unit(rng);
        break;
      }
    }
    const double noise = std::exp(config.rate_noise_sigma * gauss(rng));
    const double rate = synthetic_capacity(config, cs.sinr, cs.rsrq) * synthetic_payload_factor(config, payload) *
                            disturbance * noise +
                        config.rate_offset_mbits;
    cs.measured_data_rate = std::max(0.0, rate);
    cs.payload_bytes = payload;
    samples.push_back(cs);

    s += direction * cs.velocity / 3.6 * config.sample_interval_s;
    if (s > length) {
      s = 2.0 * length - s;
      direction = -1.0;
    } else if (s < 0.0) {
      s = -s;
      direction = 1.0;
    }
  }
  return Trace(std::move(samples), config.sample_interval_s, config.label);
}

std::vector<SensorPacket> sensor_stream(double rate_bytes_per_s, double duration) {
  if (!(rate_bytes_per_s > 0.0)) throw Error("sensor rate must be positive");
  if (!(duration >= 0.0)) throw Error("sensor stream duration must be non-negative");
  const auto n = static_cast<std::size_t>(std::floor(duration));
  std::vector<SensorPacket> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back({static_cast<double>(k), rate_bytes_per_s});
  return out;
}

}  // namespace odt
