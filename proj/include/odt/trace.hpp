#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odt/common.hpp"

namespace odt {

class KeyValueFile;

/// One timestamped observation along a drive.
struct ContextSample {
  double timestamp = 0.0;  // s since trace start
  Vec2 position;           // local planar metres
  double velocity = 0.0;   // km/h
  double rsrp = 0.0;       // dBm
  double rsrq = 0.0;       // dB
  double sinr = 0.0;       // dB
  int cqi = 0;             // 0..15
  int ta = 0;
  std::int64_t cell_id = 0;
  std::optional<double> measured_data_rate;  // MBit/s; absent for pure replay traces
  std::optional<double> payload_bytes;       // payload of the measured transfer, when known
};

struct GeoAnchor {
  double lat_deg = 51.4920;
  double lon_deg = 7.4140;
};

/// Equirectangular projection around `anchor`.
Vec2 project(const GeoAnchor& anchor, double lat_deg, double lon_deg);
void unproject(const GeoAnchor& anchor, Vec2 p, double& lat_deg, double& lon_deg);

/// Immutable ordered sequence of context samples.
class Trace {
 public:
  Trace(std::vector<ContextSample> samples, double sample_interval, std::string label,
        GeoAnchor anchor = {});

  std::span<const ContextSample> samples() const { return samples_; }
  const ContextSample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  double sample_interval() const { return sample_interval_; }
  const std::string& label() const { return label_; }
  const GeoAnchor& anchor() const { return anchor_; }
  double duration() const { return samples_.back().timestamp - samples_.front().timestamp; }

 private:
  std::vector<ContextSample> samples_;
  double sample_interval_;
  std::string label_;
  GeoAnchor anchor_;
};

/// Column mapping for delimiter-separated trace files.
struct TraceSchema {
  char delimiter = ',';
  std::string timestamp = "timestamp_s";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string velocity = "velocity_kmh";
  std::string rsrp = "rsrp_dbm";
  std::string rsrq = "rsrq_db";
  std::string sinr = "sinr_db";
  std::string cqi = "cqi";
  std::string ta = "ta";
  std::string cell_id = "cell_id";
  std::string data_rate = "data_rate_mbits";  // optional column
  std::string payload = "payload_bytes";      // optional column
  double sample_interval = 1.0;
  std::string label;
};

/// Reads a trace; the first row anchors the planar projection. Any bad row
/// rejects the whole file.
Trace load_trace(const std::filesystem::path& path, const TraceSchema& schema = {});
void write_trace(const Trace& trace, const std::filesystem::path& path, const TraceSchema& schema = {});
std::string format_trace(const Trace& trace, const TraceSchema& schema = {});
Trace parse_trace(const std::string& text, const TraceSchema& schema = {},
                  const std::string& origin = "<string>");

/// Planted circular region of the synthetic world.
struct PlantedRegion {
  Vec2 center;
  double radius = 0.0;
};

/// Parameters of the synthetic drive generator.
///
/// The world layout (route, hotspots, disturbance zones, cell sites, spatial
/// fields) depends only on `layout_seed`; the per-call seed drives the
/// measurement noise, speed jitter and measurement payloads. Several drives
/// with different seeds therefore replay the same track.
struct SyntheticConfig {
  double duration_s = 1500.0;
  double sample_interval_s = 1.0;
  std::uint64_t layout_seed = 7;
  std::string label = "synthetic";

  double route_length_m = 25000.0;
  double route_turn_sigma = 0.03;  // heading random walk, rad per 10 m
  double speed_kmh = 60.0;
  double speed_zone_variation = 0.4;  // zone speed = speed_kmh * (1 +- variation)
  double speed_jitter_kmh = 3.0;

  int hotspots = 8;
  std::vector<Vec2> hotspot_positions;  // overrides random placement when non-empty
  double hotspot_radius_m = 350.0;
  double hotspot_gain_db = 14.0;
  double valley_sinr_db = 2.0;
  double spatial_sigma_db = 3.0;
  double spatial_corr_m = 600.0;
  double white_noise_db = 1.5;

  int disturbance_zones = 4;
  std::vector<Vec2> disturbance_positions;
  double disturbance_radius_m = 250.0;
  double disturbance_min_factor = 0.1;

  double cell_spacing_m = 1800.0;
  double rate_scale_mbits = 3.0;  // MBit/s per bit/s/Hz of Shannon efficiency
  double load_penalty = 0.5;
  double payload_half_bytes = 250e3;
  double payload_min_bytes = 10e3;
  double payload_max_bytes = 8e6;
  double rate_noise_sigma = 0.08;  // log-normal multiplicative noise
  double rate_offset_mbits = 0.0;

  static SyntheticConfig from(const KeyValueFile& kv);
  void validate() const;
};

/// Fixed geometry of a synthetic world.
struct SyntheticWorld {
  std::vector<Vec2> route;  // polyline, 10 m spacing
  std::vector<double> zone_speed_kmh;
  std::vector<PlantedRegion> hotspots;
  std::vector<double> hotspot_gain_db;
  std::vector<PlantedRegion> disturbances;
  std::vector<Vec2> cell_sites;
};

SyntheticWorld build_synthetic_world(const SyntheticConfig& config);

/// Channel-limited rate model of the synthetic world, MBit/s, before noise
/// and disturbance. Monotone increasing in sinr and in rsrq.
double synthetic_capacity(const SyntheticConfig& config, double sinr_db, double rsrq_db);

/// Transport efficiency of a payload: p / (p + payload_half_bytes).
double synthetic_payload_factor(const SyntheticConfig& config, double payload_bytes);

Trace generate_synthetic_trace(const SyntheticConfig& config, std::uint64_t seed);

struct SensorPacket {
  double generated_at = 0.0;  // s
  double size = 0.0;          // bytes
};

/// One packet per whole second of `duration`, each `rate_bytes_per_s` bytes.
std::vector<SensorPacket> sensor_stream(double rate_bytes_per_s, double duration);

}  // namespace odt
