#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace odt {

class KeyValueFile;
struct SchemeConfig;

struct TransmissionRecord {
  double send_time = 0.0;  // s
  double duration = 0.0;   // s
  double payload = 0.0;    // bytes
  double achieved_rate = 0.0;  // MBit/s, payload * 8 / duration / 1e6
  double oldest_generated_at = 0.0;
  int cqi = 0;
  double rsrp = 0.0;  // dBm
};

double aoi(const TransmissionRecord& r);

/// CQI -> MCS -> TBS index -> transport block size lookups.
class PrbTables {
 public:
  static PrbTables parse(std::string_view text, const std::string& origin = "<tables>");
  static PrbTables load(const std::filesystem::path& path);
  /// The tables compiled into the library from data/lte_tables.txt.
  static const PrbTables& embedded();

  int mcs_for_cqi(int cqi) const;  // -1 for cqi 0
  int itbs_for_mcs(int mcs) const;
  int tbs_bits(int itbs, int n_prb) const;
  int max_prb() const { return max_prb_; }
  int tbs_indices() const { return static_cast<int>(tbs_.size()); }
  std::uint64_t checksum() const { return checksum_; }

 private:
  std::array<int, 16> cqi_to_mcs_{};
  std::vector<int> mcs_to_itbs_;
  std::vector<std::vector<int>> tbs_;  // [itbs][n_prb - 1]
  int max_prb_ = 0;
  std::uint64_t checksum_ = 0;
};

std::string_view embedded_table_text();

struct PrbEstimate {
  bool valid = false;      // false when cqi = 0
  int prbs_per_tti = 0;
  double total = 0.0;      // prbs_per_tti * TTIs
  bool saturated = false;  // rate exceeds the largest block; capped at max_prb
};

PrbEstimate estimate_prbs(const TransmissionRecord& r, const PrbTables& tables);
/// Sum of PRBs over sum of MB for the valid records; nullopt when none are valid.
std::optional<double> prbs_per_megabyte(std::span<const TransmissionRecord> records, const PrbTables& tables);

/// tx_power = clamp(rsrp_offset - rsrp, tx_min, tx_max) dBm; device power is
/// piecewise linear through `device_curve` (dBm, W), clamped at both ends.
struct PowerModelParams {
  double rsrp_offset = -85.0;
  double tx_min = -10.0;
  double tx_max = 23.0;
  std::vector<std::pair<double, double>> device_curve{{-10.0, 0.8}, {10.0, 1.4}, {23.0, 3.2}};

  void validate() const;
  static PowerModelParams from(const KeyValueFile& kv);
  static PowerModelParams load(const std::filesystem::path& path);
};

double tx_power_dbm(double rsrp, const PowerModelParams& p);
double device_power_w(double tx_dbm, const PowerModelParams& p);
double transmission_energy(const TransmissionRecord& r, const PowerModelParams& p);

struct Quartiles {
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
};

struct RunKpis {
  std::size_t transmissions = 0;
  std::size_t flagged = 0;  // records without a PRB estimate
  std::size_t saturated = 0;
  double total_bytes = 0.0;
  double mean_rate = 0.0;
  Quartiles rate;
  double mean_aoi = 0.0;
  Quartiles aoi;
  double total_prbs = 0.0;
  std::optional<double> prb_per_mb;
  double total_energy = 0.0;
  double mean_energy = 0.0;
  Quartiles energy;
  double e_s = 0.0;
  double e_aoi = 0.0;
};

RunKpis summarize_run(std::span<const TransmissionRecord> records, const SchemeConfig& config,
                      const PrbTables& tables, const PowerModelParams& power);
std::string format_kpis(const RunKpis& k);

}  // namespace odt
