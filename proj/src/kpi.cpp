#include "odt/kpi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "odt/common.hpp"
#include "odt/kvfile.hpp"
#include "odt/schemes.hpp"

namespace odt {

namespace detail {
extern const std::string_view kEmbeddedLteTables;
}

std::string_view embedded_table_text() { return detail::kEmbeddedLteTables; }

double aoi(const TransmissionRecord& r) {
  if (r.oldest_generated_at > r.send_time) throw Error("aoi: oldest packet generated after send time");
  return r.send_time - r.oldest_generated_at;
}

// --- tables -----------------------------------------------------------------

PrbTables PrbTables::parse(std::string_view text, const std::string& origin) {
  PrbTables t;
  t.checksum_ = fnv1a64(text);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) { throw Error(origin + ":" + std::to_string(lineno) + ": " + what); };
  auto ints = [&](std::istringstream& s) {
    std::vector<int> out;
    std::string tok;
    while (s >> tok) {
      int v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) fail("bad integer '" + tok + "'");
      out.push_back(v);
    }
    return out;
  };
  bool have_cqi = false;
  int rows = 0;
  int cols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::istringstream ls(s);
    std::string key;
    ls >> key;
    if (key == "cqi_to_mcs") {
      const auto v = ints(ls);
      if (v.size() != 16) fail("cqi_to_mcs needs 16 entries");
      std::copy(v.begin(), v.end(), t.cqi_to_mcs_.begin());
      have_cqi = true;
    } else if (key == "mcs_to_itbs") {
      t.mcs_to_itbs_ = ints(ls);
    } else if (key == "tbs") {
      const auto v = ints(ls);
      if (v.size() != 2 || v[0] < 1 || v[1] < 1) fail("tbs header needs row and column counts");
      rows = v[0];
      cols = v[1];
    } else if (std::isdigit(static_cast<unsigned char>(key[0]))) {
      std::istringstream row(s);
      auto v = ints(row);
      if (static_cast<int>(v.size()) != cols) fail("tbs row must have " + std::to_string(cols) + " entries");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] <= 0) fail("tbs entries must be positive");
        if (i > 0 && v[i] <= v[i - 1]) fail("tbs row must be strictly increasing in n_prb");
      }
      t.tbs_.push_back(std::move(v));
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!have_cqi || t.mcs_to_itbs_.empty() || rows == 0) throw Error(origin + ": incomplete LTE tables");
  if (static_cast<int>(t.tbs_.size()) != rows) throw Error(origin + ": expected " + std::to_string(rows) + " tbs rows");
  t.max_prb_ = cols;
  for (int cqi = 1; cqi < 16; ++cqi) {
    const int mcs = t.cqi_to_mcs_[static_cast<std::size_t>(cqi)];
    if (mcs < 0 || mcs >= static_cast<int>(t.mcs_to_itbs_.size())) throw Error(origin + ": cqi maps to unknown mcs");
    const int itbs = t.mcs_to_itbs_[static_cast<std::size_t>(mcs)];
    if (itbs < 0 || itbs >= rows) throw Error(origin + ": mcs maps to unknown tbs index");
  }
  return t;
}

PrbTables PrbTables::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing table file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const PrbTables& PrbTables::embedded() {
  static const PrbTables tables = parse(detail::kEmbeddedLteTables, "embedded lte_tables.txt");
  return tables;
}

int PrbTables::mcs_for_cqi(int cqi) const {
  if (cqi < 0 || cqi > 15) throw Error("cqi out of range");
  return cqi == 0 ? -1 : cqi_to_mcs_[static_cast<std::size_t>(cqi)];
}

int PrbTables::itbs_for_mcs(int mcs) const {
  if (mcs < 0 || mcs >= static_cast<int>(mcs_to_itbs_.size())) throw Error("mcs out of range");
  return mcs_to_itbs_[static_cast<std::size_t>(mcs)];
}

int PrbTables::tbs_bits(int itbs, int n_prb) const {
  if (itbs < 0 || itbs >= tbs_indices() || n_prb < 1 || n_prb > max_prb_) throw Error("tbs lookup out of range");
  return tbs_[static_cast<std::size_t>(itbs)][static_cast<std::size_t>(n_prb - 1)];
}

PrbEstimate estimate_prbs(const TransmissionRecord& r, const PrbTables& tables) {
  PrbEstimate e;
  if (r.cqi < 0 || r.cqi > 15) throw Error("estimate_prbs: cqi out of range");
  if (!(r.duration > 0.0)) throw Error("estimate_prbs: duration must be positive");
  if (r.cqi == 0) return e;
  const int itbs = tables.itbs_for_mcs(tables.mcs_for_cqi(r.cqi));
  const double bits_per_tti = r.achieved_rate * 1e6 / 1000.0;
  int n = 1;
  while (n < tables.max_prb() && tables.tbs_bits(itbs, n) < bits_per_tti) ++n;
  e.valid = true;
  e.saturated = tables.tbs_bits(itbs, n) < bits_per_tti;
  e.prbs_per_tti = n;
  e.total = static_cast<double>(n) * r.duration * 1000.0;
  return e;
}

std::optional<double> prbs_per_megabyte(std::span<const TransmissionRecord> records, const PrbTables& tables) {
  double prbs = 0.0;
  double bytes = 0.0;
  bool any = false;
  for (const auto& r : records) {
    const auto e = estimate_prbs(r, tables);
    if (!e.valid) continue;
    any = true;
    prbs += e.total;
    bytes += r.payload;
  }
  if (!any || !(bytes > 0.0)) return std::nullopt;
  return prbs / (bytes / 1e6);
}

// --- power ------------------------------------------------------------------

void PowerModelParams::validate() const {
  if (!(tx_min < tx_max)) throw Error("power model: tx_min must be below tx_max");
  if (device_curve.empty()) throw Error("power model: empty device curve");
  for (std::size_t i = 0; i < device_curve.size(); ++i) {
    if (!(device_curve[i].second > 0.0)) throw Error("power model: device power must be positive");
    if (i > 0 && !(device_curve[i].first > device_curve[i - 1].first)) {
      throw Error("power model: device curve breakpoints must be increasing");
    }
    if (i > 0 && device_curve[i].second < device_curve[i - 1].second) {
      throw Error("power model: device curve must be non-decreasing");
    }
  }
}

PowerModelParams PowerModelParams::from(const KeyValueFile& kv) {
  PowerModelParams p;
  p.rsrp_offset = kv.get_double("rsrp_offset", p.rsrp_offset);
  p.tx_min = kv.get_double("tx_min", p.tx_min);
  p.tx_max = kv.get_double("tx_max", p.tx_max);
  if (kv.has("device_dbm") || kv.has("device_watts")) {
    const auto dbm = kv.get_doubles("device_dbm", {});
    const auto watts = kv.get_doubles("device_watts", {});
    if (dbm.size() != watts.size()) throw Error("power model: device_dbm and device_watts differ in length");
    p.device_curve.clear();
    for (std::size_t i = 0; i < dbm.size(); ++i) p.device_curve.push_back({dbm[i], watts[i]});
  }
  p.validate();
  return p;
}

PowerModelParams PowerModelParams::load(const std::filesystem::path& path) {
  const auto kv = KeyValueFile::load(path);
  auto p = from(kv);
  if (const auto extra = kv.unused_keys(); !extra.empty()) {
    throw Error(path.string() + ": unknown key '" + extra.front() + "'");
  }
  return p;
}

double tx_power_dbm(double rsrp, const PowerModelParams& p) {
  return std::clamp(p.rsrp_offset - rsrp, p.tx_min, p.tx_max);
}

double device_power_w(double tx, const PowerModelParams& p) {
  const auto& c = p.device_curve;
  if (tx <= c.front().first) return c.front().second;
  if (tx >= c.back().first) return c.back().second;
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (tx <= c[i].first) {
      const double f = (tx - c[i - 1].first) / (c[i].first - c[i - 1].first);
      return c[i - 1].second + f * (c[i].second - c[i - 1].second);
    }
  }
  return c.back().second;
}

double transmission_energy(const TransmissionRecord& r, const PowerModelParams& p) {
  return device_power_w(tx_power_dbm(r.rsrp, p), p) * r.duration;
}

// --- run summary ------------------------------------------------------------

namespace {

Quartiles quartiles(const std::vector<double>& v) {
  return {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
}

double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

RunKpis summarize_run(std::span<const TransmissionRecord> records, const SchemeConfig& config,
                      const PrbTables& tables, const PowerModelParams& power) {
  if (records.empty()) throw Error("summarize_run: empty run log");
  RunKpis k;
  std::vector<double> rates;
  std::vector<double> ages;
  std::vector<double> energies;
  for (const auto& r : records) {
    rates.push_back(r.achieved_rate);
    ages.push_back(aoi(r));
    energies.push_back(transmission_energy(r, power));
    k.total_bytes += r.payload;
    const auto e = estimate_prbs(r, tables);
    if (!e.valid) {
      ++k.flagged;
      continue;
    }
    if (e.saturated) ++k.saturated;
    k.total_prbs += e.total;
  }
  k.transmissions = records.size();
  k.mean_rate = mean(rates);
  k.rate = quartiles(rates);
  k.mean_aoi = mean(ages);
  k.aoi = quartiles(ages);
  k.prb_per_mb = prbs_per_megabyte(records, tables);
  for (double e : energies) k.total_energy += e;
  k.mean_energy = mean(energies);
  k.energy = quartiles(energies);
  const auto eff = efficiency_indicators(k.mean_rate, k.mean_aoi, config);
  k.e_s = eff.e_s;
  k.e_aoi = eff.e_aoi;
  return k;
}

std::string format_kpis(const RunKpis& k) {
  std::ostringstream out;
  auto q = [&](const std::string& name, const Quartiles& v) {
    out << name << "_p25 = " << num(v.p25) << "\n"
        << name << "_p50 = " << num(v.p50) << "\n"
        << name << "_p75 = " << num(v.p75) << "\n";
  };
  out << "transmissions = " << k.transmissions << "\n";
  out << "flagged_records = " << k.flagged << "\n";
  out << "saturated_records = " << k.saturated << "\n";
  out << "total_bytes = " << num(k.total_bytes) << "\n";
  out << "mean_rate_mbits = " << num(k.mean_rate) << "\n";
  q("rate_mbits", k.rate);
  out << "mean_aoi_s = " << num(k.mean_aoi) << "\n";
  q("aoi_s", k.aoi);
  out << "total_prbs = " << num(k.total_prbs) << "\n";
  out << "prb_per_mb = " << (k.prb_per_mb ? num(*k.prb_per_mb) : "undefined") << "\n";
  out << "total_energy_j = " << num(k.total_energy) << "\n";
  out << "mean_energy_j = " << num(k.mean_energy) << "\n";
  q("energy_j", k.energy);
  out << "e_s = " << num(k.e_s) << "\n";
  out << "e_aoi = " << num(k.e_aoi) << "\n";
  return out.str();
}

}  // namespace odt
