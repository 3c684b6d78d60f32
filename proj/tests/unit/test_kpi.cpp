#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "odt/kpi.hpp"
#include "odt/schemes.hpp"

using namespace odt;

namespace {

TransmissionRecord record(double rate, double duration, int cqi, double rsrp = -95.0) {
  TransmissionRecord r;
  r.send_time = 100.0;
  r.duration = duration;
  r.achieved_rate = rate;
  r.payload = rate * 1e6 * duration / 8.0;
  r.oldest_generated_at = 90.0;
  r.cqi = cqi;
  r.rsrp = rsrp;
  return r;
}

// Smallest n with tbs >= bits, straight from the table.
double oracle_prbs(const TransmissionRecord& r, const PrbTables& t) {
  const int itbs = t.itbs_for_mcs(t.mcs_for_cqi(r.cqi));
  const double bits = r.achieved_rate * 1e3;
  int n = 1;
  while (n < t.max_prb() && t.tbs_bits(itbs, n) < bits) ++n;
  return n * r.duration * 1000.0;
}

}  // namespace

TEST_CASE("age of information") {
  TransmissionRecord r;
  r.oldest_generated_at = 0;
  r.send_time = 10;
  CHECK(aoi(r) == 10.0);
  r.oldest_generated_at = 10;
  CHECK(aoi(r) == 0.0);
  r.oldest_generated_at = 0;  // buffer {0, 5, 9}
  r.send_time = 12;
  CHECK(aoi(r) == 12.0);
  r.oldest_generated_at = 13;
  CHECK_THROWS_AS(aoi(r), Error);
}

TEST_CASE("embedded tables") {
  const auto& t = PrbTables::embedded();
  CHECK(t.max_prb() == 110);
  CHECK(t.mcs_for_cqi(0) == -1);
  CHECK(t.checksum() == PrbTables::parse(embedded_table_text()).checksum());
  for (int i = 0; i < t.tbs_indices(); ++i) {
    CHECK(t.tbs_bits(i, 1) > 0);
    for (int n = 2; n <= t.max_prb(); ++n) CHECK(t.tbs_bits(i, n) > t.tbs_bits(i, n - 1));
  }
  // Spot values of the standard table.
  CHECK(t.tbs_bits(0, 1) == 16);
  CHECK(t.tbs_bits(26, 110) == 75376);
  CHECK_THROWS_AS(PrbTables::parse("nonsense"), Error);
}

TEST_CASE("PRB estimate") {
  const auto& t = PrbTables::embedded();
  const auto tiny = estimate_prbs(record(0.005, 2.0, 9), t);
  CHECK(tiny.valid);
  CHECK(tiny.prbs_per_tti == 1);
  CHECK(tiny.total == doctest::Approx(2000.0));

  const auto one = estimate_prbs(record(6.0, 1.5, 9), t);
  const auto two = estimate_prbs(record(6.0, 3.0, 9), t);
  CHECK(two.total == doctest::Approx(2.0 * one.total));

  CHECK_FALSE(estimate_prbs(record(6.0, 1.0, 0), t).valid);
  CHECK(estimate_prbs(record(500.0, 1.0, 15), t).saturated);

  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const double rate = 0.1 + 40.0 * uniform01(rng);
    const double dur = 0.05 + 5.0 * uniform01(rng);
    double last = std::numeric_limits<double>::infinity();
    for (int cqi = 1; cqi <= 15; ++cqi) {
      const auto r = record(rate, dur, cqi);
      const auto e = estimate_prbs(r, t);
      CHECK(e.total == doctest::Approx(oracle_prbs(r, t)).epsilon(1e-12));
      CHECK(e.total <= last);
      last = e.total;
    }
  }
}

TEST_CASE("PRBs per megabyte") {
  const auto& t = PrbTables::embedded();
  const auto a = record(8.0, 1.0, 7);  // 1 MB
  const double prbs = estimate_prbs(a, t).total;
  const std::vector<TransmissionRecord> one{a};
  CHECK(*prbs_per_megabyte(one, t) == doctest::Approx(prbs / 1.0));
  const std::vector<TransmissionRecord> twice{a, a};
  CHECK(*prbs_per_megabyte(twice, t) == doctest::Approx(*prbs_per_megabyte(one, t)).epsilon(1e-12));

  const std::vector<TransmissionRecord> mixed{record(3.0, 2.0, 4), record(12.0, 0.5, 11), record(20.0, 1.0, 15),
                                              record(5.0, 1.0, 0)};
  double sum_prb = 0, sum_mb = 0;
  for (const auto& r : mixed) {
    if (r.cqi == 0) continue;
    sum_prb += oracle_prbs(r, t);
    sum_mb += r.payload / 1e6;
  }
  CHECK(*prbs_per_megabyte(mixed, t) == doctest::Approx(sum_prb / sum_mb).epsilon(1e-12));
  const std::vector<TransmissionRecord> flagged{record(5.0, 1.0, 0)};
  CHECK_FALSE(prbs_per_megabyte(flagged, t).has_value());
}

TEST_CASE("power and energy") {
  const PowerModelParams p;
  auto r = record(5.0, 2.0, 9, -90.0);
  const double e90 = transmission_energy(r, p);
  r.rsrp = -110.0;
  CHECK(transmission_energy(r, p) >= e90);
  r.duration = 1e-12;
  CHECK(transmission_energy(r, p) == doctest::Approx(0.0));
  double last = 0;
  for (double d = 0.1; d < 5; d += 0.1) {
    r.duration = d;
    const double e = transmission_energy(r, p);
    CHECK(e > last);
    last = e;
  }
  for (const auto& [dbm, w] : p.device_curve) {
    const double rsrp = p.rsrp_offset - dbm;
    const double left = device_power_w(tx_power_dbm(rsrp - 1e-9, p), p);
    const double right = device_power_w(tx_power_dbm(rsrp + 1e-9, p), p);
    CHECK(left == doctest::Approx(right).epsilon(1e-6));
    CHECK(device_power_w(dbm, p) == doctest::Approx(w));
  }
  double prev_tx = 1e9, prev_w = 0;
  for (double rsrp = -140; rsrp <= -40; rsrp += 0.5) {
    const double tx = tx_power_dbm(rsrp, p);
    CHECK(tx <= prev_tx);
    prev_tx = tx;
  }
  for (double tx = -20; tx <= 30; tx += 0.5) {
    const double w = device_power_w(tx, p);
    CHECK(w >= prev_w);
    CHECK(w > 0.0);
    prev_w = w;
  }
}

TEST_CASE("run summary") {
  const auto& t = PrbTables::embedded();
  SchemeConfig c;
  c.s_star = 15.0;
  const PowerModelParams p;
  const auto single = record(6.0, 2.0, 9);
  const std::vector<TransmissionRecord> one{single};
  const auto k1 = summarize_run(one, c, t, p);
  CHECK(k1.mean_rate == doctest::Approx(6.0));
  CHECK(k1.rate.p25 == doctest::Approx(6.0));
  CHECK(k1.rate.p75 == doctest::Approx(6.0));
  CHECK(k1.mean_aoi == doctest::Approx(10.0));
  CHECK(k1.mean_energy == doctest::Approx(transmission_energy(single, p)));

  std::vector<TransmissionRecord> three{record(2.0, 1.0, 5), record(8.0, 1.0, 9), record(5.0, 1.0, 12)};
  three[0].oldest_generated_at = 80;  // aoi 20
  three[2].oldest_generated_at = 70;  // aoi 30
  const auto k3 = summarize_run(three, c, t, p);
  // rates sorted {2, 5, 8}: type-7 quartiles 3.5, 5, 6.5
  CHECK(k3.rate.p25 == doctest::Approx(3.5));
  CHECK(k3.rate.p50 == doctest::Approx(5.0));
  CHECK(k3.rate.p75 == doctest::Approx(6.5));
  CHECK(k3.mean_rate == doctest::Approx(5.0));
  CHECK(k3.mean_aoi == doctest::Approx(20.0));
  CHECK(k3.aoi.p50 == doctest::Approx(20.0));
  CHECK(k3.e_s == doctest::Approx(5.0 / 15.0));
  CHECK(k3.e_aoi == doctest::Approx(1.0 - 20.0 / 120.0));

  std::reverse(three.begin(), three.end());
  CHECK(format_kpis(summarize_run(three, c, t, p)) == format_kpis(k3));
}
