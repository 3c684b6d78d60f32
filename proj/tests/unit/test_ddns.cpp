#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "odt/ddns.hpp"

using namespace odt;

namespace {

Trace line_trace(int seconds, double rate = 20.0, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<ContextSample> s;
  for (int i = 0; i < seconds; ++i) {
    ContextSample c;
    c.timestamp = i;
    c.position = {15.0 * i, 0.0};
    c.velocity = 54.0;
    c.rsrp = -80.0 - 30.0 * uniform01(rng);
    c.rsrq = -10.0;
    c.sinr = -5.0 + 30.0 * uniform01(rng);
    c.cqi = 1 + static_cast<int>(14.0 * uniform01(rng));
    c.cell_id = 1 + i / 60;
    c.measured_data_rate = rate * (0.5 + uniform01(rng));
    c.payload_bytes = 5e5;
    s.push_back(c);
  }
  return Trace(s, 1.0, "line");
}

class ConstantPredictor : public RatePredictor {
 public:
  explicit ConstantPredictor(double v) : v_(v) {}
  double predict(const ContextSample&, double) const override { return v_; }

 private:
  double v_;
};

class IdleAgent : public SchemeAgent {
 public:
  using SchemeAgent::SchemeAgent;
  std::string name() const override { return "idle"; }
  std::unique_ptr<SchemeAgent> clone() const override { return std::make_unique<IdleAgent>(*this); }
  Action decide(const DecisionContext&, Rng&) override { return Action::Idle; }
};

SimModels constant_models(double rate) {
  SimModels m;
  m.predictor = std::make_shared<ConstantPredictor>(rate);
  m.truth = std::make_shared<GroundTruthModel>(GroundTruthModel::passthrough());
  return m;
}

std::shared_ptr<const GroundTruthModel> noisy_truth() {
  Rng rng(2);
  std::normal_distribution<double> g(0.0, 1.5);
  std::vector<ErrorSample> e;
  for (int i = 0; i < 300; ++i) {
    const double p = 30.0 * uniform01(rng);
    e.push_back({{10.0 * i, 0}, p, std::max(0.0, p + g(rng))});
  }
  return std::make_shared<const GroundTruthModel>(GroundTruthModel::fit(e, nullptr, GpGrid{}, 5));
}

double spearman(const std::vector<double>& a) {
  const std::size_t n = a.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return a[i] < a[j]; });
  std::vector<double> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[idx[r]] = static_cast<double>(r);
  double d2 = 0;
  for (std::size_t i = 0; i < n; ++i) d2 += (rank[i] - i) * (rank[i] - i);
  return 1.0 - 6.0 * d2 / (static_cast<double>(n) * (n * n - 1.0));
}

}  // namespace

TEST_CASE("periodic replay of 100 s") {
  const auto t = line_trace(100);
  PeriodicAgent agent{SchemeConfig{}};
  const auto out = run_epoch(t, agent, constant_models(20.0), SimConfig{}, 1);
  REQUIRE(out.log.rows.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(out.log.rows[i].record.payload == 500000.0);
    CHECK(out.log.rows[i].record.send_time == 9.0 + 10.0 * i);
    CHECK_FALSE(out.log.rows[i].flush);
  }
  CHECK(out.result.generated_bytes == out.result.transmitted_bytes);
}

TEST_CASE("an idle agent only sends at the deadline") {
  const auto t = line_trace(300);
  IdleAgent agent{SchemeConfig{}};
  const auto out = run_epoch(t, agent, constant_models(50.0), SimConfig{}, 1);
  REQUIRE(out.log.rows.size() == 3);
  CHECK(out.log.rows[0].forced);
  CHECK(out.log.rows[0].record.send_time == 120.0);
  CHECK(aoi(out.log.rows[0].record) == 120.0);
  CHECK(out.log.rows[1].forced);
  CHECK(out.log.rows[1].record.send_time == 241.0);
  CHECK(out.log.rows[2].flush);
  CHECK(out.result.transmissions >= 1);
}

TEST_CASE("byte conservation and deadline ages for every scheme") {
  const auto t = line_trace(600);
  SchemeConfig c;
  c.s_star = 15;
  c.s_max = 40;
  auto models = constant_models(12.0);
  models.truth = noisy_truth();
  for (bool flush : {true, false}) {
    SimConfig sim;
    sim.flush_at_end = flush;
    for (const auto& name : scheme_names()) {
      auto agent = make_agent(name, c);
      const auto out = run_epoch(t, *agent, models, sim, 3);
      CHECK(out.result.generated_bytes == out.result.transmitted_bytes + out.result.buffered_bytes);
      if (flush) CHECK(out.result.buffered_bytes == 0.0);
      double previous_duration = 0.0;
      for (const auto& row : out.log.rows) {
        const auto& r = row.record;
        CHECK(aoi(r) <= c.delta_t_max + t.sample_interval() + previous_duration + 1e-9);
        CHECK(std::abs(r.achieved_rate - r.payload * 8.0 / r.duration / 1e6) <= 1e-9);
        previous_duration = r.duration;
      }
      for (std::size_t i = 1; i < out.log.rows.size(); ++i) {
        CHECK(out.log.rows[i].record.send_time >= out.log.rows[i - 1].record.send_time);
      }
    }
  }
}

TEST_CASE("runs are deterministic") {
  const auto t = line_trace(400);
  auto models = constant_models(12.0);
  models.truth = noisy_truth();
  SchemeConfig c;
  auto a = make_agent("rl-cat", c);
  auto b = make_agent("rl-cat", c);
  const auto x = run_epoch(t, *a, models, SimConfig{}, 9);
  const auto y = run_epoch(t, *b, models, SimConfig{}, 9);
  CHECK(format_runlog(x.log) == format_runlog(y.log));
  const auto parsed = parse_runlog(format_runlog(x.log));
  CHECK(format_runlog(parsed) == format_runlog(x.log));
}

TEST_CASE("oracle passthrough reproduces the measured rate") {
  const auto t = line_trace(300);
  SimModels m;
  m.predictor = std::make_shared<OraclePredictor>();
  m.truth = std::make_shared<GroundTruthModel>(GroundTruthModel::passthrough());
  auto agent = make_agent("ml-cat", SchemeConfig{});
  const auto out = run_epoch(t, *agent, m, SimConfig{}, 4);
  REQUIRE(!out.log.rows.empty());
  for (const auto& row : out.log.rows) {
    const auto it = std::find_if(t.samples().begin(), t.samples().end(),
                                 [&](const ContextSample& s) { return s.position == row.position; });
    REQUIRE(it != t.samples().end());
    CHECK(row.s_hat == *it->measured_data_rate);
  }
}

TEST_CASE("training epochs") {
  const std::vector<Trace> traces{line_trace(300, 20.0, 1), line_trace(300, 20.0, 2)};
  auto models = constant_models(12.0);
  models.truth = noisy_truth();
  SchemeConfig c;
  auto a = make_agent("bs-cb", c);
  auto b = make_agent("bs-cb", c);
  const auto one = train_epochs(traces, *a, models, SimConfig{}, 1, 77);
  const auto direct = run_epoch(traces[0], *b, models, SimConfig{}, derive_seed(77, "epoch", 0), 0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].mean_rate == direct.result.mean_rate);
  CHECK(one[0].transmissions == direct.result.transmissions);
  CHECK_THROWS_AS(train_epochs(traces, *a, models, SimConfig{}, 0, 77), Error);
}

TEST_CASE("a frozen agent gives stationary epochs") {
  const std::vector<Trace> traces{line_trace(600, 20.0, 5)};
  SimModels m;
  m.predictor = std::make_shared<OraclePredictor>();
  m.truth = noisy_truth();
  auto agent = make_agent("ml-cat", SchemeConfig{});
  agent->set_learning(false);
  const auto r = train_epochs(traces, *agent, m, SimConfig{}, 50, 13);
  std::vector<double> means;
  for (const auto& e : r) means.push_back(e.mean_rate);
  CHECK(std::abs(spearman(means)) < 0.2);
}

TEST_CASE("convergence epoch") {
  const std::vector<double> flat(60, 4.0);
  CHECK(convergence_epoch(flat, 20, 0.05) == 20);

  std::vector<double> growing;
  for (int i = 0; i < 300; ++i) growing.push_back(std::pow(1.1, i));
  CHECK_FALSE(convergence_epoch(growing, 20, 0.05).has_value());

  std::vector<double> geo;
  for (int i = 0; i < 80; ++i) geo.push_back(10.0 - 8.0 * std::pow(0.5, i));
  const std::size_t w = 5;
  const double tol = 0.01;
  std::vector<double> ma(geo.size());
  for (std::size_t k = w - 1; k < geo.size(); ++k) {
    ma[k] = 0;
    for (std::size_t j = k + 1 - w; j <= k; ++j) ma[k] += geo[j] / w;
  }
  std::optional<std::size_t> expected;
  for (std::size_t k = w; k < geo.size(); ++k) {
    bool all = true;
    for (std::size_t j = k; j < geo.size(); ++j) all = all && std::abs(ma[j] - ma[j - 1]) / std::abs(ma[j - 1]) < tol;
    if (all) {
      expected = k;
      break;
    }
  }
  REQUIRE(expected.has_value());
  CHECK(convergence_epoch(geo, w, tol) == expected);
  CHECK_FALSE(convergence_epoch(std::vector<double>(5, 1.0), 5, 0.1).has_value());
  CHECK_THROWS_AS(convergence_epoch(flat, 1, 0.1), Error);
}
