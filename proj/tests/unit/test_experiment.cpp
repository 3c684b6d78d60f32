#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "odt/experiment.hpp"

using namespace odt;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(seed = 3
synthetic.duration_s = 300
synthetic.route_length_m = 5000
synthetic.train_drives = 1
synthetic.validation_drives = 1
synthetic.replay_drives = 1
predictor.n_trees = 5
predictor.max_depth = 8
blackspot.n_clusters = 10
)";

ExperimentConfig tiny(const std::string& extra = "", const fs::path& out = "") {
  auto kv = KeyValueFile::parse(std::string(kTiny) + "epochs = 1\n");
  const auto overrides = KeyValueFile::parse(extra);
  for (const auto& [k, v] : overrides.entries()) kv.set(k, v);
  auto c = ExperimentConfig::parse(kv);
  c.out = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("odt_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = tiny("scheme.w = 0.5\nblackspot.rmse_max = 2.5\n");
  CHECK(c.seed == 3);
  CHECK(c.scheme_config.w == 0.5);
  CHECK(c.blackspot.rmse_max == 2.5);
  CHECK(c.synthetic.duration_s == 300);
  CHECK_THROWS_WITH_AS(tiny("scheme.ww = 0.5\n"), doctest::Contains("scheme.ww"), Error);
  CHECK_THROWS_WITH_AS(tiny("colour = blue\n"), doctest::Contains("colour"), Error);
  CHECK_THROWS_WITH_AS(tiny("drift.synthetic.nonsense = 1\n"), doctest::Contains("nonsense"), Error);
  CHECK_THROWS_WITH_AS(tiny("trace.source = files\ntrace.train_files = /no/such/trace.csv\n"),
                       doctest::Contains("/no/such/trace.csv"), Error);
  CHECK_THROWS_AS(tiny("scheme.w = 2\n"), Error);
}

TEST_CASE("sweep axes") {
  auto c = tiny();
  apply_axis(c, "w", 0.3);
  CHECK(c.scheme_config.w == 0.3);
  apply_axis(c, "delta_t_max", 10);
  CHECK(c.scheme_config.delta_t_max == 10);
  CHECK(c.scheme_config.delta_t_min < 10);
  apply_axis(c, "epochs", 4);
  CHECK(c.epochs == 4);
  CHECK_THROWS_WITH_AS(apply_axis(c, "colour", 1), doctest::Contains("rmse_max"), Error);
}

TEST_CASE("minimal run writes a bundle") {
  const auto out = scratch("run");
  const auto r = run_experiment(tiny("", out));
  CHECK(r.epochs.size() == 1);
  CHECK(fs::exists(out / "manifest.txt"));
  CHECK(fs::exists(out / "epochs.csv"));
  CHECK(fs::exists(out / "kpi.txt"));
  CHECK(fs::exists(out / "runlogs" / "epoch_0000.csv"));
  int runlogs = 0;
  for (const auto& e : fs::directory_iterator(out / "runlogs")) runlogs += e.is_regular_file();
  CHECK(runlogs == 1);

  // Reporting is re-derivable from the emitted run log.
  const auto log = parse_runlog(slurp(out / "runlogs" / "epoch_0000.csv"));
  const auto models = build_models(tiny());
  const auto kpis = summarize_run(log.records(), resolved_scheme_config(tiny(), models), *models.tables, tiny().power);
  CHECK(format_kpis(kpis) == format_kpis(r.kpis));
  fs::remove_all(out);
}

TEST_CASE("identical configs give identical bundles") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  run_experiment(tiny("scheme = bs-cb\nepochs = 3\neval_epochs = 1\n", a));
  run_experiment(tiny("scheme = bs-cb\nepochs = 3\neval_epochs = 1\n", b));
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    if (rel == "manifest.txt") continue;  // names its own output directory
    CHECK_MESSAGE(slurp(e.path()) == slurp(b / rel), rel.string());
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("single value sweep equals a run") {
  const auto c = tiny("scheme = ml-cat\nepochs = 2\n");
  const auto rows = sweep(c, "w", {c.scheme_config.w});
  const auto r = run_experiment(c);
  REQUIRE(rows.size() == 1);
  CHECK(format_kpis(rows[0].kpis) == format_kpis(r.kpis));
  CHECK_THROWS_AS(sweep(c, "colour", {1.0}), StageError);
}

TEST_CASE("scheme comparison") {
  const auto c = tiny();
  const auto rows = compare_schemes(c, {"periodic", "periodic"});
  REQUIRE(rows.size() == 2);
  CHECK(format_kpis(rows[0].kpis) == format_kpis(rows[1].kpis));
  CHECK_THROWS_WITH_AS(compare_schemes(c, {"periodic", "turbo"}), doctest::Contains("periodic, cat, ml-cat, rl-cat, bs-cb"),
                       StageError);
  const auto table = format_compare_deltas(rows);
  CHECK(table.find("periodic,periodic,0,0") != std::string::npos);
}

TEST_CASE("stage names appear in errors") {
  auto c = tiny();
  c.blackspot.n_clusters = 100000;
  try {
    build_models(c);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "blackspot");
  }
}

TEST_CASE("BS-CB improves with training") {
  const auto c = tiny("scheme = bs-cb\nepochs = 100\nsynthetic.duration_s = 600\nsynthetic.route_length_m = 9000\n");
  const auto r = run_experiment(c);
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    head += r.epochs[i].mean_rate;
    tail += r.epochs[r.epochs.size() - 1 - i].mean_rate;
  }
  CHECK(tail >= head);
}
