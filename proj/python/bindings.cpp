#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "odt/experiment.hpp"

namespace py = pybind11;
using namespace odt;

namespace {

py::dict kpi_dict(const RunKpis& k) {
  py::dict d;
  d["transmissions"] = k.transmissions;
  d["mean_rate"] = k.mean_rate;
  d["mean_aoi"] = k.mean_aoi;
  d["prb_per_mb"] = k.prb_per_mb ? py::cast(*k.prb_per_mb) : py::none();
  d["mean_energy"] = k.mean_energy;
  d["total_bytes"] = k.total_bytes;
  d["e_s"] = k.e_s;
  d["e_aoi"] = k.e_aoi;
  return d;
}

py::dict epoch_dict(const EpochResult& e) {
  py::dict d;
  d["epoch"] = e.epoch;
  d["mean_rate"] = e.mean_rate;
  d["mean_aoi"] = e.mean_aoi;
  d["transmissions"] = e.transmissions;
  d["generated_bytes"] = e.generated_bytes;
  d["transmitted_bytes"] = e.transmitted_bytes;
  return d;
}

ExperimentConfig parse_config(const std::string& text, const py::dict& overrides) {
  auto kv = KeyValueFile::parse(text);
  for (const auto& [k, v] : overrides) kv.set(py::str(k), py::str(v));
  return ExperimentConfig::parse(kv);
}

ExperimentConfig load_config(const std::filesystem::path& path, const py::dict& overrides) {
  auto kv = KeyValueFile::load(path);
  for (const auto& [k, v] : overrides) kv.set(py::str(k), py::str(v));
  return ExperimentConfig::parse(kv);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Opportunistic data transmission experiments";

  // Translators run newest first, so the subclass is registered last.
  py::register_exception<Error>(m, "Error", PyExc_ValueError);
  static py::exception<StageError> stage_error(m, "StageError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const StageError& e) {
      py::object exc = stage_error;
      PyErr_SetObject(exc.ptr(), py::make_tuple(e.what(), e.stage()).ptr());
    }
  });

  py::class_<ExperimentConfig>(m, "Config")
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("epochs", &ExperimentConfig::epochs)
      .def_readwrite("eval_epochs", &ExperimentConfig::eval_epochs)
      .def_readwrite("scheme", &ExperimentConfig::scheme)
      .def_readwrite("out", &ExperimentConfig::out)
      .def_readonly("compare_schemes", &ExperimentConfig::compare_schemes)
      .def("source_text", [](const ExperimentConfig& c) { return c.source.to_string(); });

  m.def("parse_config", &parse_config, py::arg("text"), py::arg("overrides") = py::dict());
  m.def("load_config", &load_config, py::arg("path"), py::arg("overrides") = py::dict());
  m.def("scheme_names", &scheme_names);
  m.def("sweep_axes", &sweep_axes);

  m.def(
      "run",
      [](const ExperimentConfig& c) {
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c);
        }
        py::dict d;
        d["scheme"] = r.scheme;
        d["kpis"] = kpi_dict(r.kpis);
        d["kpis_text"] = format_kpis(r.kpis);
        py::list epochs;
        for (const auto& e : r.epochs) epochs.append(epoch_dict(e));
        d["epochs"] = epochs;
        d["convergence"] = r.convergence ? py::cast(*r.convergence) : py::none();
        return d;
      },
      py::arg("config"));

  m.def(
      "sweep",
      [](const ExperimentConfig& c, const std::string& axis, const std::vector<double>& values) {
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep(c, axis, values);
        }
        py::list out;
        for (const auto& r : rows) {
          auto d = kpi_dict(r.kpis);
          d["value"] = r.value;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("axis"), py::arg("values"));

  m.def(
      "compare",
      [](const ExperimentConfig& c, std::vector<std::string> schemes) {
        if (schemes.empty()) schemes = c.compare_schemes;
        std::vector<CompareRow> rows;
        {
          py::gil_scoped_release release;
          rows = compare_schemes(c, schemes);
        }
        py::list out;
        for (const auto& r : rows) {
          auto d = kpi_dict(r.kpis);
          d["scheme"] = r.scheme;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("schemes") = std::vector<std::string>{});

  m.def(
      "cluster",
      [](const ExperimentConfig& c) {
        const auto rep = run_cluster(c);
        py::dict d;
        d["ellipses"] = rep.map.ellipses.size();
        d["eliminated_fraction"] = rep.map.eliminated_fraction;
        py::list rows;
        for (const auto& t : rep.tradeoff) {
          py::dict r;
          r["rmse_max"] = t.rmse_max;
          r["eliminated_fraction"] = t.eliminated_fraction;
          r["ellipses"] = t.ellipses;
          r["rmse"] = t.rmse;
          r["r2"] = t.r2 ? py::cast(*t.r2) : py::none();
          rows.append(r);
        }
        d["tradeoff"] = rows;
        return d;
      },
      py::arg("config"));

  m.def(
      "drift",
      [](const ExperimentConfig& c) {
        const auto curve = run_drift(c);
        return py::make_tuple(curve.rmse_a, curve.rmse_b);
      },
      py::arg("config"));

  m.def(
      "tx_reward",
      [](double s_tilde, double delta_t, double w, double s_star, double s_max, double delta_t_max) {
        SchemeConfig c;
        c.w = w;
        c.s_star = s_star;
        c.s_max = s_max;
        c.delta_t_max = delta_t_max;
        return tx_reward(s_tilde, delta_t, c);
      },
      py::arg("s_tilde"), py::arg("delta_t"), py::arg("w") = 0.9, py::arg("s_star") = 15.0, py::arg("s_max") = 40.0,
      py::arg("delta_t_max") = 120.0);
  m.def(
      "cat_probability",
      [](double phi, double delta_t, double phi_min, double phi_max, double delta_t_min, double delta_t_max,
         double exponent) {
        return cat_probability(phi, delta_t, {phi_min, phi_max, delta_t_min, delta_t_max, exponent});
      },
      py::arg("phi"), py::arg("delta_t"), py::arg("phi_min"), py::arg("phi_max"), py::arg("delta_t_min") = 10.0,
      py::arg("delta_t_max") = 120.0, py::arg("exponent") = 1.0);
  m.def("q_update", &q_update, py::arg("q"), py::arg("reward"), py::arg("alpha_lr"));

  py::class_<LinUcb>(m, "LinUcb")
      .def(py::init<double>(), py::arg("delta") = 0.1)
      .def_property_readonly("alpha", &LinUcb::alpha)
      .def("select",
           [](const LinUcb& b, double c0, double c1) { return b.select({c0, c1}) == Action::Tx ? "tx" : "idle"; })
      .def("update",
           [](LinUcb& b, const std::string& action, double c0, double c1, double reward) {
             if (action != "tx" && action != "idle") throw Error("action must be 'tx' or 'idle'");
             b.update(action == "tx" ? Action::Tx : Action::Idle, {c0, c1}, reward);
           })
      .def("theta", [](const LinUcb& b, const std::string& action) {
        const auto& t = b.arm(action == "tx" ? Action::Tx : Action::Idle).theta;
        return std::vector<double>{t.x(), t.y()};
      });
}
