#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <memory>
#include <sstream>

#include "craft/checkpoint.hpp"
#include "craft/config.hpp"
#include "craft/dataset.hpp"
#include "craft/decomposition.hpp"
#include "craft/error.hpp"
#include "craft/numeric.hpp"
#include "craft/train.hpp"

namespace py = pybind11;
using namespace craft;

namespace {

// Python values are passed through their str() so config dicts accept ints,
// floats and strings alike.
ConfigMap to_map(const py::dict& d) {
  ConfigMap m;
  for (auto [k, v] : d) {
    std::string s = py::str(v);
    if (py::isinstance<py::bool_>(v)) s = v.cast<bool>() ? "1" : "0";
    m[py::str(k)] = s;
  }
  return m;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["mae"] = r.mae;
  d["rmse"] = r.rmse;
  d["wmape"] = r.wmape ? py::cast(*r.wmape) : py::none();
  d["iwr"] = r.iwr;
  d["phdi"] = r.phdi;
  d["loss_y"] = r.loss_y;
  d["loss_be_k"] = r.loss_be_k;
  d["loss_be_y"] = r.loss_be_y;
  d["loss_recon"] = r.loss_recon;
  d["group_gap"] = r.group_gap;
  d["samples"] = r.samples;
  return d;
}

py::dict sample_dict(const ForecastSample& s) {
  py::dict d;
  d["hotel_id"] = s.hotel_id;
  d["district_id"] = s.district_id;
  d["city_id"] = s.city_id;
  d["origin"] = s.origin;
  d["L"] = s.L;
  d["P"] = s.P;
  d["y_L"] = s.y_L;
  d["y_P"] = s.y_P;
  d["c_L_series"] = s.c_L_series;
  d["c_L"] = s.c_Lmat.values;
  d["c_P"] = s.c_P.values;
  d["c_P_mask"] = s.c_P.mask;
  d["itm_rows"] = s.itm_rows;
  d["y_lower"] = s.y_lower;
  d["y_upper"] = s.y_upper;
  return d;
}

// A trained model bundled with the config it was trained under.
struct Model {
  TrainConfig config;
  CraftParams params;
  TrainHistory history;
};

}  // namespace

PYBIND11_MODULE(_craft, m) {
  m.doc() = "Cross-future behavior forecasting (CRAFT) core bindings";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  m.def("ridge_solve", &ridge_solve, py::arg("A"), py::arg("B"), py::arg("lam"));
  m.def("moving_avg_trend", &moving_avg_trend, py::arg("series"), py::arg("kernel"));
  m.def("decompose", [](const Vec& x, int k) {
    const TrendResidual d = decompose(x, k);
    return py::make_tuple(d.trend, d.residual);
  }, py::arg("series"), py::arg("kernel"));
  m.def("early_to_cumulative", &early_to_cumulative);
  m.def("wmape", &wmape, py::arg("y_hat"), py::arg("y"));
  m.def("iwr", &iwr, py::arg("y_hat"), py::arg("y"), py::arg("b") = 1.0);
  m.def("phdi", &phdi, py::arg("y_hat"), py::arg("y"), py::arg("b") = 1.0);
  m.def("pearson", &pearson);
  m.def("demand_loss", py::overload_cast<const Vec&, const Vec&, const Vec&, const Vec&, double>(&demand_loss),
        py::arg("y_hat"), py::arg("y"), py::arg("y_lower"), py::arg("y_upper"), py::arg("beta") = 1.0);

  py::class_<HotelWorld, std::shared_ptr<HotelWorld>>(m, "World")
      .def_property_readonly("horizon", [](const HotelWorld& w) { return w.horizon; })
      .def_property_readonly("seed", [](const HotelWorld& w) { return w.seed; })
      .def_property_readonly("hotel_ids", [](const HotelWorld& w) {
        std::vector<std::int32_t> ids;
        for (const Hotel& h : w.hotels) ids.push_back(h.hotel_id);
        return ids;
      })
      .def_property_readonly("labels", [](const HotelWorld& w) { return w.labels; })
      .def("valid_origins", &valid_origins, py::arg("L"), py::arg("P"))
      .def("sample", [](const HotelWorld& w, std::int32_t hotel, std::int32_t origin, std::int32_t L,
                        std::int32_t P) { return sample_dict(build_sample(w, hotel, origin, L, P)); },
           py::arg("hotel_id"), py::arg("origin"), py::arg("L") = 30, py::arg("P") = 7)
      .def("save", [](const HotelWorld& w, const std::filesystem::path& p) { write_world(w, p); });

  m.def("generate_world", [](const py::dict& config, std::uint64_t seed) {
    const WorldConfig c = world_config_from_map(to_map(config));
    c.validate();
    return std::make_shared<HotelWorld>(generate_world(c, seed));
  }, py::arg("config") = py::dict(), py::arg("seed") = 1);
  m.def("load_world", [](const std::filesystem::path& p) { return std::make_shared<HotelWorld>(read_world(p)); });

  py::class_<Model>(m, "Model")
      .def_property_readonly("config", [](const Model& x) { return to_config_text(x.config); })
      .def_property_readonly("step_loss", [](const Model& x) { return x.history.step_loss; })
      .def_property_readonly("aborted", [](const Model& x) { return x.history.aborted; })
      .def("parameter_count", [](Model& x) { return x.params.parameter_count(); })
      .def("evaluate", [](Model& x, const HotelWorld& w, const std::string& split) {
        const DataView d = DataView::make(w, x.config);
        return report_dict(evaluate(x.params, d, x.config, parse_split(split)));
      }, py::arg("world"), py::arg("split") = "test")
      .def("checkpoint", [](Model& x) { return py::bytes(encode_checkpoint(x.config, x.params)); })
      .def("save", [](Model& x, const std::filesystem::path& p) { save_checkpoint(p, x.config, x.params); });

  m.def("train", [](const HotelWorld& w, const py::dict& config) {
    const TrainConfig c = train_config_from_map(to_map(config));
    const DataView d = DataView::make(w, c);
    py::gil_scoped_release release;
    TrainResult r = train(d, c);
    return Model{c, std::move(r.params), std::move(r.history)};
  }, py::arg("world"), py::arg("config") = py::dict());
  m.def("load_checkpoint", [](const std::filesystem::path& p) {
    Checkpoint ck = load_checkpoint(p);
    return Model{ck.config, std::move(ck.params), {}};
  });
  m.def("baseline_dlinear", [](const HotelWorld& w, const py::dict& config) {
    const TrainConfig c = train_config_from_map(to_map(config));
    const DataView d = DataView::make(w, c);
    return report_dict(baseline_dlinear(d, c));
  }, py::arg("world"), py::arg("config") = py::dict());
}
