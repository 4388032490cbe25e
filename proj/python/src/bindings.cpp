#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "rflab/app/acceptance.hpp"
#include "rflab/app/scenario.hpp"
#include "rflab/entropy/entropy.hpp"
#include "rflab/entropy/report.hpp"
#include "rflab/flow/flow.hpp"
#include "rflab/geometry/serialize.hpp"
#include "rflab/heat/conjugate_heat.hpp"
#include "rflab/reduced/field.hpp"
#include "rflab/reduced/sampler.hpp"

namespace py = pybind11;
using namespace rflab;

namespace {

// Dicts cross the boundary as JSON text; the stdlib parser does the work.
nlohmann::json from_py(const py::object& o) {
  const auto dumps = py::module_::import("json").attr("dumps");
  return nlohmann::json::parse(dumps(o).cast<std::string>());
}

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

geometry::MetricModel model_of(const py::object& o) { return geometry::metric_from_json(from_py(o)); }

// Densities the library treats as immortal: uniform unless the flow lives on
// the torus, where the limit of backward solves is constructed.
entropy::DensityProvider density_for(const flow::FlowHistory& h, const std::vector<double>& times) {
  if (h.kind() != geometry::ModelKind::ConformalTorus) return entropy::uniform_density(h);
  heat::ImmortalOptions io;
  io.sample_times = times;
  io.birth_time = h.birth_time();
  auto d = heat::construct_immortal_density(h, {times.front(), times.back()}, io);
  if (!d.converged) throw NumericalError("immortal density did not converge");
  return entropy::sampled_density(std::move(d.states));
}

py::dict entropy_row(const entropy::EntropyRow& r) {
  py::dict d;
  d["t"] = r.t;
  d["sigma"] = r.sigma;
  d["F"] = r.F;
  d["F_plus"] = r.F_plus;
  d["N"] = r.N;
  d["N_plus"] = r.N_plus;
  d["W_plus"] = r.W_plus;
  d["dW_dt"] = r.dW_dt;
  d["rhs"] = r.rhs;
  d["lambda"] = r.lambda;
  d["lambda_bar"] = r.lambda_bar;
  d["v_tilde"] = r.v_tilde;
  return d;
}

std::vector<reduced::Target> targets_of(const std::vector<std::tuple<double, double, double>>& in) {
  std::vector<reduced::Target> out;
  for (const auto& [x, y, t] : in) out.push_back({{x, y}, t});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Expander-entropy and forward reduced-volume lab for Ricci flow";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<reduced::UnsupportedModel>(m, "UnsupportedModel", PyExc_ValueError);
  py::register_exception<app::ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<flow::FlowHistory>(m, "Flow")
      .def_property_readonly("kind", [](const flow::FlowHistory& h) { return geometry::kind_name(h.kind()); })
      .def_property_readonly("dimension", &flow::FlowHistory::dimension)
      .def_property_readonly("t_begin", &flow::FlowHistory::t_begin)
      .def_property_readonly("t_end", &flow::FlowHistory::t_end)
      .def_property_readonly("birth_time", &flow::FlowHistory::birth_time)
      .def_property_readonly("extinct", &flow::FlowHistory::extinct)
      .def_property_readonly("alpha", &flow::FlowHistory::alpha)
      .def("snapshot_times", &flow::FlowHistory::snapshot_times)
      .def("volume", &flow::FlowHistory::volume, py::arg("t"))
      .def("scaled_volume", [](const flow::FlowHistory& h, double t) { return flow::scaled_volume(h, t); },
           py::arg("t"))
      .def("metric", [](const flow::FlowHistory& h, double t) { return to_py(geometry::metric_to_json(h.metric(t))); },
           py::arg("t"))
      .def("blowdown", &flow::FlowHistory::blowdown, py::arg("alpha"))
      .def("csv", [](const flow::FlowHistory& h) { return flow::history_csv(h); });

  m.def(
      "evolve",
      [](const py::object& model, double t0, double t1, std::vector<double> stops) {
        flow::FlowOptions fo;
        fo.stops = std::move(stops);
        return flow::evolve(model_of(model), t0, t1, fo);
      },
      py::arg("model"), py::arg("t0"), py::arg("t1"), py::arg("stops") = std::vector<double>{},
      "Ricci flow of a model (a dict in the scenario model format) from t0 to t1.");

  m.def(
      "entropy_series",
      [](const flow::FlowHistory& h, const std::vector<double>& times) {
        entropy::EntropyOptions eo;
        eo.birth_time = h.birth_time();
        const auto rep = entropy::entropy_report(h, density_for(h, times), times, eo);
        py::list rows;
        for (const auto& r : rep.rows) rows.append(entropy_row(r));
        py::dict verdicts;
        for (const auto& v : rep.verdicts) verdicts[py::str(v.check)] = py::make_tuple(v.ok, v.worst);
        py::dict out;
        out["rows"] = rows;
        out["verdicts"] = verdicts;
        return out;
      },
      py::arg("flow"), py::arg("times"),
      "W+, Nash entropy, F, lambda-bar and scaled volume along the immortal density.");

  m.def(
      "w_plus",
      [](const py::object& model, const std::vector<double>& u, double sigma) {
        return entropy::W_plus(model_of(model), u, sigma);
      },
      py::arg("model"), py::arg("u"), py::arg("sigma"));

  m.def(
      "lambda_bar", [](const py::object& model) { return entropy::lambda_bar(model_of(model)); }, py::arg("model"));

  m.def(
      "mu_plus",
      [](const py::object& model, double sigma) {
        const auto r = entropy::mu_plus(model_of(model), sigma);
        py::dict d;
        d["value"] = r.value;
        d["u"] = r.u;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("model"), py::arg("sigma"));

  m.def(
      "nu_plus",
      [](const py::object& model) {
        const auto r = entropy::nu_plus(model_of(model));
        py::dict d;
        d["unbounded"] = r.unbounded;
        d["value"] = r.value;
        d["sigma"] = r.sigma;
        d["lambda"] = r.lambda;
        return d;
      },
      py::arg("model"));

  m.def(
      "ell_plus",
      [](const flow::FlowHistory& h, double base_time, std::pair<double, double> base,
         const std::vector<std::tuple<double, double, double>>& targets) {
        const auto f = reduced::ell_plus_field(h, base_time, {base.first, base.second}, targets_of(targets));
        py::list pts;
        for (const auto& p : f.points) {
          py::dict d;
          d["y"] = py::make_tuple(p.target.y[0], p.target.y[1]);
          d["t"] = p.target.t;
          d["tau"] = p.tau;
          d["ell"] = p.ell;
          d["K"] = p.K;
          d["oracle_gap"] = p.oracle_gap;
          pts.append(d);
        }
        py::dict out;
        out["points"] = pts;
        out["max_oracle_gap"] = f.max_oracle_gap;
        out["max_identity_residual"] = f.max_identity_residual;
        out["fallbacks"] = f.fallbacks;
        return out;
      },
      py::arg("flow"), py::arg("base_time"), py::arg("base"), py::arg("targets"),
      "Reduced distance at (x, y, t) targets; on model spaces x is the distance from the base.");

  m.def(
      "theta_plus",
      [](const flow::FlowHistory& h, double base_time, std::pair<double, double> base,
         const std::vector<double>& times, int resolution) {
        reduced::ThetaOptions to;
        to.torus_resolution = resolution;
        const auto s = reduced::theta_plus(h, base_time, {base.first, base.second}, times, to);
        py::dict d;
        d["times"] = s.times;
        d["theta"] = s.theta;
        d["lower_bound"] = s.lower_bound;
        d["nonincreasing"] = s.nonincreasing;
        d["above_bound"] = s.above_bound;
        return d;
      },
      py::arg("flow"), py::arg("base_time"), py::arg("base"), py::arg("times"), py::arg("resolution") = 16);

  m.def(
      "run_scenario",
      [](const std::string& config_text) {
        const auto cfg = app::parse_config(config_text);
        py::list out;
        for (const auto& s : cfg.scenarios) {
          app::ScenarioResult r;
          {
            py::gil_scoped_release release;
            r = app::run_scenario(s);
          }
          out.append(to_py(r.report()));
        }
        return out;
      },
      py::arg("config_text"), "Runs every scenario of a JSON config and returns their reports.");

  m.def(
      "run_acceptance",
      [](const std::string& suite) {
        const auto which = app::parse_suite(suite);
        if (!which) throw py::value_error("suite must be fast or full");
        std::ostringstream log;
        std::vector<app::CriterionResult> results;
        {
          py::gil_scoped_release release;
          results = app::run_acceptance(*which, log);
        }
        py::list out;
        for (const auto& c : results) {
          py::dict d;
          d["id"] = c.id;
          d["title"] = c.title;
          d["pass"] = c.pass();
          d["seconds"] = c.seconds;
          d["error"] = c.error;
          out.append(d);
        }
        return out;
      },
      py::arg("suite") = "fast");
}
