#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pitransfer/dimension.hpp"
#include "pitransfer/experiments.hpp"

namespace py = pybind11;
using namespace pitransfer;
namespace ex = pitransfer::experiments;

namespace {

VehicleSpec vehicle_named(const std::string& name) { return VehicleRegistry::defaults().at(name); }

std::vector<Dataset> kinematic_datasets(const std::vector<std::string>& vehicles) {
  std::vector<Dataset> out;
  for (const auto& name : vehicles) out.push_back(kinematic_grid(vehicle_named(name)));
  return out;
}

std::vector<Dataset> source_datasets(SourceKind source, std::uint64_t seed, const std::vector<std::string>& vehicles) {
  if (source == SourceKind::kinematic) return kinematic_datasets(vehicles);
  std::vector<Dataset> out;
  for (const auto& name : vehicles) out.push_back(surrogate_grid(vehicle_named(name), seed));
  return out;
}

FeatureMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw gbt::GbtError("empty feature matrix");
  std::vector<std::string> names;
  for (std::size_t j = 0; j < rows.front().size(); ++j) names.push_back("x" + std::to_string(j));
  FeatureMatrix m(names);
  for (const auto& r : rows) {
    if (r.size() != names.size()) throw gbt::GbtError("ragged feature rows");
    m.push_row(r);
  }
  return m;
}

py::dict mae_dict(const ex::Mae& m) {
  py::dict d;
  d["X"] = m.x;
  d["Y"] = m.y;
  d["theta"] = m.theta;
  return d;
}

const std::vector<std::string> kDefaultVehicles = {"small", "long", "large"};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dimensional analysis, braking simulation and dimensionless transfer-learning experiments";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ManeuverError>(m, "ManeuverError", PyExc_ValueError);
  py::register_exception<FeatureError>(m, "FeatureError", PyExc_ValueError);
  py::register_exception<gbt::GbtError>(m, "GbtError", PyExc_ValueError);
  py::register_exception<ex::ExperimentError>(m, "ExperimentError", PyExc_RuntimeError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_RuntimeError);

  py::class_<VehicleSpec>(m, "VehicleSpec")
      .def(py::init([](std::string name, double l, double nf, double nr) {
             VehicleSpec v{std::move(name), l, nf, nr};
             v.validate();
             return v;
           }),
           py::arg("name"), py::arg("l"), py::arg("Nf"), py::arg("Nr"))
      .def_readonly("name", &VehicleSpec::name)
      .def_readonly("l", &VehicleSpec::wheelbase_l)
      .def_readonly("Nf", &VehicleSpec::front_normal_Nf)
      .def_readonly("Nr", &VehicleSpec::rear_normal_Nr)
      .def("__repr__", [](const VehicleSpec& v) {
        return "VehicleSpec(" + v.name + ", l=" + format_double(v.wheelbase_l) + ")";
      });

  py::class_<ManeuverInput>(m, "ManeuverInput")
      .def(py::init([](double v_i, double a, double delta, double mu, double g) {
             return ManeuverInput{v_i, a, delta, mu, g};
           }),
           py::arg("v_i"), py::arg("a"), py::arg("delta"), py::arg("mu") = 0.0, py::arg("g") = kStandardGravity)
      .def_readonly("v_i", &ManeuverInput::v_i)
      .def_readonly("a", &ManeuverInput::a)
      .def_readonly("delta", &ManeuverInput::delta)
      .def_readonly("mu", &ManeuverInput::mu)
      .def_readonly("g", &ManeuverInput::g);

  py::class_<FinalPose>(m, "FinalPose")
      .def_readonly("X", &FinalPose::X)
      .def_readonly("Y", &FinalPose::Y)
      .def_readonly("theta", &FinalPose::theta)
      .def("as_tuple", [](const FinalPose& p) { return py::make_tuple(p.X, p.Y, p.theta); })
      .def("__repr__", [](const FinalPose& p) {
        return "FinalPose(X=" + format_double(p.X) + ", Y=" + format_double(p.Y) + ", theta=" + format_double(p.theta) +
               ")";
      });

  m.def("default_vehicles", [] { return VehicleRegistry::defaults().vehicles(); });
  m.def("vehicle", &vehicle_named, py::arg("name"));

  m.def("simulate_kinematic", &simulate_kinematic, py::arg("vehicle"), py::arg("inputs"), py::arg("step") = kDefaultStep);
  m.def("analytic_arc_oracle", &analytic_arc_oracle, py::arg("vehicle"), py::arg("inputs"));
  m.def(
      "simulate_dynamic_surrogate",
      [](const VehicleSpec& v, const ManeuverInput& in, std::uint64_t seed, bool noise) {
        SurrogateOptions o;
        o.noise = noise;
        return simulate_dynamic_surrogate(v, in, seed, o);
      },
      py::arg("vehicle"), py::arg("inputs"), py::arg("seed"), py::arg("noise") = true);

  m.def(
      "pi_basis",
      [](const std::string& set, const std::vector<std::string>& repeated) {
        std::vector<VariableDecl> vars;
        if (set == "kinematic")
          vars = kinematic_variables();
        else if (set == "dynamic")
          vars = dynamic_variables();
        else
          vars = parse_variable_decls(set);
        const auto dm = build_dimension_matrix(vars);
        const PiBasis b = repeated.empty() ? nullspace_pi_basis(dm) : repeated_vars_pi_basis(dm, repeated);
        std::vector<std::pair<std::string, std::string>> out;
        for (std::size_t g = 0; g < b.size(); ++g) out.emplace_back(b.groups()[g].name, b.monomial(g));
        return out;
      },
      py::arg("variables") = "kinematic", py::arg("repeated") = std::vector<std::string>{},
      "Pi groups as (name, monomial) pairs. `variables` is 'kinematic', 'dynamic' or declaration text.");
  m.def(
      "transform_row",
      [](const std::string& set, const std::vector<std::string>& repeated, const std::map<std::string, double>& row) {
        const auto vars = set == "kinematic" ? kinematic_variables()
                          : set == "dynamic" ? dynamic_variables()
                                             : parse_variable_decls(set);
        const auto dm = build_dimension_matrix(vars);
        const PiBasis b = repeated.empty() ? nullspace_pi_basis(dm) : repeated_vars_pi_basis(dm, repeated);
        return transform_row(b, row);
      },
      py::arg("variables"), py::arg("repeated"), py::arg("row"));

  m.def(
      "grid_size",
      [](const std::string& source, const std::string& vehicle, std::uint64_t seed) {
        return source_datasets(parse_source(source), seed, {vehicle}).front().size();
      },
      py::arg("source"), py::arg("vehicle"), py::arg("seed") = 0);

  m.def(
      "write_dataset",
      [](const std::string& source, const std::string& vehicle, const std::filesystem::path& path, std::uint64_t seed) {
        save_dataset(source_datasets(parse_source(source), seed, {vehicle}).front(), path);
      },
      py::arg("source"), py::arg("vehicle"), py::arg("path"), py::arg("seed") = 0);

  m.def(
      "features",
      [](const std::string& scheme, const VehicleSpec& v, const ManeuverInput& in) {
        ManeuverRecord r{v, in, {}, in.mu > 0.0 ? SourceKind::surrogate : SourceKind::kinematic};
        switch (parse_scheme(scheme)) {
          case Scheme::baseline: return baseline_features(r);
          case Scheme::augmented: return augmented_features(r);
          case Scheme::pi: return pi_features(r);
          case Scheme::pi_augmented: return pi_augmented_features(r);
          case Scheme::pi_fillers: return pi_fillers_features(r);
          default: throw FeatureError("scheme '" + scheme + "' needs a fitted pipeline");
        }
      },
      py::arg("scheme"), py::arg("vehicle"), py::arg("inputs"),
      "Per-record inputs of a stateless scheme; mu > 0 selects the surrogate feature set.");

  py::class_<gbt::Ensemble>(m, "Ensemble")
      .def("predict",
           [](const gbt::Ensemble& e, const std::vector<std::vector<double>>& x) { return e.predict(to_matrix(x)); })
      .def_property_readonly("n_trees", [](const gbt::Ensemble& e) { return e.trees.size(); })
      .def_readonly("base_score", &gbt::Ensemble::base_score)
      .def("dumps", [](const gbt::Ensemble& e) {
        std::ostringstream s;
        e.save(s);
        return s.str();
      });
  m.def("loads_ensemble", [](const std::string& text) {
    std::istringstream s(text);
    return gbt::Ensemble::load(s);
  });
  m.def(
      "fit_gbt",
      [](const std::vector<std::vector<double>>& x, const std::vector<double>& y, int n_rounds, double learning_rate,
         int max_depth, int min_samples_leaf, double subsample, std::uint64_t seed, int n_threads) {
        gbt::GbtConfig c;
        c.n_rounds = n_rounds;
        c.learning_rate = learning_rate;
        c.max_depth = max_depth;
        c.min_samples_leaf = min_samples_leaf;
        c.subsample = subsample;
        c.seed = seed;
        c.n_threads = n_threads;
        const FeatureMatrix fm = to_matrix(x);
        py::gil_scoped_release release;
        return gbt::fit(fm, y, c);
      },
      py::arg("x"), py::arg("y"), py::arg("n_rounds") = 300, py::arg("learning_rate") = 0.1, py::arg("max_depth") = 4,
      py::arg("min_samples_leaf") = 5, py::arg("subsample") = 1.0, py::arg("seed") = 0, py::arg("n_threads") = 1);

  m.def(
      "run_matrix",
      [](const std::string& scheme, const std::string& source, std::uint64_t seed, int n_rounds,
         const std::vector<std::string>& vehicles) {
        ex::ExperimentOptions o;
        o.seed = seed;
        o.gbt.n_rounds = n_rounds;
        const auto data = source_datasets(parse_source(source), seed, vehicles);
        ex::ExperimentReport r;
        {
          py::gil_scoped_release release;
          r = ex::run_matrix(data, parse_scheme(scheme), o);
        }
        py::list cells;
        for (const auto& c : r.cells) {
          py::dict d = mae_dict(c.mae);
          d["model"] = c.model_vehicle;
          d["data"] = c.data_vehicle;
          d["kind"] = std::string(ex::to_string(c.kind));
          cells.append(d);
        }
        py::dict out;
        out["cells"] = cells;
        out["self"] = mae_dict(r.summary.self);
        out["cross"] = mae_dict(r.summary.cross);
        out["shared"] = mae_dict(r.summary.shared);
        out["leaks"] = ex::audit_leakage(r);
        out["csv"] = ex::matrix_csv(r);
        out["markdown"] = ex::matrix_markdown(r);
        return out;
      },
      py::arg("scheme"), py::arg("source") = "kinematic", py::arg("seed") = 42, py::arg("n_rounds") = 300,
      py::arg("vehicles") = kDefaultVehicles);

  m.def(
      "learning_curve",
      [](const std::string& scheme, const std::string& vehicle, const std::vector<double>& fractions, int repeats,
         const std::string& source, std::uint64_t seed) {
        ex::ExperimentOptions o;
        o.seed = seed;
        const auto data = source_datasets(parse_source(source), seed, {vehicle});
        py::gil_scoped_release release;
        return ex::curve_csv(ex::learning_curve(data.front(), parse_scheme(scheme), fractions, repeats, o));
      },
      py::arg("scheme"), py::arg("vehicle") = "large",
      py::arg("fractions") = std::vector<double>{0.05, 0.1, 0.2, 0.4, 0.8, 1.0}, py::arg("repeats") = 5,
      py::arg("source") = "kinematic", py::arg("seed") = 42, "Learning curve as CSV text.");

  m.def(
      "comparative_study",
      [](const std::string& target, const std::string& output, const std::string& source, std::uint64_t seed) {
        ex::ExperimentOptions o;
        o.seed = seed;
        const auto data = source_datasets(parse_source(source), seed, kDefaultVehicles);
        ex::ComparativeReport r;
        {
          py::gil_scoped_release release;
          r = ex::comparative_study(data, target, ex::parse_output(output), o);
        }
        std::map<std::string, std::map<std::string, double>> table;
        for (const auto& e : r.entries) table[std::string(to_string(e.scheme))][e.training_source] = e.mae;
        return table;
      },
      py::arg("target") = "large", py::arg("output") = "Y", py::arg("source") = "kinematic", py::arg("seed") = 42,
      "{scheme: {training source: MAE}} for one output of the target vehicle.");

  m.attr("SCHEMES") = [] {
    std::vector<std::string> names;
    for (Scheme s : all_schemes()) names.emplace_back(to_string(s));
    return names;
  }();
}
