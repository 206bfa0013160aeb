#include <sstream>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stfem/bench.hpp"

namespace py = pybind11;
using namespace stfem;

namespace {

StudyConfig config_from_text(const std::string& text) {
  std::istringstream is(text);
  return study_config_from(ConfigFile::parse(is, "<string>"));
}

py::dict level_dict(const LevelRecord& l) {
  py::dict d;
  d["level"] = l.level;
  d["N_h"] = l.num_dofs;
  d["elements"] = l.num_elements;
  d["error_h"] = l.error_h;
  d["triple_norm_error"] = l.triple_error;
  d["majorant"] = l.majorant;
  d["eff_index"] = l.eff_index;
  d["iterations"] = l.iterations;
  d["wall_time"] = l.wall_time;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "space-time finite elements with functional error majorants";

  py::register_exception<Error>(m, "StfemError", PyExc_RuntimeError);

  py::class_<StudyReport>(m, "StudyReport")
      .def_property_readonly("levels",
                             [](const StudyReport& r) {
                               py::list out;
                               for (const LevelRecord& l : r.record.levels) out.append(level_dict(l));
                               return out;
                             })
      .def_property_readonly("problem", [](const StudyReport& r) { return r.record.problem; })
      .def_property_readonly("failure", [](const StudyReport& r) { return r.record.failure; })
      .def_property_readonly("stop_reason", [](const StudyReport& r) { return r.record.stop_reason; })
      .def_readonly("rate", &StudyReport::rate)
      .def_readonly("rate_triple", &StudyReport::rate_triple)
      .def_readonly("eff_min", &StudyReport::eff_min)
      .def_readonly("eff_max", &StudyReport::eff_max)
      .def("csv", [](const StudyReport& r) {
        std::ostringstream os;
        write_study_csv(os, r.record);
        return os.str();
      });

  m.def(
      "run_study",
      [](const std::string& text, const std::function<void(py::dict)>& on_level) {
        const StudyConfig cfg = config_from_text(text);
        LevelCallback cb;
        if (on_level) cb = [&](const LevelView& v) { on_level(level_dict(v.record)); };
        return run_study(cfg, cb);
      },
      py::arg("config"), py::arg("on_level") = nullptr,
      "Runs the study described by config text (key = value lines).");
  m.def(
      "run_study_file",
      [](const std::string& path) { return run_study(load_study_config(path)); },
      py::arg("path"));

  m.def(
      "doerfler_mark",
      [](const std::vector<double>& eta2, double sigma) { return doerfler_mark(eta2, sigma); },
      py::arg("eta2"), py::arg("sigma"));
  m.def(
      "directive_axes",
      [](const std::vector<double>& e, double chi) {
        if (e.empty() || e.size() > kMaxDim) throw py::value_error("need 1 to 3 components");
        Point p{};
        std::copy(e.begin(), e.end(), p.begin());
        return directive_axes(p, static_cast<int>(e.size()), chi);
      },
      py::arg("e_k"), py::arg("chi"));
  m.def(
      "tensor_mesh_error",
      [](const std::string& problem, const std::vector<int>& cells, int degree) {
        StudyConfig c;
        c.problem = problem;
        c.spatial_dim = static_cast<int>(cells.size()) - 1;
        const TensorMeshError e = tensor_mesh_error(c.make_problem(), cells, degree);
        return py::make_tuple(e.h, e.h_star);
      },
      py::arg("problem"), py::arg("cells"), py::arg("degree") = 1,
      "(||u - u_h||_h, ||u - u_h||_h*) on a uniform tensor mesh.");
}
