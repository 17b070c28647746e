#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "reponet/commands.hpp"
#include "reponet/data.hpp"
#include "reponet/io.hpp"
#include "reponet/losses.hpp"
#include "reponet/metrics.hpp"
#include "reponet/network.hpp"
#include "reponet/polytope.hpp"

namespace py = pybind11;
using namespace reponet;

namespace {

ClassifierWeights as_weights(const Matrix& rows, const std::string& kind, double phi) {
  ClassifierWeights w;
  w.kind = parse_polytope_kind(kind);
  w.num_classes = static_cast<int>(rows.rows());
  w.dim = static_cast<int>(rows.cols());
  w.rows = rows;
  w.phi = phi;
  return w;
}

py::tuple loss_tuple(const LossResult& r) { return py::make_tuple(r.value, r.grad); }

// Bindings return plain dicts; json lives on the C++ side only.
py::object to_python(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_reponet, m) {
  m.doc() = "Fixed polytope classifier heads, angular-margin losses and a small MLP trainer";

  static py::exception<Error> error(m, "ReponetError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<ClassifierWeights>(m, "ClassifierWeights")
      .def_property_readonly("kind", [](const ClassifierWeights& w) { return std::string(to_string(w.kind)); })
      .def_readonly("num_classes", &ClassifierWeights::num_classes)
      .def_readonly("dim", &ClassifierWeights::dim)
      .def_readonly("rows", &ClassifierWeights::rows)
      .def_readonly("phi", &ClassifierWeights::phi)
      .def("__repr__", [](const ClassifierWeights& w) {
        std::ostringstream os;
        os << "<ClassifierWeights " << to_string(w.kind) << " K=" << w.num_classes << " d=" << w.dim
           << " phi=" << w.phi << ">";
        return os.str();
      });

  m.def("make_polytope", [](const std::string& kind, int classes) {
    return make_polytope(parse_polytope_kind(kind), classes);
  }, py::arg("kind"), py::arg("classes"));
  m.def("embedding_dim", [](const std::string& kind, int classes) {
    return embedding_dim(parse_polytope_kind(kind), classes);
  }, py::arg("kind"), py::arg("classes"));
  m.def("expected_angle", [](const std::string& kind, int dim) {
    return expected_angle(parse_polytope_kind(kind), dim);
  }, py::arg("kind"), py::arg("dim"));
  m.def("verify_geometry", [](const ClassifierWeights& w, double tol) {
    const GeometryCheck c = verify_geometry(w, tol);
    py::dict d;
    d["passed"] = c.passed;
    d["worst_deviation"] = c.worst_deviation;
    d["min_angle"] = c.min_angle;
    d["message"] = c.message;
    return d;
  }, py::arg("weights"), py::arg("tol") = 1e-10);
  m.def("weights_from_rows", &as_weights, py::arg("rows"), py::arg("kind"), py::arg("phi"),
        "Wrap an arbitrary K x d matrix, e.g. to check a perturbed head.");

  m.attr("DEFAULT_KAPPA") = kDefaultKappa;
  m.def("plain_ce", [](const Matrix& z, const Labels& y) { return loss_tuple(plain_ce(z, y)); },
        py::arg("logits"), py::arg("labels"));
  m.def("fixed_softmax_loss", [](const ClassifierWeights& w, const Matrix& f, const Labels& y) {
    return loss_tuple(fixed_softmax_loss(w, f, y));
  }, py::arg("weights"), py::arg("features"), py::arg("labels"));
  m.def("norm_scaled_loss", [](const ClassifierWeights& w, const Matrix& f, const Labels& y, double kappa) {
    return loss_tuple(norm_scaled_loss(w, f, y, kappa));
  }, py::arg("weights"), py::arg("features"), py::arg("labels"), py::arg("kappa") = kDefaultKappa);
  m.def("margin_loss", [](const ClassifierWeights& w, const Matrix& f, const Labels& y, double kappa,
                          double margin, const std::string& tail) {
    return loss_tuple(margin_loss(w, f, y, kappa, margin, parse_margin_tail(tail)));
  }, py::arg("weights"), py::arg("features"), py::arg("labels"), py::arg("kappa") = kDefaultKappa,
        py::arg("margin"), py::arg("tail") = "linear");

  m.def("make_blobs", [](int classes, int dim, int per_class, double spread, double separation,
                         std::uint64_t seed) {
    const LabeledBatch b = make_blobs(classes, dim, per_class, spread, separation, seed);
    return py::make_tuple(b.inputs, b.labels);
  }, py::arg("classes"), py::arg("dim"), py::arg("per_class"), py::arg("spread") = 1.0,
        py::arg("separation") = 6.0, py::arg("seed") = 0);
  m.def("load_idx", [](const std::filesystem::path& images, const std::filesystem::path& labels,
                       bool transpose, std::size_t limit) {
    const LabeledBatch b = load_idx(images, labels, IdxOptions{transpose, limit});
    return py::make_tuple(b.inputs, b.labels);
  }, py::arg("images"), py::arg("labels"), py::arg("transpose") = false, py::arg("limit") = 0);

  m.def("geometry_report", [](const ClassifierWeights& w, const Matrix& f, const Labels& y,
                              const Labels& predictions) {
    return to_python(report_to_json(geometry_report(w, f, y, predictions)));
  }, py::arg("weights"), py::arg("features"), py::arg("labels"), py::arg("predictions"));

  // Checkpoint helpers: features and predictions of a trained model.
  m.def("checkpoint_features", [](const std::filesystem::path& checkpoint, const Matrix& x) {
    const MlpModel model = model_from_json(read_json_file(checkpoint));
    const ForwardResult out = forward(model, x);
    return py::make_tuple(out.features, predict(model, x));
  }, py::arg("checkpoint"), py::arg("inputs"));

  // CLI subcommands; each returns the process exit code and the log text.
  m.def("gen_weights", [](const std::string& kind, int classes, const std::filesystem::path& out) {
    std::ostringstream log;
    const int code = cmd_gen_weights(kind, classes, out, log);
    return py::make_tuple(code, log.str());
  }, py::arg("kind"), py::arg("classes"), py::arg("out"));
  m.def("check", [](const std::filesystem::path& weights, double tol) {
    std::ostringstream log;
    const int code = cmd_check(weights, tol, log);
    return py::make_tuple(code, log.str());
  }, py::arg("weights"), py::arg("tol") = 1e-10);
  m.def("train", [](const std::filesystem::path& config, std::optional<std::uint64_t> seed) {
    std::ostringstream log;
    int code;
    {
      py::gil_scoped_release release;
      code = cmd_train(config, log, seed);
    }
    return py::make_tuple(code, log.str());
  }, py::arg("config"), py::arg("seed") = py::none());
}
