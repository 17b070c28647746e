#include "reponet/io.hpp"

#include <fstream>
#include <sstream>

namespace reponet {

namespace {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfig, "field '" + field + "': " + why);
}

const Json& field(const Json& j, const std::string& name) {
  if (!j.is_object()) bad_field(name, "enclosing value is not an object");
  const auto it = j.find(name);
  if (it == j.end()) bad_field(name, "missing");
  return *it;
}

double number(const Json& j, const std::string& name) {
  if (!j.is_number()) bad_field(name, "expected a number");
  return j.get<double>();
}

Matrix matrix_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) bad_field(name, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::kStructural, "'" + name + "' rows have unequal lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], name);
  }
  return m;
}

Vector vector_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) bad_field(name, "expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], name);
  return v;
}

int integer(const Json& j, const std::string& name) {
  if (!j.is_number_integer()) bad_field(name, "expected an integer");
  return j.get<int>();
}

}  // namespace

Json weights_to_json(const ClassifierWeights& weights) {
  return Json{{"kind", std::string(to_string(weights.kind))},
              {"K", weights.num_classes},
              {"d", weights.dim},
              {"phi", weights.phi},
              {"rows", matrix_to_json(weights.rows)}};
}

ClassifierWeights weights_from_json(const Json& j) {
  const Json& kind = field(j, "kind");
  if (!kind.is_string()) bad_field("kind", "expected a string");
  ClassifierWeights w;
  w.kind = parse_polytope_kind(kind.get<std::string>());
  w.num_classes = integer(field(j, "K"), "K");
  w.dim = integer(field(j, "d"), "d");
  w.phi = number(field(j, "phi"), "phi");
  w.rows = matrix_from_json(field(j, "rows"), "rows");
  if (w.rows.rows() != w.num_classes || (w.rows.rows() > 0 && w.rows.cols() != w.dim)) {
    std::ostringstream os;
    os << "declared K=" << w.num_classes << ", d=" << w.dim << " but rows are " << w.rows.rows()
       << "x" << w.rows.cols();
    throw Error(ErrorCode::kStructural, os.str());
  }
  return w;
}

Json report_to_json(const GeometryReport& report) {
  Json classes = Json::array();
  for (const ClassGeometry& c : report.per_class) {
    classes.push_back(Json{{"class", c.label},
                           {"present", c.present},
                           {"count", c.count},
                           {"mean_angle_to_weight", c.mean_angle_to_weight},
                           {"angle_std", c.angle_std},
                           {"mean_direction", vector_to_json(c.mean_direction)}});
  }
  return Json{{"phi", report.phi},
              {"accuracy", report.accuracy},
              {"min_pairwise_mean_angle", report.min_pairwise_mean_angle},
              {"pairwise_defined", report.pairwise_defined},
              {"degenerate", report.degenerate},
              {"per_class", std::move(classes)}};
}

Json model_to_json(const MlpModel& model, const Json& config) {
  Json layers = Json::array();
  for (const DenseLayer& layer : model.layers) {
    layers.push_back(Json{{"weight", matrix_to_json(layer.weight)},
                          {"bias", vector_to_json(layer.bias)},
                          {"slope", vector_to_json(layer.slope)}});
  }
  Json classifier;
  if (const auto* fixed = std::get_if<FixedHead>(&model.head)) {
    classifier = weights_to_json(fixed->weights);
    classifier["mode"] = "fixed";
  } else {
    const auto& h = std::get<TrainableHead>(model.head);
    classifier = Json{{"mode", "trainable"},
                      {"weights", matrix_to_json(h.weights)},
                      {"bias", vector_to_json(h.bias)},
                      {"use_bias", h.use_bias}};
  }
  return Json{{"format", "reponet-checkpoint"},
              {"version", 1},
              {"config", config},
              {"input_dim", model.input_dim},
              {"layers", std::move(layers)},
              {"classifier", std::move(classifier)}};
}

MlpModel model_from_json(const Json& j) {
  const Json& format = field(j, "format");
  if (format != "reponet-checkpoint") bad_field("format", "not a reponet checkpoint");
  if (integer(field(j, "version"), "version") != 1) bad_field("version", "unsupported version");

  MlpModel model;
  model.input_dim = integer(field(j, "input_dim"), "input_dim");
  Eigen::Index fan_in = model.input_dim;
  const Json& layers = field(j, "layers");
  if (!layers.is_array() || layers.empty()) bad_field("layers", "expected a non-empty array");
  for (const Json& l : layers) {
    DenseLayer layer{matrix_from_json(field(l, "weight"), "weight"),
                     vector_from_json(field(l, "bias"), "bias"),
                     vector_from_json(field(l, "slope"), "slope")};
    if (layer.weight.cols() != fan_in || layer.bias.size() != layer.weight.rows() ||
        layer.slope.size() != layer.weight.rows()) {
      throw Error(ErrorCode::kStructural, "checkpoint layer shapes do not chain");
    }
    fan_in = layer.weight.rows();
    model.layers.push_back(std::move(layer));
  }

  const Json& classifier = field(j, "classifier");
  const Json& mode = field(classifier, "mode");
  if (mode == "fixed") {
    model.head = FixedHead{weights_from_json(classifier)};
  } else if (mode == "trainable") {
    TrainableHead h{matrix_from_json(field(classifier, "weights"), "weights"),
                    vector_from_json(field(classifier, "bias"), "bias"), false};
    const Json& use_bias = field(classifier, "use_bias");
    if (!use_bias.is_boolean()) bad_field("use_bias", "expected a boolean");
    h.use_bias = use_bias.get<bool>();
    if (h.bias.size() != h.weights.rows()) {
      throw Error(ErrorCode::kStructural, "classifier bias length does not match its rows");
    }
    model.head = std::move(h);
  } else {
    bad_field("mode", "expected \"fixed\" or \"trainable\"");
  }
  if (model.classifier_rows().cols() != fan_in) {
    throw Error(ErrorCode::kStructural, "classifier dimension does not match the last layer");
  }
  return model;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into a line/column pair.
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream os;
    os << path.string() << ": line " << line << ", column " << column << ": " << e.what();
    throw Error(ErrorCode::kConfig, os.str());
  }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

}  // namespace reponet
