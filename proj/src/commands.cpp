#include "reponet/commands.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "reponet/metrics.hpp"

namespace reponet {

namespace fs = std::filesystem;

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::kIo:
    case ErrorCode::kBadMagic:
    case ErrorCode::kTruncated:
    case ErrorCode::kCountMismatch:
      return kExitIo;
    case ErrorCode::kStructural:
      return kExitVerificationFailed;
    default:
      return kExitUsage;
  }
}

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& why) {
  throw Error(ErrorCode::kConfig, "config " + where + ": " + why);
}

void require_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) config_error(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) config_error(where, "unknown key '" + key + "'");
  }
}

const Json* optional_key(const Json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const Json& required_key(const Json& j, const std::string& where, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) config_error(where, std::string("missing key '") + key + "'");
  return *it;
}

// Parsed text yields unsigned, but programmatic Json holds signed integers.
bool non_negative_int(const Json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

int positive_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    config_error(where, "expected a positive integer");
  }
  return v.get<int>();
}

double real(const Json& v, const std::string& where) {
  if (!v.is_number()) config_error(where, "expected a number");
  return v.get<double>();
}

std::string text(const Json& v, const std::string& where) {
  if (!v.is_string()) config_error(where, "expected a string");
  return v.get<std::string>();
}

DatasetSpec parse_dataset(const Json& j) {
  const std::string type = text(required_key(j, "dataset", "type"), "dataset.type");
  if (type == "blobs") {
    require_keys(j, "dataset", {"type", "dim", "per_class", "spread", "separation"});
    BlobSpec b;
    if (auto* v = optional_key(j, "dim")) b.dim = positive_int(*v, "dataset.dim");
    if (auto* v = optional_key(j, "per_class")) b.per_class = positive_int(*v, "dataset.per_class");
    if (auto* v = optional_key(j, "spread")) b.spread = real(*v, "dataset.spread");
    if (auto* v = optional_key(j, "separation")) b.separation = real(*v, "dataset.separation");
    return b;
  }
  if (type == "idx") {
    require_keys(j, "dataset", {"type", "images", "labels", "transpose", "limit"});
    IdxSpec s;
    s.images = text(required_key(j, "dataset", "images"), "dataset.images");
    s.labels = text(required_key(j, "dataset", "labels"), "dataset.labels");
    if (auto* v = optional_key(j, "transpose")) {
      if (!v->is_boolean()) config_error("dataset.transpose", "expected a boolean");
      s.transpose = v->get<bool>();
    }
    if (auto* v = optional_key(j, "limit")) {
      if (!non_negative_int(*v)) config_error("dataset.limit", "expected a non-negative integer");
      s.limit = v->get<std::size_t>();
    }
    return s;
  }
  config_error("dataset.type", "expected \"blobs\" or \"idx\", got \"" + type + "\"");
}

Json dataset_to_json(const DatasetSpec& spec) {
  if (const auto* b = std::get_if<BlobSpec>(&spec)) {
    return Json{{"type", "blobs"},
                {"dim", b->dim},
                {"per_class", b->per_class},
                {"spread", b->spread},
                {"separation", b->separation}};
  }
  const auto& s = std::get<IdxSpec>(spec);
  return Json{{"type", "idx"},
              {"images", s.images.generic_string()},
              {"labels", s.labels.generic_string()},
              {"transpose", s.transpose},
              {"limit", s.limit}};
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

void write_epoch_log(const std::vector<EpochLog>& log, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  os << "epoch,mean_loss,train_accuracy\n";
  for (const EpochLog& e : log) {
    os << fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.mean_loss, e.train_accuracy);
  }
  if (!os) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

void print_report(const GeometryReport& r, std::ostream& log) {
  fmt::print(log, "accuracy: {:.4f}\n", r.accuracy);
  fmt::print(log, "phi: {:.6f} rad ({:.3f} deg)\n", r.phi, r.phi * 180.0 / std::numbers::pi);
  double worst = 0.0;
  for (const ClassGeometry& c : r.per_class) {
    if (c.count > 0) worst = std::max(worst, c.mean_angle_to_weight);
  }
  fmt::print(log, "max per-class mean angle to weight: {:.6f} rad\n", worst);
  if (r.pairwise_defined) {
    fmt::print(log, "min pairwise mean-direction angle: {:.6f} rad\n", r.min_pairwise_mean_angle);
  } else {
    fmt::print(log, "min pairwise mean-direction angle: undefined (fewer than 2 classes)\n");
  }
}

// Polytope phi for the head: the stored value for a fixed head, otherwise the
// closed form for the configured polytope.
double head_phi(const MlpModel& model, const RunConfig& config) {
  if (const auto* fixed = std::get_if<FixedHead>(&model.head)) return fixed->weights.phi;
  return expected_angle(config.kind, config.embed_dim());
}

}  // namespace

std::vector<int> RunConfig::layer_widths() const {
  std::vector<int> widths = hidden_widths;
  widths.push_back(embed_dim());
  return widths;
}

TrainConfig RunConfig::train_config() const {
  return TrainConfig{loss, epochs, batch_size, lr, derive_seed(seed, 3)};
}

RunConfig parse_run_config(const Json& j, const fs::path& base_dir) {
  require_keys(j, "top level", {"seed", "epochs", "batch_size", "lr", "hidden_widths",
                                "classifier", "loss", "dataset", "output_dir"});
  RunConfig c;
  if (auto* v = optional_key(j, "seed")) {
    if (!non_negative_int(*v)) config_error("seed", "expected a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  if (auto* v = optional_key(j, "epochs")) c.epochs = positive_int(*v, "epochs");
  if (auto* v = optional_key(j, "batch_size")) c.batch_size = positive_int(*v, "batch_size");
  if (auto* v = optional_key(j, "lr")) {
    c.lr = real(*v, "lr");
    if (!(c.lr >= 0.0)) config_error("lr", "must be non-negative");
  }
  if (auto* v = optional_key(j, "hidden_widths")) {
    if (!v->is_array()) config_error("hidden_widths", "expected an array");
    for (const Json& w : *v) c.hidden_widths.push_back(positive_int(w, "hidden_widths"));
  }
  if (auto* v = optional_key(j, "output_dir")) c.output_dir = text(*v, "output_dir");

  const Json& head = required_key(j, "top level", "classifier");
  require_keys(head, "classifier", {"kind", "classes", "trainable", "d"});
  c.kind = parse_polytope_kind(text(required_key(head, "classifier", "kind"), "classifier.kind"));
  c.classes = positive_int(required_key(head, "classifier", "classes"), "classifier.classes");
  if (c.classes < 2) {
    throw Error(ErrorCode::kInvalidClassCount, "config classifier.classes must be at least 2");
  }
  if (auto* v = optional_key(head, "trainable")) {
    if (!v->is_boolean()) config_error("classifier.trainable", "expected a boolean");
    c.trainable = v->get<bool>();
  }
  if (auto* v = optional_key(head, "d")) {
    if (positive_int(*v, "classifier.d") != c.embed_dim()) {
      config_error("classifier.d", "does not match the polytope dimension " +
                                       std::to_string(c.embed_dim()));
    }
  }

  const Json& loss = required_key(j, "top level", "loss");
  require_keys(loss, "loss", {"type", "kappa", "margin", "margin_rule", "tail"});
  c.loss.type = parse_loss_type(text(required_key(loss, "loss", "type"), "loss.type"));
  c.loss.kappa = kDefaultKappa;
  c.loss.margin = 0.0;
  if (auto* v = optional_key(loss, "kappa")) c.loss.kappa = real(*v, "loss.kappa");
  const Json* margin = optional_key(loss, "margin");
  const Json* rule = optional_key(loss, "margin_rule");
  const Json* tail = optional_key(loss, "tail");
  if ((margin || rule || tail) && c.loss.type != LossType::kAngularMargin) {
    config_error("loss.margin", "only the margin loss takes a margin");
  }
  c.loss.tail = MarginTail::kLinear;
  if (tail) c.loss.tail = parse_margin_tail(text(*tail, "loss.tail"));
  if (c.loss.type == LossType::kAngularMargin) {
    const double phi = expected_angle(c.kind, c.embed_dim());
    if (rule) {
      const std::string r = text(*rule, "loss.margin_rule");
      if (r != "max" && r != "explicit") config_error("loss.margin_rule", "expected max or explicit");
      c.margin_was_max = r == "max";
    }
    if (margin == nullptr || (margin->is_string() && margin->get<std::string>() == "max")) {
      c.margin_was_max = true;
    } else if (!c.margin_was_max) {
      c.loss.margin = real(*margin, "loss.margin");
    }
    if (c.margin_was_max) c.loss.margin = phi;
  }
  c.loss.validate();

  c.dataset = parse_dataset(required_key(j, "top level", "dataset"));
  c.base_dir = base_dir;
  return c;
}

DatasetSpec RunConfig::resolved_dataset() const {
  DatasetSpec spec = dataset;
  if (auto* s = std::get_if<IdxSpec>(&spec)) {
    s->images = resolve(s->images, base_dir);
    s->labels = resolve(s->labels, base_dir);
  }
  return spec;
}

fs::path RunConfig::resolved_output_dir() const { return resolve(output_dir, base_dir); }

Json run_config_to_json(const RunConfig& c) {
  Json loss{{"type", std::string(to_string(c.loss.type))}};
  if (c.loss.normalizes_features()) loss["kappa"] = c.loss.kappa;
  if (c.loss.type == LossType::kAngularMargin) {
    loss["margin"] = c.loss.margin;
    loss["margin_rule"] = c.margin_was_max ? "max" : "explicit";
    loss["tail"] = std::string(to_string(c.loss.tail));
  }
  return Json{{"seed", c.seed},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"hidden_widths", c.hidden_widths},
              {"classifier",
               {{"kind", std::string(to_string(c.kind))},
                {"classes", c.classes},
                {"d", c.embed_dim()},
                {"trainable", c.trainable}}},
              {"loss", std::move(loss)},
              {"dataset", dataset_to_json(c.dataset)}};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

LabeledBatch load_dataset(const DatasetSpec& spec, int classes, std::uint64_t seed) {
  if (const auto* b = std::get_if<BlobSpec>(&spec)) {
    return make_blobs(classes, b->dim, b->per_class, b->spread, b->separation, seed);
  }
  const auto& s = std::get<IdxSpec>(spec);
  return load_idx(s.images, s.labels, IdxOptions{s.transpose, s.limit});
}

MlpModel build_model(const RunConfig& config, int input_dim) {
  const std::uint64_t seed = derive_seed(config.seed, 2);
  if (config.trainable) {
    return init_model(input_dim, config.layer_widths(),
                      TrainableHeadSpec{config.classes, config.embed_dim(),
                                        config.loss.type == LossType::kPlainCE},
                      seed);
  }
  return init_model(input_dim, config.layer_widths(), make_polytope(config.kind, config.classes),
                    seed);
}

GeometryReport model_geometry(const MlpModel& model, double phi, const Matrix& features,
                              const Labels& labels) {
  const Labels predictions = predict_from_features(model, features);
  Matrix rows = model.classifier_rows();
  if (!model.fixed_head()) rows.rowwise().normalize();
  return geometry_report(rows, phi, features, labels, predictions);
}

int cmd_gen_weights(const std::string& kind, int classes, const fs::path& out, std::ostream& log) {
  const ClassifierWeights w = make_polytope(parse_polytope_kind(kind), classes);
  write_json_file(weights_to_json(w), out);
  fmt::print(log, "kind: {}\nK: {}\nd={}\nphi={:.17g} rad ({:.6f} deg)\nwrote {}\n",
             to_string(w.kind), w.num_classes, w.dim, w.phi, w.phi * 180.0 / std::numbers::pi,
             out.string());
  return kExitOk;
}

int cmd_check(const fs::path& weights, double tol, std::ostream& log) {
  if (!(tol >= 0.0)) throw Error(ErrorCode::kConfig, "tolerance must be non-negative");
  const ClassifierWeights w = weights_from_json(read_json_file(weights));
  const GeometryCheck check = verify_geometry(w, tol);
  fmt::print(log, "{} K={} d={} phi={:.17g}\nmin pairwise angle: {:.17g}\nworst deviation: {:.3e}\n",
             to_string(w.kind), w.num_classes, w.dim, w.phi, check.min_angle,
             check.worst_deviation);
  if (!check.passed) {
    fmt::print(log, "FAIL: {}\n", check.message);
    return kExitVerificationFailed;
  }
  fmt::print(log, "PASS (tol {:.1e})\n", tol);
  return kExitOk;
}

int cmd_train(const fs::path& config_path, std::ostream& log,
              std::optional<std::uint64_t> seed_override) {
  RunConfig config = parse_run_config(read_json_file(config_path), config_path.parent_path());
  if (seed_override) config.seed = *seed_override;

  const LabeledBatch data =
      load_dataset(config.resolved_dataset(), config.classes, derive_seed(config.seed, 1));
  const fs::path out_dir = config.resolved_output_dir();
  MlpModel model = build_model(config, data.input_dim());
  const Json snapshot = run_config_to_json(config);

  fmt::print(log, "training {} {} head, K={}, d={}, loss={}", config.trainable ? "trainable" : "fixed",
             to_string(config.kind), config.classes, config.embed_dim(), to_string(config.loss.type));
  if (config.loss.type == LossType::kAngularMargin) {
    fmt::print(log, " (kappa={}, m={:.6f}{})", config.loss.kappa, config.loss.margin,
               config.margin_was_max ? " = phi" : "");
  }
  fmt::print(log, ", N={}\n", data.size());

  TrainResult result = train(std::move(model), data, config.train_config(), [&](const EpochLog& e) {
    fmt::print(log, "epoch {:3d}  loss {:.6f}  train acc {:.4f}\n", e.epoch, e.mean_loss,
               e.train_accuracy);
  });

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + out_dir.string() + "': " + ec.message());
  const Matrix features = forward(result.model, data.inputs).features;
  const GeometryReport report =
      model_geometry(result.model, head_phi(result.model, config), features, data.labels);

  write_json_file(snapshot, out_dir / "config.json");
  write_json_file(model_to_json(result.model, snapshot), out_dir / "checkpoint.json");
  write_epoch_log(result.log, out_dir / "epochs.csv");
  write_json_file(report_to_json(report), out_dir / "geometry.json");
  export_scatter(features, data.labels, false, out_dir / "features.csv");
  export_scatter(features, data.labels, true, out_dir / "features_normalized.csv");

  print_report(report, log);
  fmt::print(log, "artifacts written to {}\n", out_dir.string());
  return kExitOk;
}

int cmd_eval(const EvalRequest& request, std::ostream& log) {
  const Json checkpoint = read_json_file(request.checkpoint);
  const MlpModel model = model_from_json(checkpoint);
  const RunConfig config = parse_run_config(checkpoint.at("config"));

  const std::uint64_t data_seed = derive_seed(request.seed.value_or(config.seed), 1);
  LabeledBatch data;
  if (request.dataset) {
    data = load_dataset(*request.dataset, config.classes, data_seed);
  } else if (std::holds_alternative<BlobSpec>(config.dataset)) {
    data = load_dataset(config.dataset, config.classes, data_seed);
  } else {
    throw Error(ErrorCode::kConfig,
                "checkpoint was trained on IDX files; pass --images and --labels");
  }

  const Matrix features = forward(model, data.inputs).features;
  const GeometryReport report = model_geometry(model, head_phi(model, config), features, data.labels);
  const fs::path out = request.report.empty()
                           ? request.checkpoint.parent_path() / "eval_geometry.json"
                           : request.report;
  write_json_file(report_to_json(report), out);
  fmt::print(log, "evaluated {} samples\n", data.size());
  print_report(report, log);
  fmt::print(log, "report written to {}\n", out.string());
  return kExitOk;
}

}  // namespace reponet
