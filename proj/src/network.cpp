#include "reponet/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "reponet/data.hpp"

namespace reponet {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void he_normal(Matrix& m, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
}

// Row normalization for the trainable head. Returns the unit rows and fills norms.
Matrix unit_rows(const Matrix& rows, Vector& norms) {
  norms = rows.rowwise().norm();
  Matrix unit = rows;
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    if (!(norms(j) > kNormFloor)) {
      throw Error(ErrorCode::kDegenerateFeature,
                  "trainable classifier row " + std::to_string(j) + " has zero norm");
    }
    unit.row(j) /= norms(j);
  }
  return unit;
}

}  // namespace

int MlpModel::embed_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

int MlpModel::num_classes() const { return static_cast<int>(classifier_rows().rows()); }

const Matrix& MlpModel::classifier_rows() const {
  return std::visit(Overloaded{[](const FixedHead& h) -> const Matrix& { return h.weights.rows; },
                               [](const TrainableHead& h) -> const Matrix& { return h.weights; }},
                    head);
}

MlpModel init_model(int input_dim, const std::vector<int>& widths, const HeadSpec& head,
                    std::uint64_t seed) {
  if (input_dim < 1) throw Error(ErrorCode::kDimension, "input dimension must be at least 1");
  if (widths.empty()) throw Error(ErrorCode::kDimension, "at least one layer width is required");
  for (const int w : widths) {
    if (w < 1) throw Error(ErrorCode::kDimension, "layer widths must be at least 1");
  }
  const int head_dim = std::visit(
      Overloaded{[](const ClassifierWeights& w) { return w.dim; },
                 [](const TrainableHeadSpec& s) { return s.dim; }},
      head);
  if (widths.back() != head_dim) {
    std::ostringstream os;
    os << "last layer width " << widths.back() << " does not match classifier dimension "
       << head_dim;
    throw Error(ErrorCode::kDimension, os.str());
  }

  std::mt19937_64 rng(seed);
  MlpModel model;
  model.input_dim = input_dim;
  int fan_in = input_dim;
  for (const int width : widths) {
    DenseLayer layer{Matrix(width, fan_in), Vector::Zero(width),
                     Vector::Constant(width, kPreluInitSlope)};
    he_normal(layer.weight, fan_in, rng);
    model.layers.push_back(std::move(layer));
    fan_in = width;
  }

  std::visit(Overloaded{[&](const ClassifierWeights& w) { model.head = FixedHead{w}; },
                        [&](const TrainableHeadSpec& s) {
                          if (s.num_classes < 2) {
                            throw Error(ErrorCode::kInvalidClassCount,
                                        "trainable head needs at least 2 classes");
                          }
                          TrainableHead h{Matrix(s.num_classes, s.dim),
                                          Vector::Zero(s.num_classes), s.use_bias};
                          he_normal(h.weights, s.dim, rng);
                          model.head = std::move(h);
                        }},
             head);
  return model;
}

ForwardResult forward(const MlpModel& model, const Matrix& batch) {
  if (batch.cols() != model.input_dim) {
    throw Error(ErrorCode::kDimension, "batch is " + shape(batch) + " but the model expects " +
                                           std::to_string(model.input_dim) + " inputs");
  }
  ForwardResult out;
  out.cache.model_version = model.version;
  out.cache.num_layers = model.layers.size();
  out.cache.inputs.reserve(model.layers.size());
  out.cache.pre_activations.reserve(model.layers.size());

  Matrix x = batch;
  for (const DenseLayer& layer : model.layers) {
    Matrix pre = x * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    Matrix act = pre;
    for (Eigen::Index r = 0; r < act.rows(); ++r) {
      for (Eigen::Index c = 0; c < act.cols(); ++c) {
        if (!(pre(r, c) > 0.0)) act(r, c) = layer.slope(c) * pre(r, c);
      }
    }
    out.cache.inputs.push_back(std::move(x));
    out.cache.pre_activations.push_back(std::move(pre));
    x = std::move(act);
  }
  out.features = std::move(x);

  if (const auto* h = std::get_if<TrainableHead>(&model.head); h && h->use_bias) {
    out.logits = logits(h->weights, out.features, h->bias);
  } else {
    out.logits = logits(model.classifier_rows(), out.features);
  }
  return out;
}

ModelGradients backward(const MlpModel& model, const ForwardCache& cache,
                        const Matrix& grad_features) {
  if (cache.model_version != model.version || cache.num_layers != model.layers.size() ||
      cache.inputs.size() != model.layers.size() ||
      cache.pre_activations.size() != model.layers.size()) {
    throw Error(ErrorCode::kCache, "forward cache does not belong to the current model state");
  }
  if (grad_features.cols() != model.embed_dim() ||
      grad_features.rows() != cache.pre_activations.back().rows()) {
    throw Error(ErrorCode::kDimension, "feature gradient is " + shape(grad_features) +
                                           ", expected " + shape(cache.pre_activations.back()));
  }

  ModelGradients grads;
  grads.layers.resize(model.layers.size());
  Matrix grad = grad_features;  // d loss / d activation of the current layer
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const DenseLayer& layer = model.layers[l];
    const Matrix& pre = cache.pre_activations[l];
    if (pre.cols() != layer.weight.rows() || cache.inputs[l].cols() != layer.weight.cols()) {
      throw Error(ErrorCode::kCache, "forward cache shapes do not match layer " +
                                         std::to_string(l));
    }
    DenseLayer& g = grads.layers[l];
    g.slope = Vector::Zero(layer.slope.size());
    for (Eigen::Index r = 0; r < grad.rows(); ++r) {
      for (Eigen::Index c = 0; c < grad.cols(); ++c) {
        if (!(pre(r, c) > 0.0)) {
          g.slope(c) += grad(r, c) * pre(r, c);
          grad(r, c) *= layer.slope(c);
        }
      }
    }
    g.weight = grad.transpose() * cache.inputs[l];
    g.bias = grad.colwise().sum().transpose();
    if (l > 0) grad = grad * layer.weight;
  }
  return grads;
}

LossResult head_loss(const MlpModel& model, const LossKind& loss, const Matrix& features,
                     const Labels& labels, Matrix* grad_head_weights, Vector* grad_head_bias) {
  if (const auto* fixed = std::get_if<FixedHead>(&model.head)) {
    return compute_loss(loss, fixed->weights.rows, features, labels);
  }
  const auto& head = std::get<TrainableHead>(model.head);
  if (loss.type == LossType::kPlainCE) {
    LossResult out = compute_loss(loss, head.weights, features, labels,
                                  head.use_bias ? std::optional<Vector>(head.bias) : std::nullopt);
    if (grad_head_weights) *grad_head_weights = out.grad_weights;
    if (grad_head_bias) {
      *grad_head_bias = head.use_bias ? out.grad_bias : Vector::Zero(head.bias.size());
    }
    return out;
  }

  // Normalized losses see unit rows; chain d/d unit back to the raw rows.
  Vector norms;
  const Matrix unit = unit_rows(head.weights, norms);
  LossResult out = compute_loss(loss, unit, features, labels);
  if (grad_head_weights) {
    Matrix g(unit.rows(), unit.cols());
    for (Eigen::Index j = 0; j < unit.rows(); ++j) {
      const double radial = out.grad_weights.row(j).dot(unit.row(j));
      g.row(j) = (out.grad_weights.row(j) - radial * unit.row(j)) / norms(j);
    }
    *grad_head_weights = std::move(g);
  }
  if (grad_head_bias) *grad_head_bias = Vector::Zero(head.bias.size());
  return out;
}

StepResult compute_gradients(const MlpModel& model, const LossKind& loss, const Matrix& batch,
                             const Labels& labels) {
  ForwardResult fwd = forward(model, batch);
  StepResult step;
  if (model.fixed_head()) {
    step.loss = head_loss(model, loss, fwd.features, labels);
  } else {
    step.loss = head_loss(model, loss, fwd.features, labels, &step.grads.head_weights,
                          &step.grads.head_bias);
  }
  ModelGradients body = backward(model, fwd.cache, step.loss.grad);
  step.grads.layers = std::move(body.layers);
  step.features = std::move(fwd.features);
  return step;
}

AdamState init_adam(const MlpModel& model, double lr) {
  AdamState state;
  state.lr = lr;
  for (const DenseLayer& layer : model.layers) {
    DenseLayer zero{Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                    Vector::Zero(layer.bias.size()), Vector::Zero(layer.slope.size())};
    state.first.layers.push_back(zero);
    state.second.layers.push_back(std::move(zero));
  }
  if (const auto* h = std::get_if<TrainableHead>(&model.head)) {
    state.first.head_weights = state.second.head_weights =
        Matrix::Zero(h->weights.rows(), h->weights.cols());
    state.first.head_bias = state.second.head_bias = Vector::Zero(h->bias.size());
  }
  return state;
}

namespace {

struct AdamCoefficients {
  double beta1, beta2, eps, step;  // step = lr / (1 - beta1^t)
  double correction2;              // 1 - beta2^t
};

template <class Param>
void adam_update(Param& p, const Param& g, Param& m, Param& v, const AdamCoefficients& k) {
  if (p.rows() != g.rows() || p.cols() != g.cols() || m.rows() != p.rows() ||
      m.cols() != p.cols() || v.rows() != p.rows() || v.cols() != p.cols()) {
    throw Error(ErrorCode::kDimension, "gradient or moment shape does not match its parameter");
  }
  m = k.beta1 * m + (1.0 - k.beta1) * g;
  v = k.beta2 * v + (1.0 - k.beta2) * g.cwiseProduct(g);
  p.array() -= k.step * m.array() / ((v.array() / k.correction2).sqrt() + k.eps);
}

}  // namespace

void adam_step(MlpModel& model, const ModelGradients& grads, AdamState& state) {
  const std::size_t n = model.layers.size();
  if (grads.layers.size() != n || state.first.layers.size() != n ||
      state.second.layers.size() != n) {
    throw Error(ErrorCode::kDimension, "gradient layer count does not match the model");
  }
  auto* trainable = std::get_if<TrainableHead>(&model.head);
  if (trainable && (grads.head_weights.size() == 0 || state.first.head_weights.size() == 0)) {
    throw Error(ErrorCode::kDimension, "missing gradient for the trainable classifier");
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const AdamCoefficients k{state.beta1, state.beta2, state.eps,
                           state.lr / (1.0 - std::pow(state.beta1, t)),
                           1.0 - std::pow(state.beta2, t)};
  for (std::size_t l = 0; l < n; ++l) {
    DenseLayer& p = model.layers[l];
    const DenseLayer& g = grads.layers[l];
    DenseLayer& m = state.first.layers[l];
    DenseLayer& v = state.second.layers[l];
    adam_update(p.weight, g.weight, m.weight, v.weight, k);
    adam_update(p.bias, g.bias, m.bias, v.bias, k);
    adam_update(p.slope, g.slope, m.slope, v.slope, k);
  }
  if (trainable) {
    adam_update(trainable->weights, grads.head_weights, state.first.head_weights,
                state.second.head_weights, k);
    if (trainable->use_bias) {
      adam_update(trainable->bias, grads.head_bias, state.first.head_bias,
                  state.second.head_bias, k);
    }
  }
  model.version += 1;
}

Labels predict_from_features(const MlpModel& model, const Matrix& features) {
  if (features.cols() != model.embed_dim()) {
    throw Error(ErrorCode::kDimension, "features are " + shape(features) +
                                           " but the classifier dimension is " +
                                           std::to_string(model.embed_dim()));
  }
  Matrix scores;
  if (const auto* h = std::get_if<TrainableHead>(&model.head)) {
    if (h->use_bias) {
      scores = logits(h->weights, features, h->bias);
    } else {
      Vector norms;
      scores = features * unit_rows(h->weights, norms).transpose();
    }
  } else {
    // Fixed rows are unit-norm; |f| is common to a row, so f.w orders cosines.
    scores = features * model.classifier_rows().transpose();
  }
  Labels out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

Labels predict(const MlpModel& model, const Matrix& batch) {
  return predict_from_features(model, forward(model, batch).features);
}

TrainResult train(MlpModel model, const LabeledBatch& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  if (data.inputs.rows() != static_cast<Eigen::Index>(data.size())) {
    throw Error(ErrorCode::kDimension, "inputs and labels are not index-aligned");
  }
  if (data.input_dim() != model.input_dim) {
    throw Error(ErrorCode::kDimension, "dataset has " + std::to_string(data.input_dim()) +
                                           " inputs but the model expects " +
                                           std::to_string(model.input_dim));
  }
  const int k = model.num_classes();
  for (const int y : data.labels) {
    if (y < 0 || y >= k) {
      throw Error(ErrorCode::kLabel, "label " + std::to_string(y) + " does not fit a " +
                                         std::to_string(k) + "-class head");
    }
  }
  if (config.epochs < 1) throw Error(ErrorCode::kConfig, "epochs must be at least 1");
  if (config.batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be at least 1");
  if (!(config.lr >= 0.0)) throw Error(ErrorCode::kConfig, "learning rate must be non-negative");
  config.loss.validate();

  AdamState adam = init_adam(model, config.lr);
  TrainResult result;
  const double n = static_cast<double>(data.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& idx : batch_indices(data.size(), static_cast<std::size_t>(config.batch_size),
                                         config.seed, static_cast<std::uint64_t>(epoch))) {
      const LabeledBatch batch = gather(data, idx);
      StepResult step = compute_gradients(model, config.loss, batch.inputs, batch.labels);
      for (const double l : step.loss.per_sample) loss_sum += l;
      const Labels predicted = predict_from_features(model, step.features);
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        correct += predicted[i] == batch.labels[i] ? 1 : 0;
      }
      adam_step(model, step.grads, adam);
    }
    EpochLog entry{epoch + 1, loss_sum / n, static_cast<double>(correct) / n};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace reponet
