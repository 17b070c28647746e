#include "reponet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace reponet {

std::string_view to_string(LossType type) {
  switch (type) {
    case LossType::kPlainCE: return "plain_ce";
    case LossType::kFixedSoftmax: return "fixed_softmax";
    case LossType::kNormScaled: return "norm_scaled";
    case LossType::kAngularMargin: return "margin";
  }
  return "unknown";
}

LossType parse_loss_type(std::string_view name) {
  if (name == "plain_ce") return LossType::kPlainCE;
  if (name == "fixed_softmax") return LossType::kFixedSoftmax;
  if (name == "norm_scaled") return LossType::kNormScaled;
  if (name == "margin") return LossType::kAngularMargin;
  throw Error(ErrorCode::kConfig, "unknown loss type '" + std::string(name) +
                                      "' (expected plain_ce, fixed_softmax, norm_scaled or margin)");
}

std::string_view to_string(MarginTail tail) {
  return tail == MarginTail::kClamp ? "clamp" : "linear";
}

MarginTail parse_margin_tail(std::string_view name) {
  if (name == "linear") return MarginTail::kLinear;
  if (name == "clamp") return MarginTail::kClamp;
  throw Error(ErrorCode::kConfig,
              "unknown margin tail '" + std::string(name) + "' (expected linear or clamp)");
}

void LossKind::validate() const {
  if (normalizes_features() && !(kappa > 0.0 && std::isfinite(kappa))) {
    throw Error(ErrorCode::kConfig, "kappa must be a positive finite number");
  }
  if (type == LossType::kAngularMargin && !(margin >= 0.0 && margin < std::numbers::pi)) {
    throw Error(ErrorCode::kMargin,
                "angular margin must lie in [0, pi), got " + std::to_string(margin));
  }
}

namespace {

void check_labels(const Labels& labels, Eigen::Index rows, Eigen::Index num_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    std::ostringstream os;
    os << "got " << labels.size() << " labels for " << rows << " samples";
    throw Error(ErrorCode::kDimension, os.str());
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      std::ostringstream os;
      os << "label " << labels[i] << " at index " << i << " is outside [0, " << num_classes << ")";
      throw Error(ErrorCode::kLabel, os.str());
    }
  }
}

void check_features(const Matrix& weights, const Matrix& features) {
  if (features.cols() != weights.cols()) {
    std::ostringstream os;
    os << "feature dimension " << features.cols() << " does not match classifier dimension "
       << weights.cols();
    throw Error(ErrorCode::kDimension, os.str());
  }
  if (features.rows() == 0) {
    throw Error(ErrorCode::kEmptyDataset, "loss evaluated on an empty batch");
  }
}

// Cross-entropy of each row of z against its label. The per-sample loss is
// log1p(sum_{j != y} exp(z_j - z_y)) whenever the target is the largest logit,
// which keeps full relative precision for confidently classified samples.
// grad receives (softmax - onehot) / N.
void softmax_cross_entropy(const Matrix& z, const Labels& labels, LossResult& out) {
  const Eigen::Index n = z.rows();
  const Eigen::Index k = z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  out.per_sample.assign(static_cast<std::size_t>(n), 0.0);
  out.grad.resize(n, k);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double top = z.row(i).maxCoeff();
    double others = 0.0;  // sum_{j != y} exp(z_j - top)
    for (Eigen::Index j = 0; j < k; ++j) {
      const double e = std::exp(z(i, j) - top);
      out.grad(i, j) = e;
      if (j != y) others += e;
    }
    const double target = out.grad(i, y);
    const double denom = others + target;

    double loss;
    if (z(i, y) >= top) {
      loss = std::log1p(others);  // target == 1 here
    } else {
      loss = std::log(denom) - (z(i, y) - top);
    }
    out.per_sample[static_cast<std::size_t>(i)] = loss;

    for (Eigen::Index j = 0; j < k; ++j) out.grad(i, j) *= inv_n / denom;
    out.grad(i, y) = -others / denom * inv_n;
  }
  // Mean taken relative to the first sample, so identical per-sample losses
  // (e.g. all-zero logits) come back exactly.
  const double first = out.per_sample.front();
  double spread = 0.0;
  for (const double v : out.per_sample) spread += v - first;
  out.value = first + spread / static_cast<double>(n);
}

// Normalized-feature logits: cos = (f / |f|) W^T. Returns the unit features.
Matrix unit_features(const Matrix& features, Vector& norms) {
  norms = features.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > kNormFloor)) {
      std::ostringstream os;
      os << "feature " << i << " has norm " << norms(i) << " (floor " << kNormFloor << ")";
      throw Error(ErrorCode::kDegenerateFeature, os.str());
    }
  }
  Matrix unit = features;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) unit.row(i) /= norms(i);
  return unit;
}

// Shared tail for the normalized losses: given d loss / d cos (N x K), map it to
// d / d f through the normalization Jacobian (I - u u^T) / |f| and to d / d W.
void chain_through_normalization(const Matrix& weights, const Matrix& unit, const Vector& norms,
                                 const Matrix& grad_cos, LossResult& out) {
  const Matrix grad_unit = grad_cos * weights;
  out.grad.resize(unit.rows(), unit.cols());
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double radial = grad_unit.row(i).dot(unit.row(i));
    out.grad.row(i) = (grad_unit.row(i) - radial * unit.row(i)) / norms(i);
  }
  out.grad_weights = grad_cos.transpose() * unit;
}

LossResult margin_impl(const Matrix& weights, const Matrix& features, const Labels& labels,
                       double kappa, double margin, MarginTail tail) {
  check_features(weights, features);
  check_labels(labels, features.rows(), weights.rows());
  LossKind{LossType::kAngularMargin, kappa, margin, tail}.validate();

  Vector norms;
  const Matrix unit = unit_features(features, norms);
  const Matrix cos = unit * weights.transpose();
  Matrix z = kappa * cos;

  // d z_y / d cos_y per sample; the other logits have slope kappa.
  Vector target_slope = Vector::Constant(features.rows(), kappa);
  if (margin != 0.0) {
    const double cos_m = std::cos(margin);
    const double sin_m = std::sin(margin);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      const double c = std::clamp(cos(i, y), -1.0 + kCosineClamp, 1.0 - kCosineClamp);
      const double theta = std::acos(c);
      if (theta + margin >= std::numbers::pi) {
        // Past the turning point cos(theta + m) would start rising again.
        if (tail == MarginTail::kClamp) {
          z(i, y) = -kappa;
          target_slope(i) = 0.0;
        } else {
          z(i, y) = kappa * (c + cos_m - 1.0);
          target_slope(i) = kappa;
        }
      } else {
        z(i, y) = kappa * std::cos(theta + margin);
        const double sin_theta = std::max(std::sin(theta), kSineFloor);
        target_slope(i) = kappa * (cos_m + sin_m * c / sin_theta);
      }
    }
  }

  LossResult out;
  softmax_cross_entropy(z, labels, out);
  Matrix grad_cos = kappa * out.grad;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    grad_cos(i, y) = out.grad(i, y) * target_slope(i);
  }
  chain_through_normalization(weights, unit, norms, grad_cos, out);
  return out;
}

LossResult norm_scaled_impl(const Matrix& weights, const Matrix& features, const Labels& labels,
                            double kappa) {
  check_features(weights, features);
  check_labels(labels, features.rows(), weights.rows());
  LossKind::norm_scaled(kappa).validate();

  Vector norms;
  const Matrix unit = unit_features(features, norms);
  LossResult out;
  softmax_cross_entropy(kappa * (unit * weights.transpose()), labels, out);
  const Matrix grad_cos = kappa * out.grad;
  chain_through_normalization(weights, unit, norms, grad_cos, out);
  return out;
}

LossResult raw_impl(const Matrix& weights, const Matrix& features, const Labels& labels,
                    const std::optional<Vector>& bias) {
  const Matrix z = logits(weights, features, bias);
  check_labels(labels, features.rows(), weights.rows());
  LossResult out;
  softmax_cross_entropy(z, labels, out);
  const Matrix grad_z = std::move(out.grad);
  out.grad = grad_z * weights;
  out.grad_weights = grad_z.transpose() * features;
  if (bias) out.grad_bias = grad_z.colwise().sum().transpose();
  return out;
}

}  // namespace

Matrix logits(const Matrix& weights, const Matrix& features, const std::optional<Vector>& bias) {
  check_features(weights, features);
  Matrix z = features * weights.transpose();
  if (bias) {
    if (bias->size() != weights.rows()) {
      throw Error(ErrorCode::kDimension, "bias length does not match the number of classes");
    }
    z.rowwise() += bias->transpose();
  }
  return z;
}

Matrix logits(const ClassifierWeights& weights, const Matrix& features,
              const std::optional<Vector>& bias) {
  return logits(weights.rows, features, bias);
}

LossResult plain_ce(const Matrix& z, const Labels& labels) {
  if (z.rows() == 0) throw Error(ErrorCode::kEmptyDataset, "loss evaluated on an empty batch");
  check_labels(labels, z.rows(), z.cols());
  LossResult out;
  softmax_cross_entropy(z, labels, out);
  return out;
}

LossResult fixed_softmax_loss(const ClassifierWeights& weights, const Matrix& features,
                              const Labels& labels) {
  return raw_impl(weights.rows, features, labels, std::nullopt);
}

LossResult norm_scaled_loss(const ClassifierWeights& weights, const Matrix& features,
                            const Labels& labels, double kappa) {
  return norm_scaled_impl(weights.rows, features, labels, kappa);
}

LossResult margin_loss(const ClassifierWeights& weights, const Matrix& features,
                       const Labels& labels, double kappa, double margin, MarginTail tail) {
  return margin_impl(weights.rows, features, labels, kappa, margin, tail);
}

double maximal_margin(const ClassifierWeights& weights) { return weights.phi; }

LossResult compute_loss(const LossKind& loss, const Matrix& weights, const Matrix& features,
                        const Labels& labels, const std::optional<Vector>& bias) {
  switch (loss.type) {
    case LossType::kPlainCE:
      return raw_impl(weights, features, labels, bias);
    case LossType::kFixedSoftmax:
      return raw_impl(weights, features, labels, std::nullopt);
    case LossType::kNormScaled:
      return norm_scaled_impl(weights, features, labels, loss.kappa);
    case LossType::kAngularMargin:
      return margin_impl(weights, features, labels, loss.kappa, loss.margin, loss.tail);
  }
  throw Error(ErrorCode::kConfig, "unknown loss type");
}

LossResult compute_loss(const LossKind& loss, const ClassifierWeights& weights,
                        const Matrix& features, const Labels& labels) {
  return compute_loss(loss, weights.rows, features, labels);
}

double grad_check(const LossKind& loss, const ClassifierWeights& weights, const Matrix& features,
                  const Labels& labels, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::kConfig, "finite-difference step must be positive");
  const LossResult analytic = compute_loss(loss, weights, features, labels);
  const double inv_n = 1.0 / static_cast<double>(features.rows());

  // Each sample's loss depends only on its own feature row, so the numeric
  // derivative is taken on that single-sample loss (and rescaled by 1/N).
  // This keeps the difference quotient free of the other samples' rounding.
  double worst = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    Matrix row = features.row(i);
    const Labels label{labels[static_cast<std::size_t>(i)]};
    for (Eigen::Index k = 0; k < features.cols(); ++k) {
      const double saved = row(0, k);
      row(0, k) = saved + step;
      const double up = compute_loss(loss, weights, row, label).value;
      row(0, k) = saved - step;
      const double down = compute_loss(loss, weights, row, label).value;
      row(0, k) = saved;

      const double numeric = (up - down) / (2.0 * step) * inv_n;
      const double a = analytic.grad(i, k);
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace reponet
