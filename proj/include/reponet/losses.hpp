#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "reponet/polytope.hpp"
#include "reponet/types.hpp"

namespace reponet {

inline constexpr double kDefaultKappa = 30.0;
inline constexpr double kNormFloor = 1e-12;
inline constexpr double kCosineClamp = 1e-7;
inline constexpr double kSineFloor = 1e-7;

enum class LossType {
  kPlainCE,       // softmax over raw w.f (+ b)
  kFixedSoftmax,  // unit-norm fixed weights, zero bias, raw features
  kNormScaled,    // kappa * cos(theta_j)
  kAngularMargin  // kappa * cos(theta_y + m) on the target class
};

std::string_view to_string(LossType type);
/// Accepts "plain_ce", "fixed_softmax", "norm_scaled", "margin".
LossType parse_loss_type(std::string_view name);

/// Target logit once theta_y + m reaches pi. kLinear continues as
/// kappa * (cos theta_y + cos m - 1), continuous at the junction and still
/// decreasing in theta_y; kClamp holds it at -kappa (zero gradient there).
enum class MarginTail { kLinear, kClamp };

std::string_view to_string(MarginTail tail);
/// Accepts "linear", "clamp".
MarginTail parse_margin_tail(std::string_view name);

struct LossKind {
  LossType type = LossType::kAngularMargin;
  double kappa = kDefaultKappa;
  double margin = 0.0;  // radians
  MarginTail tail = MarginTail::kLinear;

  static LossKind plain_ce() { return {LossType::kPlainCE, kDefaultKappa, 0.0}; }
  static LossKind fixed_softmax() { return {LossType::kFixedSoftmax, kDefaultKappa, 0.0}; }
  static LossKind norm_scaled(double kappa = kDefaultKappa) {
    return {LossType::kNormScaled, kappa, 0.0};
  }
  static LossKind angular_margin(double margin, double kappa = kDefaultKappa,
                                 MarginTail tail = MarginTail::kLinear) {
    return {LossType::kAngularMargin, kappa, margin, tail};
  }

  bool normalizes_features() const {
    return type == LossType::kNormScaled || type == LossType::kAngularMargin;
  }
  /// Throws kMargin / kConfig on kappa <= 0 or m outside [0, pi).
  void validate() const;
};

struct LossResult {
  double value = 0.0;  // mean of per_sample
  Matrix grad;         // d value / d input (features, or logits for plain_ce)
  std::vector<double> per_sample;
  Matrix grad_weights;  // d value / d classifier rows (K x d); empty for plain_ce on logits
  Vector grad_bias;     // d value / d bias; only filled when a bias was supplied
};

/// z = f W^T + b. Throws kDimension on mismatched shapes.
Matrix logits(const Matrix& weights, const Matrix& features,
              const std::optional<Vector>& bias = std::nullopt);
Matrix logits(const ClassifierWeights& weights, const Matrix& features,
              const std::optional<Vector>& bias = std::nullopt);

/// Mean cross-entropy over rows of z; grad is (softmax - onehot) / N w.r.t. z.
LossResult plain_ce(const Matrix& logits, const Labels& labels);

/// Cross-entropy on w_j.f with the fixed unit rows and zero bias.
LossResult fixed_softmax_loss(const ClassifierWeights& weights, const Matrix& features,
                              const Labels& labels);

/// Cross-entropy on kappa * w_j.f / |f|. Throws kDegenerateFeature if |f| <= 1e-12.
LossResult norm_scaled_loss(const ClassifierWeights& weights, const Matrix& features,
                            const Labels& labels, double kappa = kDefaultKappa);

/// Additive angular margin: the target logit becomes kappa * cos(theta_y + m)
/// while theta_y + m < pi, and follows `tail` beyond.
LossResult margin_loss(const ClassifierWeights& weights, const Matrix& features,
                       const Labels& labels, double kappa, double margin,
                       MarginTail tail = MarginTail::kLinear);

/// Default margin for a fixed polytope head: its nearest-neighbour angle.
double maximal_margin(const ClassifierWeights& weights);

/// Dispatch on the loss kind with an arbitrary K x d weight matrix taken as-is.
/// PlainCE here means cross-entropy on raw w.f + b; grad is w.r.t. features
/// and grad_weights w.r.t. the rows.
LossResult compute_loss(const LossKind& loss, const Matrix& weights, const Matrix& features,
                        const Labels& labels, const std::optional<Vector>& bias = std::nullopt);
LossResult compute_loss(const LossKind& loss, const ClassifierWeights& weights,
                        const Matrix& features, const Labels& labels);

/// Central finite differences over every feature coordinate; returns the max of
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const LossKind& loss, const ClassifierWeights& weights, const Matrix& features,
                  const Labels& labels, double step = 1e-6);

}  // namespace reponet
