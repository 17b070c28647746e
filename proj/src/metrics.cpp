#include "reponet/metrics.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

namespace reponet {

double accuracy(const Labels& predictions, const Labels& labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kDimension, "predictions and labels differ in length");
  }
  if (labels.empty()) throw Error(ErrorCode::kEmptyDataset, "accuracy of an empty label set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

GeometryReport geometry_report(const Matrix& class_rows, double phi, const Matrix& features,
                               const Labels& labels, const Labels& predictions) {
  const Eigen::Index n = features.rows();
  const Eigen::Index k = class_rows.rows();
  if (features.cols() != class_rows.cols()) {
    throw Error(ErrorCode::kDimension, "feature and classifier dimensions differ");
  }
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(ErrorCode::kDimension, "labels and features differ in length");
  }
  for (const int y : labels) {
    if (y < 0 || y >= k) throw Error(ErrorCode::kLabel, "label outside the classifier range");
  }

  GeometryReport report;
  report.phi = phi;
  report.accuracy = accuracy(predictions, labels);
  report.per_class.resize(static_cast<std::size_t>(k));

  std::vector<std::vector<double>> angles(static_cast<std::size_t>(k));
  Matrix direction_sum = Matrix::Zero(k, features.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = features.row(i).norm();
    if (!(norm > 0.0)) {
      ++report.degenerate;
      continue;
    }
    const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    const Vector unit = features.row(i).transpose() / norm;
    const double angle = angle_between(unit, class_rows.row(static_cast<Eigen::Index>(c)).transpose());
    angles[c].push_back(angle);
    direction_sum.row(static_cast<Eigen::Index>(c)) += unit.transpose();
    report.per_class[c].count += 1;
  }

  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    ClassGeometry& g = report.per_class[c];
    g.label = static_cast<int>(c);
    g.mean_direction = Vector::Zero(features.cols());
    if (g.count == 0) continue;
    const double cnt = static_cast<double>(g.count);
    double sum = 0.0;
    for (const double a : angles[c]) sum += a;
    g.mean_angle_to_weight = sum / cnt;
    double sq = 0.0;
    for (const double a : angles[c]) sq += (a - g.mean_angle_to_weight) * (a - g.mean_angle_to_weight);
    g.angle_std = std::sqrt(sq / cnt);
    const double norm = direction_sum.row(static_cast<Eigen::Index>(c)).norm();
    // Unit features that cancel exactly leave no mean direction.
    if (norm > 0.0) {
      g.mean_direction = direction_sum.row(static_cast<Eigen::Index>(c)).transpose() / norm;
      g.present = true;
      present.push_back(c);
    }
  }

  report.min_pairwise_mean_angle = std::numbers::pi;
  report.pairwise_defined = present.size() >= 2;
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      const double angle = angle_between(report.per_class[present[a]].mean_direction,
                                         report.per_class[present[b]].mean_direction);
      report.min_pairwise_mean_angle = std::min(report.min_pairwise_mean_angle, angle);
    }
  }
  return report;
}

GeometryReport geometry_report(const ClassifierWeights& weights, const Matrix& features,
                               const Labels& labels, const Labels& predictions) {
  return geometry_report(weights.rows, weights.phi, features, labels, predictions);
}

void export_scatter(const Matrix& features, const Labels& labels, bool normalized,
                    const std::filesystem::path& path) {
  if (features.rows() == 0) throw Error(ErrorCode::kEmptyDataset, "nothing to export");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw Error(ErrorCode::kDimension, "labels and features differ in length");
  }
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  os << "label";
  for (Eigen::Index k = 0; k < features.cols(); ++k) os << ",f" << k;
  os << '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    Eigen::RowVectorXd row = features.row(i);
    if (normalized) {
      const double norm = row.norm();
      if (norm > 0.0) row /= norm;
    }
    os << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < row.size(); ++k) os << fmt::format(",{:.17g}", row(k));
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

}  // namespace reponet
