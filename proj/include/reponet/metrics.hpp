#pragma once

#include <filesystem>
#include <vector>

#include "reponet/polytope.hpp"
#include "reponet/types.hpp"

namespace reponet {

struct ClassGeometry {
  int label = 0;
  bool present = false;            // false when the class has no usable samples
  std::size_t count = 0;           // non-degenerate samples
  double mean_angle_to_weight = 0.0;
  double angle_std = 0.0;          // population standard deviation
  Vector mean_direction;           // normalized mean of unit features
};

/// Angular compactness and separation of a labelled feature set.
struct GeometryReport {
  std::vector<ClassGeometry> per_class;  // one entry per class, in label order
  // Minimum over present class pairs of the angle between mean directions;
  // pi when fewer than two classes are present (pairwise_defined = false).
  double min_pairwise_mean_angle = 0.0;
  bool pairwise_defined = false;
  double accuracy = 0.0;
  double phi = 0.0;
  std::size_t degenerate = 0;  // zero-norm features left out of the angles
};

/// Fraction of equal entries. Throws kDimension on length mismatch.
double accuracy(const Labels& predictions, const Labels& labels);

GeometryReport geometry_report(const Matrix& class_rows, double phi, const Matrix& features,
                               const Labels& labels, const Labels& predictions);
GeometryReport geometry_report(const ClassifierWeights& weights, const Matrix& features,
                               const Labels& labels, const Labels& predictions);

/// CSV `label,f0,...,f{d-1}` with 17 significant digits; rows optionally
/// unit-normalized first (zero rows are written unchanged).
void export_scatter(const Matrix& features, const Labels& labels, bool normalized,
                    const std::filesystem::path& path);

}  // namespace reponet
