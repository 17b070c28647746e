#pragma once

#include <string>
#include <string_view>

#include "reponet/types.hpp"

namespace reponet {

/// The only regular polytopes that exist in every dimension.
enum class PolytopeKind { kSimplex, kOrthoplex, kCube };

std::string_view to_string(PolytopeKind kind);
/// Accepts "simplex", "orthoplex" or "cube".
PolytopeKind parse_polytope_kind(std::string_view name);

/// Fixed classifier: K unit-norm polytope vertices in d dimensions.
struct ClassifierWeights {
  PolytopeKind kind = PolytopeKind::kSimplex;
  int num_classes = 0;
  int dim = 0;
  Matrix rows;       // num_classes x dim
  double phi = 0.0;  // angle between a vertex and its nearest neighbours
};

/// Feature dimension needed to host K classes on the given polytope:
/// K-1 (simplex), ceil(K/2) (orthoplex), ceil(log2 K) (cube).
int embedding_dim(PolytopeKind kind, int num_classes);

/// Maximal vertex count of the d-dimensional polytope.
long long vertex_budget(PolytopeKind kind, int dim);

/// Closed-form nearest-neighbour angle of the d-dimensional polytope.
double expected_angle(PolytopeKind kind, int dim);

/// Regular simplex: basis vectors plus alpha * sum(e_i), centred, then normalized.
ClassifierWeights make_simplex(int num_classes);
/// First K of (+e1, -e1, +e2, -e2, ...).
ClassifierWeights make_orthoplex(int num_classes);
/// First K sign patterns of {-1/sqrt(d), +1/sqrt(d)}^d, lexicographic with - before +.
ClassifierWeights make_cube(int num_classes);
ClassifierWeights make_polytope(PolytopeKind kind, int num_classes);

struct GeometryCheck {
  bool passed = false;
  double worst_deviation = 0.0;  // max |norm - 1| and |angle - phi| seen
  double min_angle = 0.0;        // over distinct row pairs
  std::string message;
};

/// Checks unit norms and that the minimum pairwise angle equals phi; for a
/// simplex every pairwise angle must equal phi. Throws kStructural when the
/// matrix shape disagrees with the declared K and d.
GeometryCheck verify_geometry(const ClassifierWeights& weights, double tol = 1e-10);

/// Angle in [0, pi] between two vectors; pi/2 if either is zero.
double angle_between(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

}  // namespace reponet
