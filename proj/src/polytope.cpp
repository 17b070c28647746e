#include "reponet/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace reponet {

std::string_view to_string(PolytopeKind kind) {
  switch (kind) {
    case PolytopeKind::kSimplex: return "simplex";
    case PolytopeKind::kOrthoplex: return "orthoplex";
    case PolytopeKind::kCube: return "cube";
  }
  return "unknown";
}

PolytopeKind parse_polytope_kind(std::string_view name) {
  if (name == "simplex") return PolytopeKind::kSimplex;
  if (name == "orthoplex") return PolytopeKind::kOrthoplex;
  if (name == "cube") return PolytopeKind::kCube;
  throw Error(ErrorCode::kConfig, "unknown polytope kind '" + std::string(name) +
                                      "' (expected simplex, orthoplex or cube)");
}

namespace {

void require_class_count(int num_classes) {
  if (num_classes < 2) {
    throw Error(ErrorCode::kInvalidClassCount,
                "number of classes must be at least 2, got " + std::to_string(num_classes));
  }
}

}  // namespace

int embedding_dim(PolytopeKind kind, int num_classes) {
  require_class_count(num_classes);
  switch (kind) {
    case PolytopeKind::kSimplex:
      return num_classes - 1;
    case PolytopeKind::kOrthoplex:
      return (num_classes + 1) / 2;
    case PolytopeKind::kCube: {
      int dim = 0;
      while ((1LL << dim) < num_classes) ++dim;
      return dim;
    }
  }
  throw Error(ErrorCode::kStructural, "unknown polytope kind");
}

long long vertex_budget(PolytopeKind kind, int dim) {
  switch (kind) {
    case PolytopeKind::kSimplex: return static_cast<long long>(dim) + 1;
    case PolytopeKind::kOrthoplex: return 2LL * dim;
    case PolytopeKind::kCube: return dim >= 62 ? (1LL << 62) : (1LL << dim);
  }
  return 0;
}

double expected_angle(PolytopeKind kind, int dim) {
  if (dim < 1) {
    throw Error(ErrorCode::kDimension, "polytope dimension must be at least 1");
  }
  const double d = static_cast<double>(dim);
  switch (kind) {
    case PolytopeKind::kSimplex:
      return std::acos(-1.0 / d);
    case PolytopeKind::kOrthoplex:
      // Nearest-neighbour angle; at d=1 the only pair is antipodal, but the
      // closed form is kept so that m = phi stays a usable margin.
      return std::numbers::pi / 2.0;
    case PolytopeKind::kCube:
      return std::acos((d - 2.0) / d);
  }
  throw Error(ErrorCode::kStructural, "unknown polytope kind");
}

ClassifierWeights make_simplex(int num_classes) {
  const int dim = embedding_dim(PolytopeKind::kSimplex, num_classes);
  const double d = static_cast<double>(dim);
  const double alpha = (1.0 - std::sqrt(d + 1.0)) / d;

  Matrix rows = Matrix::Zero(num_classes, dim);
  for (int i = 0; i < dim; ++i) rows(i, i) = 1.0;
  rows.row(dim).setConstant(alpha);

  const Eigen::RowVectorXd centroid = rows.colwise().mean();
  rows.rowwise() -= centroid;
  rows.rowwise().normalize();

  return {PolytopeKind::kSimplex, num_classes, dim, std::move(rows),
          expected_angle(PolytopeKind::kSimplex, dim)};
}

ClassifierWeights make_orthoplex(int num_classes) {
  const int dim = embedding_dim(PolytopeKind::kOrthoplex, num_classes);
  Matrix rows = Matrix::Zero(num_classes, dim);
  for (int i = 0; i < num_classes; ++i) {
    rows(i, i / 2) = (i % 2 == 0) ? 1.0 : -1.0;
  }
  return {PolytopeKind::kOrthoplex, num_classes, dim, std::move(rows),
          expected_angle(PolytopeKind::kOrthoplex, dim)};
}

ClassifierWeights make_cube(int num_classes) {
  const int dim = embedding_dim(PolytopeKind::kCube, num_classes);
  const double coord = 1.0 / std::sqrt(static_cast<double>(dim));
  Matrix rows(num_classes, dim);
  for (int i = 0; i < num_classes; ++i) {
    // Coordinate 0 is the most significant sign; a zero bit means -1.
    for (int k = 0; k < dim; ++k) {
      const bool positive = (static_cast<long long>(i) >> (dim - 1 - k)) & 1LL;
      rows(i, k) = positive ? coord : -coord;
    }
  }
  return {PolytopeKind::kCube, num_classes, dim, std::move(rows),
          expected_angle(PolytopeKind::kCube, dim)};
}

ClassifierWeights make_polytope(PolytopeKind kind, int num_classes) {
  switch (kind) {
    case PolytopeKind::kSimplex: return make_simplex(num_classes);
    case PolytopeKind::kOrthoplex: return make_orthoplex(num_classes);
    case PolytopeKind::kCube: return make_cube(num_classes);
  }
  throw Error(ErrorCode::kStructural, "unknown polytope kind");
}

double angle_between(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::numbers::pi / 2.0;
  // Half-angle form stays accurate near 0 and pi, unlike acos of the cosine.
  const Vector ua = a / na;
  const Vector ub = b / nb;
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

GeometryCheck verify_geometry(const ClassifierWeights& weights, double tol) {
  const auto& rows = weights.rows;
  if (weights.num_classes < 2 || weights.dim < 1 || rows.rows() != weights.num_classes ||
      rows.cols() != weights.dim) {
    std::ostringstream os;
    os << "classifier declares K=" << weights.num_classes << ", d=" << weights.dim
       << " but holds a " << rows.rows() << "x" << rows.cols() << " matrix";
    throw Error(ErrorCode::kStructural, os.str());
  }
  if (weights.num_classes > vertex_budget(weights.kind, weights.dim)) {
    std::ostringstream os;
    os << to_string(weights.kind) << " in d=" << weights.dim << " has at most "
       << vertex_budget(weights.kind, weights.dim) << " vertices, got K=" << weights.num_classes;
    throw Error(ErrorCode::kStructural, os.str());
  }
  if (!rows.allFinite()) {
    throw Error(ErrorCode::kStructural, "classifier rows contain non-finite values");
  }

  GeometryCheck check;
  std::ostringstream why;

  const double phi = expected_angle(weights.kind, weights.dim);
  if (weights.phi != phi) {
    check.worst_deviation = std::max(check.worst_deviation, std::abs(weights.phi - phi));
    why << "stored phi " << weights.phi << " != closed form " << phi << "; ";
  }

  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double dev = std::abs(rows.row(i).norm() - 1.0);
    if (dev > tol) why << "row " << i << " norm off by " << dev << "; ";
    check.worst_deviation = std::max(check.worst_deviation, dev);
  }

  const bool all_pairs = weights.kind == PolytopeKind::kSimplex;
  double min_angle = std::numbers::pi;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j) {
      const double angle = angle_between(rows.row(i).transpose(), rows.row(j).transpose());
      min_angle = std::min(min_angle, angle);
      if (all_pairs) {
        const double dev = std::abs(angle - phi);
        if (dev > tol && dev > check.worst_deviation) {
          why << "rows " << i << "," << j << " at angle " << angle << "; ";
        }
        check.worst_deviation = std::max(check.worst_deviation, dev);
      }
    }
  }
  check.min_angle = min_angle;
  // The 1-orthoplex {+1, -1} has no perpendicular neighbour.
  const double nearest =
      weights.kind == PolytopeKind::kOrthoplex && weights.dim == 1 ? std::numbers::pi : phi;
  const double min_dev = std::abs(min_angle - nearest);
  if (min_dev > tol) why << "minimum pairwise angle " << min_angle << " != " << nearest << "; ";
  check.worst_deviation = std::max(check.worst_deviation, min_dev);

  check.passed = check.worst_deviation <= tol;
  check.message = check.passed ? "ok" : why.str();
  return check;
}

}  // namespace reponet
