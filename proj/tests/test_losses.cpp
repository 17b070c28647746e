#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "reponet/losses.hpp"
#include "test_support.hpp"

using namespace reponet;
using reponet::testing::naive_logits;
using reponet::testing::random_labels;
using reponet::testing::random_matrix;
using reponet::testing::well_posed_features;

namespace {

// Central differences of the full batch value, independent of grad_check.
Matrix numeric_logit_grad(const Matrix& z, const Labels& labels, double h) {
  Matrix g(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      Matrix up = z, down = z;
      up(i, j) += h;
      down(i, j) -= h;
      g(i, j) = (plain_ce(up, labels).value - plain_ce(down, labels).value) / (2 * h);
    }
  }
  return g;
}

template <class Fn>
Matrix numeric_feature_grad(Fn&& value, const Matrix& f, double h) {
  Matrix g(f.rows(), f.cols());
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index k = 0; k < f.cols(); ++k) {
      Matrix up = f, down = f;
      up(i, k) += h;
      down(i, k) -= h;
      g(i, k) = (value(up) - value(down)) / (2 * h);
    }
  }
  return g;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("logits") {
  const auto w = make_simplex(5);
  SUBCASE("aligned feature gives its norm") {
    Matrix f = 3.5 * w.rows.row(2);
    CHECK(logits(w, f)(0, 2) == doctest::Approx(3.5).epsilon(1e-15));
  }
  SUBCASE("orthogonal feature gives zero") {
    const auto o = make_orthoplex(4);
    Matrix f(1, 2);
    f << 0.0, 2.0;
    CHECK(logits(o, f)(0, 0) == 0.0);
    CHECK(logits(o, f)(0, 1) == 0.0);
  }
  SUBCASE("matches the triple-loop oracle") {
    std::mt19937_64 rng(11);
    const Matrix f = random_matrix(3, w.dim, rng);
    CHECK((logits(w, f) - naive_logits(w.rows, f)).cwiseAbs().maxCoeff() < 1e-12);
    Vector b(5);
    b << 1, 2, 3, 4, 5;
    Matrix expected = naive_logits(w.rows, f);
    for (int n = 0; n < 3; ++n) expected.row(n) += b.transpose();
    CHECK((logits(w, f, b) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shape mismatch") {
    CHECK(code_of([&] { logits(w, Matrix::Zero(2, 3)); }) == ErrorCode::kDimension);
    CHECK(code_of([&] { logits(w, Matrix::Zero(2, 4), Vector::Zero(3)); }) == ErrorCode::kDimension);
  }
}

TEST_CASE("plain_ce") {
  SUBCASE("zero logits give ln K") {
    for (const int k : {2, 10, 47}) {
      const auto r = plain_ce(Matrix::Zero(3, k), Labels{0, 1, k - 1});
      CHECK(r.value == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-15));
    }
  }
  SUBCASE("equal logits at any scale give ln 2") {
    for (const double kappa : {0.0, 1.0, 30.0, 700.0}) {
      Matrix z(1, 2);
      z << kappa, kappa;
      CHECK(plain_ce(z, Labels{1}).value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }
  }
  SUBCASE("gradient matches finite differences") {
    std::mt19937_64 rng(5);
    const Matrix z = random_matrix(4, 5, rng, 2.0);
    const Labels y{0, 4, 2, 2};
    const auto r = plain_ce(z, y);
    CHECK((r.grad - numeric_logit_grad(z, y, 1e-6)).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("shift invariance") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      Matrix z = random_matrix(3, 7, rng, 3.0);
      const Labels y = random_labels(3, 7, rng);
      const double before = plain_ce(z, y).value;
      z.array() += 123.25;
      CHECK(std::abs(plain_ce(z, y).value - before) < 1e-12);
    }
  }
  SUBCASE("value is the mean of per-sample losses") {
    std::mt19937_64 rng(7);
    const auto r = plain_ce(random_matrix(9, 4, rng, 5.0), random_labels(9, 4, rng));
    double sum = 0.0;
    for (double l : r.per_sample) {
      CHECK(l >= 0.0);
      sum += l;
    }
    CHECK(std::abs(r.value - sum / 9) < 1e-12);
  }
  SUBCASE("label out of range") {
    CHECK(code_of([] { plain_ce(Matrix::Zero(2, 3), Labels{0, 3}); }) == ErrorCode::kLabel);
    CHECK(code_of([] { plain_ce(Matrix::Zero(2, 3), Labels{-1, 0}); }) == ErrorCode::kLabel);
  }
}

TEST_CASE("fixed_softmax_loss") {
  const auto w = make_simplex(10);
  SUBCASE("zero features give ln K") {
    const auto r = fixed_softmax_loss(w, Matrix::Zero(4, 9), Labels{0, 3, 6, 9});
    CHECK(r.value == std::log(10.0));
  }
  SUBCASE("loss vanishes monotonically as the aligned feature grows") {
    double previous = std::numeric_limits<double>::infinity();
    for (const double s : {0.1, 1.0, 5.0, 20.0, 100.0, 1000.0}) {
      const Matrix f = s * w.rows.row(4);
      const double l = fixed_softmax_loss(w, f, Labels{4}).value;
      CHECK(l < previous);
      previous = l;
    }
    CHECK(previous < 1e-100);
  }
  SUBCASE("finite differences") {
    std::mt19937_64 rng(8);
    const Matrix f = random_matrix(6, 9, rng);
    const Labels y = random_labels(6, 10, rng);
    const auto r = fixed_softmax_loss(w, f, y);
    const Matrix numeric = numeric_feature_grad(
        [&](const Matrix& x) { return fixed_softmax_loss(w, x, y).value; }, f, 1e-6);
    CHECK((r.grad - numeric).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("norm_scaled_loss") {
  SUBCASE("two-class closed form at cos = +-1") {
    const auto w = make_orthoplex(2);  // +e1, -e1
    Matrix f(1, 1);
    f << 4.2;
    const auto r = norm_scaled_loss(w, f, Labels{0}, 30.0);
    CHECK(r.value == doctest::Approx(8.75651076269652e-27).epsilon(1e-12));
  }
  SUBCASE("gradient is tangent to the feature") {
    std::mt19937_64 rng(9);
    const auto w = make_cube(16);
    const Matrix f = random_matrix(5, 4, rng);
    const auto r = norm_scaled_loss(w, f, random_labels(5, 16, rng), 30.0);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(r.grad.row(i).dot(f.row(i))) < 1e-10);
  }
  SUBCASE("finite differences at kappa 30") {
    std::mt19937_64 rng(10);
    const auto w = make_simplex(6);
    const Labels y = random_labels(8, 6, rng);
    const Matrix f = well_posed_features(w.rows, y, 0.0, 0.05, rng);
    CHECK(grad_check(LossKind::norm_scaled(30.0), w, f, y) < 1e-5);
  }
  SUBCASE("scale invariance") {
    std::mt19937_64 rng(12);
    const auto w = make_orthoplex(7);
    const Matrix f = random_matrix(5, 4, rng);
    const Labels y = random_labels(5, 7, rng);
    for (const double c : {1e-3, 0.5, 7.0, 1e4}) {
      CHECK(std::abs(norm_scaled_loss(w, c * f, y).value - norm_scaled_loss(w, f, y).value) < 1e-10);
      CHECK(std::abs(margin_loss(w, c * f, y, 30, 0.7).value - margin_loss(w, f, y, 30, 0.7).value) <
            1e-10);
    }
  }
  SUBCASE("degenerate features are an error, not NaN") {
    const auto w = make_simplex(3);
    CHECK(code_of([&] { norm_scaled_loss(w, Matrix::Zero(1, 2), Labels{0}); }) ==
          ErrorCode::kDegenerateFeature);
    Matrix tiny(1, 2);
    tiny << 1e-13, 0.0;
    CHECK(code_of([&] { margin_loss(w, tiny, Labels{0}, 30, 1.0); }) ==
          ErrorCode::kDegenerateFeature);
    CHECK(code_of([&] { grad_check(LossKind::norm_scaled(), w, Matrix::Zero(1, 2), Labels{0}); }) ==
          ErrorCode::kDegenerateFeature);
  }
}

TEST_CASE("margin_loss") {
  SUBCASE("m = 0 reduces to norm_scaled exactly") {
    std::mt19937_64 rng(13);
    const auto w = make_simplex(10);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix f = random_matrix(7, 9, rng);
      const Labels y = random_labels(7, 10, rng);
      const auto a = margin_loss(w, f, y, 30.0, 0.0);
      const auto b = norm_scaled_loss(w, f, y, 30.0);
      CHECK(std::abs(a.value - b.value) < 1e-12);
      CHECK((a.grad - b.grad).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("two-class evaluation at m = pi/2") {
    const auto w = make_orthoplex(2);
    Matrix f(1, 1);
    f << 1.0;
    const auto r = margin_loss(w, f, Labels{0}, 30.0, std::numbers::pi / 2);
    // Target logit 30 cos(pi/2) = 0, other logit 30 cos(pi) = -30. The cosine
    // clamp shifts the target angle by ~4.5e-4 rad, hence the absolute bound.
    CHECK(std::abs(r.value - 9.357622968839737e-14) < 2e-15);
  }
  SUBCASE("finite differences with theta_y away from the singular set") {
    std::mt19937_64 rng(14);
    const auto w = make_simplex(10);
    const double m = maximal_margin(w);
    const Labels y = random_labels(4, 10, rng);
    const Matrix f = well_posed_features(w.rows, y, m, 0.05, rng);
    CHECK(grad_check(LossKind::angular_margin(m), w, f, y) < 1e-5);
  }
  SUBCASE("monotone pressure toward the target weight") {
    // The feature turns in the (e1, e2) plane; the other class rows are
    // orthogonal to that plane so only theta_y changes.
    Matrix rows = Matrix::Zero(3, 4);
    rows(0, 0) = 1.0;
    rows(1, 2) = 1.0;
    rows(2, 3) = 1.0;
    for (const double m : {0.3, 0.6, 1.2}) {
      double previous = -1.0;
      for (double theta = std::numbers::pi - m - 0.01; theta > 0.01; theta -= 0.01) {
        Matrix f = Matrix::Zero(1, 4);
        f(0, 0) = std::cos(theta);
        f(0, 1) = std::sin(theta);
        const double l = compute_loss(LossKind::angular_margin(m), rows, f, Labels{0}).value;
        if (previous >= 0.0 && !(l < previous)) FAIL("not decreasing at theta " << theta);
        previous = l;
      }
    }
  }
  SUBCASE("target angle past pi - m") {
    // Rows e1, e3, e4; the feature turns in the (e1, e2) plane so the two
    // non-target cosines stay 0 and the loss is log(2 + e^z) - z.
    Matrix rows = Matrix::Zero(3, 4);
    rows(0, 0) = 1.0;
    rows(1, 2) = 1.0;
    rows(2, 3) = 1.0;
    const double kappa = 30.0;
    const double m = 1.2;
    auto at = [](double theta) {
      Matrix f = Matrix::Zero(1, 4);
      f(0, 0) = std::cos(theta);
      f(0, 1) = std::sin(theta);
      return f;
    };
    auto closed = [](double z) { return std::log(2.0 + std::exp(z)) - z; };
    for (double theta = std::numbers::pi - m + 0.01; theta < std::numbers::pi - 0.01; theta += 0.05) {
      const double clamp =
          compute_loss(LossKind::angular_margin(m, kappa, MarginTail::kClamp), rows, at(theta), Labels{0}).value;
      CHECK(std::abs(clamp - closed(-kappa)) < 1e-12);
      const double linear = compute_loss(LossKind::angular_margin(m, kappa), rows, at(theta), Labels{0}).value;
      CHECK(std::abs(linear - closed(kappa * (std::cos(theta) + std::cos(m) - 1.0))) < 1e-11);
    }
    // Continuity at the junction theta = pi - m for the linear tail.
    const double below = compute_loss(LossKind::angular_margin(m), rows,
                                      at(std::numbers::pi - m - 1e-9), Labels{0}).value;
    const double above = compute_loss(LossKind::angular_margin(m), rows,
                                      at(std::numbers::pi - m + 1e-9), Labels{0}).value;
    CHECK(std::abs(below - above) < 1e-6);
    // The clamp has no target pull: nothing moves the feature within its
    // (e1, e2) plane, only the non-target rows e3, e4 push.
    const auto flat = compute_loss(LossKind::angular_margin(m, kappa, MarginTail::kClamp), rows,
                                   at(2.5), Labels{0});
    CHECK(flat.grad(0, 0) == 0.0);
    CHECK(flat.grad(0, 1) == 0.0);
    // The linear tail keeps pulling, in the direction of decreasing theta.
    const auto pull = compute_loss(LossKind::angular_margin(m), rows, at(2.5), Labels{0});
    const double dtheta = pull.grad(0, 0) * -std::sin(2.5) + pull.grad(0, 1) * std::cos(2.5);
    CHECK(dtheta > 0.0);
  }
  SUBCASE("linear tail: monotone over the whole range and finite differences") {
    Matrix rows = Matrix::Zero(3, 4);
    rows(0, 0) = 1.0;
    rows(1, 2) = 1.0;
    rows(2, 3) = 1.0;
    const double m = std::acos(-1.0 / 9.0);
    double previous = -1.0;
    for (double theta = std::numbers::pi - 0.01; theta > 0.01; theta -= 0.01) {
      Matrix f = Matrix::Zero(1, 4);
      f(0, 0) = std::cos(theta);
      f(0, 1) = std::sin(theta);
      const double l = compute_loss(LossKind::angular_margin(m), rows, f, Labels{0}).value;
      if (previous >= 0.0 && !(l < previous)) FAIL("not decreasing at theta " << theta);
      previous = l;
    }
    std::mt19937_64 rng(23);
    const auto w = make_simplex(10);
    for (int trial = 0; trial < 20; ++trial) {
      const Labels y = random_labels(6, 10, rng);
      const Matrix f = well_posed_features(w.rows, y, m, 0.05, rng);
      CHECK(grad_check(LossKind::angular_margin(m), w, f, y) < 1e-5);
      CHECK(grad_check(LossKind::angular_margin(m, 30.0, MarginTail::kClamp), w, f, y) < 1e-5);
    }
  }
  SUBCASE("tail names") {
    CHECK(parse_margin_tail("linear") == MarginTail::kLinear);
    CHECK(parse_margin_tail("clamp") == MarginTail::kClamp);
    CHECK(to_string(MarginTail::kClamp) == "clamp");
    CHECK(code_of([] { parse_margin_tail("flat"); }) == ErrorCode::kConfig);
  }
  SUBCASE("margin outside [0, pi)") {
    const auto w = make_simplex(3);
    const Matrix f = w.rows.row(0);
    CHECK(code_of([&] { margin_loss(w, f, Labels{0}, 30, -0.1); }) == ErrorCode::kMargin);
    CHECK(code_of([&] { margin_loss(w, f, Labels{0}, 30, std::numbers::pi); }) == ErrorCode::kMargin);
  }
}

TEST_CASE("maximal_margin is the polytope angle") {
  CHECK(maximal_margin(make_simplex(10)) == std::acos(-1.0 / 9.0));
  CHECK(maximal_margin(make_orthoplex(10)) == std::numbers::pi / 2);
  CHECK(maximal_margin(make_cube(47)) == std::acos(4.0 / 6.0));
}

TEST_CASE("grad_check") {
  std::mt19937_64 rng(15);
  SUBCASE("plain CE on a random 2x3 batch") {
    const auto w = make_simplex(4);
    CHECK(grad_check(LossKind::plain_ce(), w, random_matrix(2, 3, rng), Labels{1, 3}) < 1e-6);
  }
  SUBCASE("angular margin at m = phi on jittered unit simplex features") {
    const auto w = make_simplex(10);
    const Labels y = random_labels(4, 10, rng);
    Matrix f = well_posed_features(w.rows, y, w.phi, 0.05, rng);
    f.rowwise().normalize();
    f += 0.01 * random_matrix(4, 9, rng);
    CHECK(grad_check(LossKind::angular_margin(w.phi), w, f, y) < 1e-5);
  }
}

TEST_CASE("properties over random seeds") {
  // Per-sample losses are non-negative and average to the batch value; the
  // analytic gradient agrees with finite differences for every loss kind.
  const LossKind kinds[] = {LossKind::plain_ce(), LossKind::fixed_softmax(),
                            LossKind::norm_scaled(30.0), LossKind::angular_margin(0.0),
                            LossKind::angular_margin(0.5)};
  const PolytopeKind polytopes[] = {PolytopeKind::kSimplex, PolytopeKind::kOrthoplex,
                                    PolytopeKind::kCube};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto w = make_polytope(polytopes[seed % 3], 3 + static_cast<int>(seed % 9));
    for (LossKind loss : kinds) {
      if (loss.type == LossType::kAngularMargin && loss.margin > 0.0) loss.margin = w.phi * 0.9;
      const Labels y = random_labels(5, w.num_classes, rng);
      const Matrix f = well_posed_features(w.rows, y, loss.margin, 0.05, rng);
      const auto r = compute_loss(loss, w, f, y);
      double sum = 0.0;
      for (const double l : r.per_sample) {
        CHECK(l >= 0.0);
        sum += l;
      }
      CHECK(std::abs(r.value - sum / 5.0) < 1e-12);
      const double err = grad_check(loss, w, f, y);
      if (err >= 1e-5) FAIL("seed " << seed << " loss " << to_string(loss.type) << " err " << err);
    }
  }
}
