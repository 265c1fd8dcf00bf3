#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "fetalnet/core/error.hpp"
#include "fetalnet/geometry/point.hpp"

namespace fetalnet::geometry {

struct EllipseFit {
  Point center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  /// Direction of the major axis in pixel axes, in [0, pi).
  double angle = 0.0;
};

/// Conic coefficients of A x^2 + B xy + C y^2 + D x + E y + F = 0.
struct Conic {
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
};

inline EllipseFit conic_to_ellipse(Conic q) {
  // fix the overall sign so the quadratic form is positive definite
  if (q.a + q.c < 0.0) q = {-q.a, -q.b, -q.c, -q.d, -q.e, -q.f};
  const double disc = 4.0 * q.a * q.c - q.b * q.b;
  if (!(disc > 0.0)) throw FitFailure("conic is not an ellipse");
  const double x0 = (q.b * q.e - 2.0 * q.c * q.d) / disc;
  const double y0 = (q.b * q.d - 2.0 * q.a * q.e) / disc;
  const double fc = q.a * x0 * x0 + q.b * x0 * y0 + q.c * y0 * y0 + q.d * x0 + q.e * y0 + q.f;

  Eigen::Matrix2d quad;
  quad << q.a, q.b / 2.0, q.b / 2.0, q.c;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(quad);
  const auto lambda = es.eigenvalues();  // ascending
  const double major2 = -fc / lambda(0);
  const double minor2 = -fc / lambda(1);
  if (!(major2 > 0.0) || !(minor2 > 0.0)) throw FitFailure("imaginary ellipse");

  const Eigen::Vector2d axis = es.eigenvectors().col(0);
  double theta = std::atan2(axis(1), axis(0));
  theta = std::fmod(theta, std::numbers::pi);
  if (theta < 0.0) theta += std::numbers::pi;
  if (theta >= std::numbers::pi) theta -= std::numbers::pi;
  return {{x0, y0}, std::sqrt(major2), std::sqrt(minor2), theta};
}

/// Direct least-squares ellipse fit under the normalisation 4AC - B^2 = 1, solved
/// with the block decomposition of Halir and Flusser on centred, scaled data.
inline EllipseFit fit_ellipse(const std::vector<Point>& pts) {
  if (pts.size() < 5) throw FitFailure("ellipse fit needs at least 5 points");

  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double spread = 0.0;
  for (const auto& p : pts) spread += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  spread = std::sqrt(spread / static_cast<double>(pts.size()));
  if (!(spread > 0.0)) throw FitFailure("all points coincide");

  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixX3d quad(n, 3), lin(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (pts[static_cast<std::size_t>(i)].x - mx) / spread;
    const double y = (pts[static_cast<std::size_t>(i)].y - my) / spread;
    quad.row(i) << x * x, x * y, y * y;
    lin.row(i) << x, y, 1.0;
  }
  const Eigen::Matrix3d s1 = quad.transpose() * quad;
  const Eigen::Matrix3d s2 = quad.transpose() * lin;
  const Eigen::Matrix3d s3 = lin.transpose() * lin;

  Eigen::FullPivLU<Eigen::Matrix3d> s3_lu(s3);
  s3_lu.setThreshold(1e-12);
  if (s3_lu.rank() < 3) throw FitFailure("degenerate point set");
  const Eigen::Matrix3d t = -s3_lu.inverse() * s2.transpose();
  const Eigen::Matrix3d reduced = s1 + s2 * t;

  // Inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
  Eigen::Matrix3d c1_inv;
  c1_inv << 0, 0, 0.5, 0, -1, 0, 0.5, 0, 0;
  Eigen::EigenSolver<Eigen::Matrix3d> es(c1_inv * reduced);
  const Eigen::Matrix3d vecs = es.eigenvectors().real();

  int best = -1;
  for (int i = 0; i < 3; ++i) {
    const double cond = 4.0 * vecs(0, i) * vecs(2, i) - vecs(1, i) * vecs(1, i);
    if (cond > 0.0 && (best < 0 || std::abs(es.eigenvalues()(i).real()) <
                                       std::abs(es.eigenvalues()(best).real()))) {
      best = i;
    }
  }
  if (best < 0) throw FitFailure("no elliptical solution");

  const Eigen::Vector3d a1 = vecs.col(best);
  const Eigen::Vector3d a2 = t * a1;
  const Conic q{a1(0), a1(1), a1(2), a2(0), a2(1), a2(2)};
  EllipseFit e = conic_to_ellipse(q);
  e.center = {mx + spread * e.center.x, my + spread * e.center.y};
  e.semi_major *= spread;
  e.semi_minor *= spread;
  return e;
}

/// Ramanujan's first perimeter approximation; exact for circles.
inline double ellipse_perimeter(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("ellipse axes must be positive");
  return std::numbers::pi * (3.0 * (a + b) - std::sqrt((3.0 * a + b) * (a + 3.0 * b)));
}

}  // namespace fetalnet::geometry
