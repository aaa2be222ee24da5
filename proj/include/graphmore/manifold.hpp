#pragma once

// Geometry of the kappa-stereographic model of constant curvature spaces.
//
// kappa < 0: ball of radius 1/sqrt(-kappa) (hyperbolic)
// kappa = 0: Euclidean space
// kappa > 0: stereographic projection of the sphere
//
// Two flavours are provided: plain value functions on coordinate arrays, and
// row-batched tape functions used during training. Only origin-based
// exponential and logarithmic maps are provided.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "graphmore/diffcore.hpp"
#include "graphmore/log.hpp"

namespace graphmore {

struct ManifoldSpace {
  /// Guard kept between projected points and the ball boundary, as a
  /// fraction of the radius.
  static constexpr double boundary_eps = 1e-5;
  /// Tangent norms are clamped to this fraction of pi/(2 sqrt(kappa)) for kappa > 0.
  static constexpr double tangent_clamp = 0.99;
  /// Möbius denominators below this magnitude are reported as singular.
  static constexpr double singular_tol = 1e-12;

  double kappa = 0.0;

  bool hyperbolic() const { return kappa < 0.0; }
  bool spherical() const { return kappa > 0.0; }
  bool euclidean() const { return kappa == 0.0; }

  /// Ball radius for kappa < 0, infinity otherwise.
  double radius() const { return kappa < 0.0 ? 1.0 / std::sqrt(-kappa) : INFINITY; }
  /// Largest norm a projected point may have.
  double max_norm() const { return kappa < 0.0 ? (1.0 - boundary_eps) / std::sqrt(-kappa) : INFINITY; }
  /// Largest tangent norm accepted by exp0 before clamping.
  double max_tangent_norm() const {
    return kappa > 0.0 ? tangent_clamp * std::numbers::pi / (2.0 * std::sqrt(kappa)) : INFINITY;
  }
};

struct ManifoldPoint {
  std::vector<double> coords;
  ManifoldSpace space;
};

namespace manifold {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// tan_kappa: tan for kappa > 0, tanh for kappa < 0, identity at 0.
inline double tan_k(double t, double kappa) {
  if (kappa > 0.0) {
    const double c = std::sqrt(kappa);
    return std::tan(c * t) / c;
  }
  if (kappa < 0.0) {
    const double c = std::sqrt(-kappa);
    return std::tanh(c * t) / c;
  }
  return t;
}

/// Inverse of tan_k.
inline double artan_k(double s, double kappa) {
  if (kappa > 0.0) {
    const double c = std::sqrt(kappa);
    return std::atan(c * s) / c;
  }
  if (kappa < 0.0) {
    const double c = std::sqrt(-kappa);
    const double arg = c * s;
    if (!(std::abs(arg) < 1.0)) throw NumericalDomainError("artan_k: point outside the hyperbolic ball");
    return std::atanh(arg) / c;
  }
  return s;
}

inline std::vector<double> project_to_domain(std::span<const double> x, const ManifoldSpace& space) {
  std::vector<double> out(x.begin(), x.end());
  if (!space.hyperbolic()) return out;
  const double n = norm(x);
  const double limit = space.max_norm();
  if (n > limit) {
    for (auto& v : out) v *= limit / n;
  }
  return out;
}

inline std::vector<double> mobius_add(std::span<const double> x, std::span<const double> y, const ManifoldSpace& space) {
  const double k = space.kappa;
  const double xy = dot(x, y);
  const double x2 = dot(x, x);
  const double y2 = dot(y, y);
  const double den = 1.0 - 2.0 * k * xy + k * k * x2 * y2;
  if (std::abs(den) < ManifoldSpace::singular_tol)
    throw NumericalDomainError("mobius_add: singular denominator (antipodal points)");
  const double cx = (1.0 - 2.0 * k * xy - k * y2) / den;
  const double cy = (1.0 + k * x2) / den;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = cx * x[i] + cy * y[i];
  return project_to_domain(out, space);
}

inline std::vector<double> exp0(std::span<const double> v, const ManifoldSpace& space) {
  const double n = norm(v);
  if (n == 0.0) return std::vector<double>(v.size(), 0.0);
  double t = n;
  if (space.spherical() && t > space.max_tangent_norm()) {
    log().debug("exp0: tangent norm {} clamped to {}", t, space.max_tangent_norm());
    t = space.max_tangent_norm();
  }
  const double f = tan_k(t, space.kappa) / n;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f * v[i];
  return project_to_domain(out, space);
}

inline std::vector<double> log0(std::span<const double> y, const ManifoldSpace& space) {
  std::vector<double> p = project_to_domain(y, space);
  if (space.hyperbolic() && norm(y) > space.max_norm()) log().debug("log0: point projected into the ball first");
  const double n = norm(p);
  if (n == 0.0) return p;
  const double f = artan_k(n, space.kappa) / n;
  for (auto& v : p) v *= f;
  return p;
}

/// Geodesic distance 2 artan_k(|(-x) (+) y|); at kappa = 0 this is 2|x - y|.
inline double dist(std::span<const double> x, std::span<const double> y, const ManifoldSpace& space) {
  std::vector<double> negx(x.begin(), x.end());
  for (auto& v : negx) v = -v;
  const auto m = mobius_add(negx, y, space);
  return 2.0 * artan_k(norm(m), space.kappa);
}

/// w (x) x = exp0(w log0(x)).
inline std::vector<double> kappa_scale(double w, std::span<const double> x, const ManifoldSpace& space) {
  auto t = log0(x, space);
  for (auto& v : t) v *= w;
  return exp0(t, space);
}

// ---------------------------------------------------------------------------
// Tape versions. Points are matrix rows; kappa is a 1x1 node whose sign at
// build time selects the branch. An exactly-zero kappa selects the Euclidean
// branch, so a frozen Euclidean curvature contributes no gradient.

namespace tape {

namespace detail {

// Minimum norm used when dividing by |v|; rows below it are treated as the origin.
inline constexpr double tiny_norm = 1e-15;

inline Var scale_by_c(const Var& t, const Var& kappa, bool inverse) {
  Var c = ad::sqrt(kappa.item() < 0.0 ? ad::neg(kappa) : kappa);
  return ad::mul_scalar(t, inverse ? ad::reciprocal(c) : c);
}

}  // namespace detail

/// tan_k on a column of reals.
inline Var tan_k(const Var& t, const Var& kappa) {
  const double k = kappa.item();
  if (k == 0.0) return t;
  Var arg = detail::scale_by_c(t, kappa, false);
  Var f = k > 0.0 ? ad::tan(arg) : ad::tanh(arg);
  return detail::scale_by_c(f, kappa, true);
}

/// artan_k on a column of reals.
inline Var artan_k(const Var& s, const Var& kappa) {
  const double k = kappa.item();
  if (k == 0.0) return s;
  Var arg = detail::scale_by_c(s, kappa, false);
  Var f = k > 0.0 ? ad::atan(arg) : ad::atanh(ad::clamp_max(arg, 1.0 - 1e-12));
  return detail::scale_by_c(f, kappa, true);
}

inline Var project_to_domain(const Var& x, const Var& kappa) {
  const ManifoldSpace space{kappa.item()};
  if (!space.hyperbolic()) return x;
  return ad::clip_row_norm(x, space.max_norm());
}

inline Var exp0(const Var& v, const Var& kappa) {
  const ManifoldSpace space{kappa.item()};
  if (space.euclidean()) return v;
  Var n = ad::clamp_min(ad::norm_rows(v), detail::tiny_norm);
  Var t = space.spherical() ? ad::clamp_max(n, space.max_tangent_norm()) : n;
  Var factor = ad::div(tan_k(t, kappa), n);
  return project_to_domain(ad::mul_col(v, factor), kappa);
}

inline Var log0(const Var& y, const Var& kappa) {
  const ManifoldSpace space{kappa.item()};
  if (space.euclidean()) return y;
  Var p = project_to_domain(y, kappa);
  Var n = ad::clamp_min(ad::norm_rows(p), detail::tiny_norm);
  Var factor = ad::div(artan_k(n, kappa), n);
  return ad::mul_col(p, factor);
}

/// Row-wise Möbius addition, literal formula.
inline Var mobius_add(const Var& x, const Var& y, const Var& kappa) {
  if (kappa.item() == 0.0) return ad::add(x, y);
  Tape& t = *x.tape();
  Var xy = ad::dot_rows(x, y);
  Var x2 = ad::sqnorm_rows(x);
  Var y2 = ad::sqnorm_rows(y);
  Var k2 = ad::square(kappa);
  Var one = t.constant(Matrix(x.rows(), 1, 1.0));
  Var two_k_xy = ad::scale(ad::mul_scalar(xy, kappa), 2.0);
  Var den = ad::add(ad::sub(one, two_k_xy), ad::mul_scalar(ad::mul(x2, y2), k2));
  for (double d : den.value().data)
    if (std::abs(d) < ManifoldSpace::singular_tol)
      throw NumericalDomainError("mobius_add: singular denominator (antipodal points)");
  Var cx = ad::div(ad::sub(ad::sub(one, two_k_xy), ad::mul_scalar(y2, kappa)), den);
  Var cy = ad::div(ad::add(one, ad::mul_scalar(x2, kappa)), den);
  return project_to_domain(ad::add(ad::mul_col(x, cx), ad::mul_col(y, cy)), kappa);
}

namespace detail {

// Squared distance from |x-y|^2, <x,y>, |x|^2, |y|^2 using
// |(-x) (+) y| = |x - y| / sqrt(1 + 2k<x,y> + k^2 |x|^2 |y|^2).
inline Var dist_sq_from_parts(const Var& diff2, const Var& xy, const Var& x2, const Var& y2, const Var& kappa) {
  const double k = kappa.item();
  if (k == 0.0) return ad::scale(diff2, 4.0);
  Tape& t = *diff2.tape();
  Var one = t.constant(Matrix(diff2.rows(), 1, 1.0));
  Var den = ad::add(ad::add(one, ad::scale(ad::mul_scalar(xy, kappa), 2.0)),
                    ad::mul_scalar(ad::mul(x2, y2), ad::square(kappa)));
  for (double d : den.value().data)
    if (d < ManifoldSpace::singular_tol)
      throw NumericalDomainError("dist: singular Möbius denominator (antipodal points)");
  Var r = ad::sqrt(ad::div(diff2, den));
  Var d = ad::scale(artan_k(r, kappa), 2.0);
  return ad::square(d);
}

}  // namespace detail

/// Row-wise squared geodesic distance between rows of x and y, rows x 1.
inline Var dist_sq_rows(const Var& x, const Var& y, const Var& kappa) {
  Var px = project_to_domain(x, kappa);
  Var py = project_to_domain(y, kappa);
  Var diff2 = ad::sqnorm_rows(ad::sub(px, py));
  return detail::dist_sq_from_parts(diff2, ad::dot_rows(px, py), ad::sqnorm_rows(px), ad::sqnorm_rows(py), kappa);
}

/// Squared geodesic distance between rows first[p] and second[p] of z, P x 1.
inline Var dist_sq_pairs(const Var& z, std::span<const std::size_t> first, std::span<const std::size_t> second,
                         const Var& kappa) {
  Var diff2 = ad::pair_sqdist(z, first, second);
  if (kappa.item() == 0.0) return ad::scale(diff2, 4.0);
  Var n2 = ad::sqnorm_rows(z);
  return detail::dist_sq_from_parts(diff2, ad::pair_dot(z, first, second),
                                    ad::gather_rows(n2, {first.begin(), first.end()}),
                                    ad::gather_rows(n2, {second.begin(), second.end()}), kappa);
}

/// Row-wise w (x) x with per-row weights w (rows x 1).
inline Var kappa_scale(const Var& w, const Var& x, const Var& kappa) {
  return exp0(ad::mul_col(log0(x, kappa), w), kappa);
}

}  // namespace tape

}  // namespace manifold
}  // namespace graphmore
