#pragma once

// Independent reference computations. None of these call the library's
// exp/log/mean/intersection code paths; they exist to check them.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "viraal/manifold.hpp"
#include "viraal/ray.hpp"

namespace oracle {

using viraal::Mat3;
using viraal::Vec3;

/// Truncated power series sum_k W^k / k!.
inline Mat3 series_exp(const Vec3& w, int terms = 30) {
  const Mat3 W = viraal::hat(w);
  Mat3 term = Mat3::Identity();
  Mat3 sum = Mat3::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * W / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

/// Unit eigenvector of R for the eigenvalue closest to 1.
inline Vec3 fixed_axis(const Mat3& r) {
  Eigen::EigenSolver<Mat3> es(r);
  int best = 0;
  double gap = 1e300;
  for (int i = 0; i < 3; ++i) {
    const double g = std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
    if (g < gap) {
      gap = g;
      best = i;
    }
  }
  return es.eigenvectors().col(best).real().normalized();
}

inline double trace_angle(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline Mat3 svd_project(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

inline double sum_sq_dist(std::span<const Mat3> rs, const Mat3& x) {
  double f = 0.0;
  for (const auto& r : rs) {
    const double d = trace_angle(r, x);
    f += d * d;
  }
  return f;
}

/// Minimizes sum_i d(R_i, X)^2 by gradient steps in the ambient matrix space
/// followed by SVD projection back onto SO(3). The gradient is taken by
/// central finite differences of the trace-formula objective along the three
/// right-perturbation directions X (I + h E_k), also re-projected.
inline Mat3 karcher_pgd(std::span<const Mat3> rs, double tol = 1e-9, int max_iter = 5000) {
  Mat3 x = rs.front();
  const double n = static_cast<double>(rs.size());
  const double h = 1e-5;
  for (int it = 0; it < max_iter; ++it) {
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e(k) = h;
      const Mat3 xp = svd_project(x * (Mat3::Identity() + viraal::hat(e)));
      const Mat3 xm = svd_project(x * (Mat3::Identity() - viraal::hat(e)));
      g(k) = (sum_sq_dist(rs, xp) - sum_sq_dist(rs, xm)) / (2.0 * h);
    }
    if (g.norm() < tol) break;
    // Hessian of the objective is close to 2n I near the minimum.
    x = svd_project(x - x * viraal::hat(g / (2.0 * n)));
  }
  return x;
}

inline double perp_objective(std::span<const viraal::Ray> rays, const Vec3& x) {
  double f = 0.0;
  for (const auto& r : rays) {
    const Vec3 d = x - r.origin;
    const double along = d.dot(r.direction);
    f += d.squaredNorm() - along * along;
  }
  return f;
}

/// Cyclic coordinate descent on the summed squared perpendicular distances.
/// Each coordinate is minimized exactly by a three-point parabola (the
/// objective is quadratic along any axis).
inline Vec3 coordinate_descent(std::span<const viraal::Ray> rays, Vec3 x, double tol = 1e-13,
                               int max_sweeps = 200000) {
  for (int s = 0; s < max_sweeps; ++s) {
    double moved = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double step = 1.0;
      Vec3 xp = x, xm = x;
      xp(k) += step;
      xm(k) -= step;
      const double f0 = perp_objective(rays, x);
      const double fp = perp_objective(rays, xp);
      const double fm = perp_objective(rays, xm);
      const double curv = fp - 2.0 * f0 + fm;
      if (curv <= 0.0) continue;
      const double delta = -step * (fp - fm) / (2.0 * curv);
      x(k) += delta;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < tol) break;
  }
  return x;
}

/// Icosphere triangles: icosahedron subdivided `levels` times, vertices on the sphere.
inline std::vector<std::array<Vec3, 3>> icosphere(const Vec3& center, double radius, int levels) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  const int f[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                        {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  std::vector<std::array<Vec3, 3>> tris;
  for (const auto& face : f) tris.push_back({v[face[0]].normalized(), v[face[1]].normalized(), v[face[2]].normalized()});
  for (int l = 0; l < levels; ++l) {
    std::vector<std::array<Vec3, 3>> next;
    for (const auto& tr : tris) {
      const Vec3 a = (tr[0] + tr[1]).normalized();
      const Vec3 b = (tr[1] + tr[2]).normalized();
      const Vec3 c = (tr[2] + tr[0]).normalized();
      next.push_back({tr[0], a, c});
      next.push_back({tr[1], b, a});
      next.push_back({tr[2], c, b});
      next.push_back({a, b, c});
    }
    tris.swap(next);
  }
  for (auto& tr : tris)
    for (auto& p : tr) p = center + radius * p;
  return tris;
}

/// Nearest positive root of |o + s d - c|^2 = r^2.
inline double sphere_hit(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double b = oc.dot(d);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  return -b - std::sqrt(disc);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

/// Rotation by a uniform random axis and an angle uniform in [0, max_angle].
inline viraal::Rotation random_rotation(std::mt19937_64& rng, double max_angle = std::numbers::pi) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return viraal::Rotation::about_axis(random_unit(rng), u(rng));
}

}  // namespace oracle
