#pragma once

// SO(3) / SE(3) values, exponential and logarithm maps, geodesic distance and
// the Karcher / Euclidean means used to fuse repeated alignment estimates.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "viraal/error.hpp"

namespace viraal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Axis-angle tangent vector (radians). Its norm is the rotation angle.
using TangentVector = Eigen::Vector3d;

inline constexpr double kRotationTolerance = 1e-9;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Skew-symmetric matrix of w, so that hat(w) * v == w.cross(v).
inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

/// Element of SO(3), stored as an orthonormal matrix with det +1.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation identity() { return Rotation(); }

  /// Validates orthonormality and orientation within `tol`.
  static Rotation from_matrix(const Mat3& m, double tol = kRotationTolerance) {
    if (!m.allFinite()) throw Error(ErrorCode::InvalidArgument, "rotation matrix is not finite");
    const double orth = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > tol) throw Error(ErrorCode::InvalidArgument, "matrix is not orthonormal");
    if (std::abs(m.determinant() - 1.0) > tol)
      throw Error(ErrorCode::InvalidArgument, "matrix determinant is not +1");
    return Rotation(m);
  }

  /// Nearest rotation (Frobenius sense) to an arbitrary 3x3 matrix.
  static Rotation project(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return Rotation(svd.matrixU() * d * svd.matrixV().transpose());
  }

  static Rotation from_quaternion(const Eigen::Quaterniond& q) {
    if (q.norm() < 1e-12) throw Error(ErrorCode::InvalidArgument, "zero quaternion");
    return Rotation(q.normalized().toRotationMatrix());
  }

  static Rotation about_axis(const Vec3& axis, double angle_rad);

  /// No validation; for matrices produced by closed-form constructions.
  static Rotation unchecked(const Mat3& m) { return Rotation(m); }

  const Mat3& matrix() const { return m_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(m_).normalized(); }

  Rotation inverse() const { return Rotation(m_.transpose()); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }

  bool operator==(const Rotation& o) const { return m_ == o.m_; }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Rodrigues closed form of exp(hat(w)).
inline Rotation so3_exp(const TangentVector& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-6) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    const double s = std::sin(0.5 * theta);
    b = 2.0 * s * s / theta2;
  }
  const Mat3 k = hat(w);
  return Rotation::unchecked(Mat3::Identity() + a * k + b * k * k);
}

inline Rotation Rotation::about_axis(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "rotation axis is null");
  return so3_exp(axis / n * angle_rad);
}

namespace detail {

// Axis of a half-turn: dominant column of (R + I) / 2 = a a^T, with the sign
// fixed so that the first non-negligible component is positive.
inline Vec3 half_turn_axis(const Mat3& r) {
  const Mat3 s = 0.5 * (r + Mat3::Identity());
  Eigen::Index k = 0;
  s.diagonal().maxCoeff(&k);
  Vec3 axis = s.col(k).normalized();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(axis[i]) > 1e-12) {
      if (axis[i] < 0.0) axis = -axis;
      break;
    }
  }
  return axis;
}

}  // namespace detail

/// Canonical logarithm, ||w|| in [0, pi].
inline TangentVector so3_log(const Rotation& rot) {
  const Eigen::Quaterniond q = rot.quaternion();
  Vec3 v = q.vec();
  double w = q.w();
  if (w < 0.0) {
    v = -v;
    w = -w;
  }
  const double s = v.norm();
  if (s < 1e-300) return Vec3::Zero();
  const double theta = 2.0 * std::atan2(s, w);
  if (w < 1e-15) return detail::half_turn_axis(rot.matrix()) * std::numbers::pi;
  return v / s * theta;
}

/// Angle of the relative rotation Ra^T Rb (radians).
/// Exactly zero for identical inputs.
inline double geodesic_distance(const Rotation& a, const Rotation& b) {
  if (a == b) return 0.0;
  return so3_log(a.inverse() * b).norm();
}

/// Rigid transform x -> R x + t; translations in millimeters.
struct RigidTransform {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Rotation::identity(), t}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  RigidTransform operator*(const RigidTransform& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }

  RigidTransform inverse() const {
    const Rotation rt = rotation.inverse();
    return {rt, -(rt * translation)};
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  bool operator==(const RigidTransform& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

struct KarcherOptions {
  double tolerance = 1e-10;      // on the norm of the mean tangent (gradient)
  int max_iterations = 100;
  double max_radius = std::numbers::pi / 2.0;  // about the first input
};

struct KarcherResult {
  Rotation mean;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Orthogonal projection of the arithmetic matrix mean onto SO(3).
inline Rotation chordal_mean(std::span<const Rotation> rotations) {
  if (rotations.empty()) throw Error(ErrorCode::EmptyInput, "no rotations to average");
  Mat3 sum = Mat3::Zero();
  for (const auto& r : rotations) sum += r.matrix();
  return Rotation::project(sum / static_cast<double>(rotations.size()));
}

/// Karcher (geodesic L2) mean by the fixed-point iteration
/// R <- R exp(mean_i log(R^T R_i)), started from the chordal mean.
inline KarcherResult karcher_mean(std::span<const Rotation> rotations,
                                  const KarcherOptions& opts = {}) {
  if (rotations.empty()) throw Error(ErrorCode::EmptyInput, "no rotations to average");
  const Rotation& first = rotations.front();
  bool all_equal = true;
  for (const auto& r : rotations) {
    const double d = geodesic_distance(first, r);
    if (!(d < opts.max_radius))
      throw Error(ErrorCode::DispersedInput,
                  "rotation at geodesic distance " + std::to_string(d) +
                      " rad from the first input exceeds the uniqueness radius");
    all_equal = all_equal && r == first;
  }
  if (all_equal) return {first, 0, 0.0};

  const double n = static_cast<double>(rotations.size());
  Rotation mean = chordal_mean(rotations);
  for (int it = 0; it <= opts.max_iterations; ++it) {
    Vec3 g = Vec3::Zero();
    const Rotation inv = mean.inverse();
    for (const auto& r : rotations) g += so3_log(inv * r);
    g /= n;
    const double gn = g.norm();
    if (gn < opts.tolerance) return {mean, it, gn};
    if (it == opts.max_iterations) break;
    mean = mean * so3_exp(g);
  }
  throw Error(ErrorCode::NonConvergent,
              "Karcher iteration did not converge in " + std::to_string(opts.max_iterations) +
                  " steps");
}

inline Rotation rotation_mean(std::span<const Rotation> rotations, const KarcherOptions& opts = {}) {
  return karcher_mean(rotations, opts).mean;
}

inline Vec3 translation_mean(std::span<const Vec3> translations) {
  if (translations.empty()) throw Error(ErrorCode::EmptyInput, "no translations to average");
  if (std::all_of(translations.begin(), translations.end(),
                  [&](const Vec3& t) { return t == translations.front(); }))
    return translations.front();
  Vec3 sum = Vec3::Zero();
  for (const auto& t : translations) sum += t;
  return sum / static_cast<double>(translations.size());
}

/// Pairs the Karcher rotation mean with the Euclidean translation mean.
inline RigidTransform transform_mean(std::span<const RigidTransform> transforms,
                                     const KarcherOptions& opts = {}) {
  if (transforms.empty()) throw Error(ErrorCode::EmptyInput, "no transforms to average");
  if (transforms.size() == 1) return transforms.front();
  std::vector<Rotation> rs;
  std::vector<Vec3> ts;
  rs.reserve(transforms.size());
  ts.reserve(transforms.size());
  for (const auto& t : transforms) {
    rs.push_back(t.rotation);
    ts.push_back(t.translation);
  }
  return {rotation_mean(rs, opts), translation_mean(ts)};
}

}  // namespace viraal
