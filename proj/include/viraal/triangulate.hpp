#pragma once

// Least-squares intersection of gaze rays and the landmark-pair error metrics
// (per-axis mean / std with L2 aggregates, distance validation).

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "viraal/manifold.hpp"
#include "viraal/ray.hpp"

namespace viraal {

enum class LandmarkSource { Real, Virtual };

struct Landmark {
  Vec3 position = Vec3::Zero();
  LandmarkSource source = LandmarkSource::Real;
  std::string label;

  bool operator==(const Landmark&) const = default;
};

struct RayIntersection {
  Vec3 point = Vec3::Zero();
  double residual = 0.0;   // sum of squared perpendicular distances, mm^2
  double condition = 0.0;  // of the 3x3 normal matrix
};

inline constexpr double kMaxRayCondition = 1e8;

/// Point minimizing the summed squared perpendicular distance to all rays:
/// (sum_i (I - u_i u_i^T)) x = sum_i (I - u_i u_i^T) h_i.
inline RayIntersection intersect_rays(std::span<const Ray> rays) {
  if (rays.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two rays");
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& r : rays) {
    if (std::abs(r.direction.norm() - 1.0) > 1e-9)
      throw Error(ErrorCode::InvalidArgument, "ray direction must be unit length");
    const Mat3 proj = Mat3::Identity() - r.direction * r.direction.transpose();
    a += proj;
    b += proj * r.origin;
  }
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  const double cond = sv(2) > 0.0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxRayCondition))
    throw Error(ErrorCode::DegenerateRays, "rays are parallel or nearly parallel (condition " +
                                               std::to_string(cond) + ")");
  RayIntersection out;
  out.point = svd.solve(b);
  out.condition = cond;
  for (const auto& r : rays) {
    const Vec3 d = out.point - r.origin;
    out.residual += (d - r.direction * r.direction.dot(d)).squaredNorm();
  }
  return out;
}

inline Landmark triangulate_landmark(std::span<const Ray> rays, LandmarkSource source,
                                     std::string label = {}) {
  return {intersect_rays(rays).point, source, std::move(label)};
}

/// Per-axis misalignment: per-axis mean and population std of the
/// absolute differences, plus the L2 norms of the mean and std vectors.
struct MisalignmentReport {
  Vec3 mean = Vec3::Zero();
  Vec3 stddev = Vec3::Zero();
  double l2_mean = 0.0;
  double l2_std = 0.0;
  std::size_t count = 0;
  std::string difference_mode = "absolute";

  bool operator==(const MisalignmentReport&) const = default;
};

inline MisalignmentReport misalignment_from_differences(std::span<const Vec3> diffs) {
  if (diffs.empty()) throw Error(ErrorCode::EmptyInput, "no differences to aggregate");
  const double n = static_cast<double>(diffs.size());
  MisalignmentReport r;
  r.count = diffs.size();
  for (const auto& d : diffs) r.mean += d.cwiseAbs();
  r.mean /= n;
  Vec3 var = Vec3::Zero();
  for (const auto& d : diffs) var += (d.cwiseAbs() - r.mean).cwiseAbs2();
  r.stddev = (var / n).cwiseSqrt();
  r.l2_mean = r.mean.norm();
  r.l2_std = r.stddev.norm();
  return r;
}

/// Pairs are matched by index: virtual[i] - real[i].
inline MisalignmentReport pair_misalignment(std::span<const Landmark> real,
                                            std::span<const Landmark> virt) {
  if (real.size() != virt.size())
    throw Error(ErrorCode::LengthMismatch, "real and virtual landmark lists differ in length");
  if (real.empty()) throw Error(ErrorCode::EmptyInput, "no landmark pairs");
  std::vector<Vec3> diffs;
  diffs.reserve(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) diffs.push_back(virt[i].position - real[i].position);
  return misalignment_from_differences(diffs);
}

struct DistanceCheck {
  std::vector<double> errors;  // | ||x_a - x_b|| - expected |, mm
  double mean_error = 0.0;
};

inline DistanceCheck distance_check(std::span<const Landmark> landmarks,
                                    std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                    std::span<const double> expected_mm) {
  if (pairs.size() != expected_mm.size())
    throw Error(ErrorCode::LengthMismatch, "one expected distance per pair is required");
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no pairs to check");
  DistanceCheck out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [a, b] = pairs[i];
    if (a >= landmarks.size() || b >= landmarks.size())
      throw Error(ErrorCode::IndexOutOfRange, "landmark index out of range");
    out.errors.push_back(
        std::abs((landmarks[a].position - landmarks[b].position).norm() - expected_mm[i]));
  }
  for (double e : out.errors) out.mean_error += e;
  out.mean_error /= static_cast<double>(out.errors.size());
  return out;
}

}  // namespace viraal
