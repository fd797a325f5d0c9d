#pragma once

// Pinhole observer frustum, the reversed ("mirror") frustum placed a distance
// D along the observer's principal ray, projection, pixel lifting and gaze
// picking against a triangle mesh.
//
// Pixel convention: origin at the principal point offset (cx, cy), x right,
// y down, camera z pointing away from the camera along the principal ray.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "viraal/manifold.hpp"
#include "viraal/ray.hpp"

namespace viraal {

using Vec2 = Eigen::Vector2d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  static CameraIntrinsics identity() { return {}; }

  void validate() const {
    if (!(fx > 0.0) || !std::isfinite(fx))
      throw Error(ErrorCode::InvalidArgument, "intrinsics need fx > 0");
    if (!(fy != 0.0) || !std::isfinite(fy))
      throw Error(ErrorCode::InvalidArgument, "intrinsics need fy != 0");
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew))
      throw Error(ErrorCode::InvalidArgument, "intrinsics are not finite");
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, skew, cx,
         0.0, fy, cy,
         0.0, 0.0, 1.0;
    return k;
  }

  /// diag(1, -1, 1) * K: the mirror intrinsics.
  CameraIntrinsics flipped_y() const { return {fx, -fy, cx, -cy, skew}; }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Maps operating-room (world) coordinates into the camera frame.
struct ObserverPose {
  RigidTransform world_to_camera;

  Vec3 center() const { return world_to_camera.inverse().translation; }

  /// Camera +z expressed in world coordinates.
  Vec3 principal_axis() const { return world_to_camera.rotation.inverse() * Vec3::UnitZ(); }

  /// Pose of a camera at `center` whose +z axis points towards `target`.
  static ObserverPose look_at(const Vec3& center, const Vec3& target, const Vec3& up = Vec3::UnitZ());

  bool operator==(const ObserverPose&) const = default;
};

inline ObserverPose ObserverPose::look_at(const Vec3& center, const Vec3& target, const Vec3& up) {
  const Vec3 z = target - center;
  if (z.norm() < 1e-12) throw Error(ErrorCode::InvalidArgument, "look_at target equals center");
  const Vec3 zn = z.normalized();
  Vec3 x = zn.cross(up);
  if (x.norm() < 1e-9) x = zn.cross(std::abs(zn.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
  x.normalize();
  // camera y points "down" in the image, so y = z x x
  const Vec3 y = zn.cross(x);
  Mat3 cam_to_world;
  cam_to_world.col(0) = x;
  cam_to_world.col(1) = y;
  cam_to_world.col(2) = zn;
  const RigidTransform c2w{Rotation::project(cam_to_world), center};
  return {c2w.inverse()};
}

enum class ProjectionRole { Observer, Mirror };

struct ProjectionMatrix {
  Mat34 matrix = Mat34::Zero();
  ProjectionRole role = ProjectionRole::Observer;
};

struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;  // third homogeneous coordinate; negative behind the camera

  bool behind_camera() const { return depth < 0.0; }
};

inline Mat34 extrinsic_matrix(const RigidTransform& t) {
  Mat34 e;
  e.leftCols<3>() = t.rotation.matrix();
  e.col(3) = t.translation;
  return e;
}

/// K [R | t] of the observer frustum.
inline ProjectionMatrix observer_projection(const CameraIntrinsics& k, const ObserverPose& pose) {
  k.validate();
  return {k.matrix() * extrinsic_matrix(pose.world_to_camera), ProjectionRole::Observer};
}

/// Local reversal applied in the observer camera frame: a half turn about x
/// followed by a shift of D along the principal ray.
inline RigidTransform mirror_reversal(double distance_mm) {
  if (!(distance_mm > 0.0) || !std::isfinite(distance_mm))
    throw Error(ErrorCode::NonPositiveDistance, "mirror distance must be positive");
  Mat3 rx;
  rx << 1.0, 0.0, 0.0,
        0.0, -1.0, 0.0,
        0.0, 0.0, -1.0;
  return {Rotation::unchecked(rx), Vec3(0.0, 0.0, distance_mm)};
}

/// World-to-camera pose of the reversed frustum. Its center lies D along the
/// observer principal ray and it looks back towards the observer.
inline ObserverPose mirror_pose(const ObserverPose& observer, double distance_mm) {
  return {mirror_reversal(distance_mm) * observer.world_to_camera};
}

/// K_m [reversed extrinsic], K_m = diag(1, -1, 1) K_o.
inline ProjectionMatrix mirror_projection(const CameraIntrinsics& k_observer,
                                          const ObserverPose& observer, double distance_mm) {
  k_observer.validate();
  const ObserverPose m = mirror_pose(observer, distance_mm);
  return {k_observer.flipped_y().matrix() * extrinsic_matrix(m.world_to_camera),
          ProjectionRole::Mirror};
}

inline Projection project(const ProjectionMatrix& p, const Vec3& x) {
  if (!x.allFinite()) throw Error(ErrorCode::InvalidArgument, "point is not finite");
  const Vec3 h = p.matrix * x.homogeneous();
  if (std::abs(h.z()) < 1e-12)
    throw Error(ErrorCode::AtOpticalCenter, "point projects with vanishing homogeneous scale");
  return {h.head<2>() / h.z(), h.z()};
}

/// Ray from the camera center through pixel `px`, in world coordinates.
inline Ray pixel_to_ray(const CameraIntrinsics& k, const ObserverPose& pose, const Vec2& px) {
  k.validate();
  // K is upper triangular; back-substitute K d = (u, v, 1).
  const double dy = (px.y() - k.cy) / k.fy;
  const double dx = (px.x() - k.cx - k.skew * dy) / k.fx;
  const Vec3 d_cam(dx, dy, 1.0);
  const Rotation cam_to_world = pose.world_to_camera.rotation.inverse();
  return Ray::through(pose.center(), cam_to_world * d_cam);
}

/// A reflective display: the observer rig frozen at creation together with
/// the gaze-derived distance D.
struct MirrorView {
  CameraIntrinsics observer_intrinsics;
  ObserverPose observer;
  double distance_mm = 0.0;

  CameraIntrinsics intrinsics() const { return observer_intrinsics.flipped_y(); }
  ObserverPose pose() const { return mirror_pose(observer, distance_mm); }
  ProjectionMatrix projection() const {
    return mirror_projection(observer_intrinsics, observer, distance_mm);
  }
  Vec3 center() const { return pose().center(); }
};

struct Triangle {
  Vec3 a, b, c;
};

struct SceneMesh {
  std::vector<Triangle> triangles;

  void validate() const {
    if (triangles.empty()) throw Error(ErrorCode::InvalidArgument, "scene mesh has no triangles");
    for (const auto& t : triangles)
      if (!t.a.allFinite() || !t.b.allFinite() || !t.c.allFinite())
        throw Error(ErrorCode::InvalidArgument, "scene mesh has non-finite vertices");
  }

  /// Triangle soup text: one triangle per line as nine numbers
  /// "ax ay az bx by bz cx cy cz" (mm). Blank lines and '#' comments ignored.
  static SceneMesh parse_triangle_soup(std::istream& in) {
    SceneMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::array<double, 9> v{};
      int n = 0;
      double value = 0.0;
      while (ls >> value) {
        if (n == 9) throw Error(ErrorCode::SchemaError, "too many values on line " + std::to_string(lineno));
        v[static_cast<std::size_t>(n++)] = value;
      }
      if (!ls.eof()) throw Error(ErrorCode::SchemaError, "unparsable value on line " + std::to_string(lineno));
      if (n == 0) continue;
      if (n != 9) throw Error(ErrorCode::SchemaError, "expected 9 values on line " + std::to_string(lineno));
      mesh.triangles.push_back({Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]), Vec3(v[6], v[7], v[8])});
    }
    mesh.validate();
    return mesh;
  }

  static SceneMesh load_triangle_soup(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open mesh file " + path);
    return parse_triangle_soup(in);
  }
};

struct MeshHit {
  double distance = 0.0;
  std::size_t triangle = 0;
};

inline constexpr double kIntersectEpsilon = 1e-9;

/// Moller-Trumbore; returns the ray parameter of the hit if it is > epsilon.
inline std::optional<double> intersect_triangle(const Ray& ray, const Triangle& tri) {
  const Vec3 e1 = tri.b - tri.a;
  const Vec3 e2 = tri.c - tri.a;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < kIntersectEpsilon) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - tri.a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t > kIntersectEpsilon) return t;
  return std::nullopt;
}

/// Nearest positive hit; ties go to the lowest triangle index.
inline std::optional<MeshHit> pick(const Ray& ray, const SceneMesh& mesh) {
  std::optional<MeshHit> best;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    if (const auto t = intersect_triangle(ray, mesh.triangles[i]); t && (!best || *t < best->distance))
      best = MeshHit{*t, i};
  }
  return best;
}

/// Distance D from the ray origin to the first surface the gaze hits (mm).
inline double gaze_distance(const Ray& ray, const SceneMesh& mesh) {
  if (std::abs(ray.direction.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "gaze direction must be unit length");
  const auto hit = pick(ray, mesh);
  if (!hit) throw Error(ErrorCode::NoHit, "gaze ray does not hit the scene mesh");
  return hit->distance;
}

/// Freezes a mirror for `observer`, sampling D along its principal ray.
inline MirrorView make_mirror(const CameraIntrinsics& k, const ObserverPose& observer,
                              const SceneMesh& mesh) {
  k.validate();
  const Ray gaze{observer.center(), observer.principal_axis().normalized()};
  return {k, observer, gaze_distance(gaze, mesh)};
}

}  // namespace viraal
