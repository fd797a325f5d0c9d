#pragma once

// Serial manipulator model: forward kinematics, twisting/revolving joint
// taxonomy and joint-configuration error metrics. Angles are degrees at the
// interface and radians internally.

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viraal/manifold.hpp"
#include "viraal/stats.hpp"

namespace viraal {

struct JointSpec {
  std::string name;
  RigidTransform fixed;          // parent link frame -> joint frame
  Vec3 axis = Vec3::UnitZ();     // unit, joint frame
  double lower_deg = -180.0;
  double upper_deg = 180.0;
  Vec3 link = Vec3::Zero();      // joint frame -> child frame offset, mm

  bool operator==(const JointSpec&) const = default;
};

struct RobotDescription {
  std::string name;
  RigidTransform base;
  std::vector<JointSpec> joints;
  std::vector<std::string> link_meshes;  // optional, one per link

  std::size_t dof() const { return joints.size(); }

  void validate() const {
    if (joints.empty()) throw Error(ErrorCode::SchemaError, "robot needs at least one joint");
    if (!link_meshes.empty() && link_meshes.size() != joints.size())
      throw Error(ErrorCode::SchemaError, "link_meshes must list one entry per link");
    for (const auto& j : joints) {
      if (std::abs(j.axis.norm() - 1.0) > 1e-9)
        throw Error(ErrorCode::SchemaError, "joint '" + j.name + "' axis is not unit length");
      if (!(j.lower_deg < j.upper_deg))
        throw Error(ErrorCode::SchemaError, "joint '" + j.name + "' limits need lo < hi");
      if (!j.link.allFinite() || !j.fixed.translation.allFinite())
        throw Error(ErrorCode::SchemaError, "joint '" + j.name + "' offsets are not finite");
    }
  }

  bool operator==(const RobotDescription&) const = default;
};

/// Joint angles in degrees, one per joint.
struct JointConfig {
  std::vector<double> degrees;

  std::size_t size() const { return degrees.size(); }
  static JointConfig zeros(std::size_t n) { return {std::vector<double>(n, 0.0)}; }

  bool operator==(const JointConfig&) const = default;
};

inline bool within_limits(const RobotDescription& desc, const JointConfig& q) {
  if (q.size() != desc.dof()) return false;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q.degrees[i] < desc.joints[i].lower_deg || q.degrees[i] > desc.joints[i].upper_deg) return false;
  return true;
}

/// fixed_j * rot(axis_j, q_j) * trans(link_j)
inline RigidTransform joint_transform(const JointSpec& j, double q_deg) {
  return j.fixed * RigidTransform{Rotation::about_axis(j.axis, deg2rad(q_deg)), Vec3::Zero()} *
         RigidTransform::from_translation(j.link);
}

/// Chains `joints` from `start`; entry k is the frame at the end of link k.
inline std::vector<RigidTransform> chain_poses(const RigidTransform& start,
                                               std::span<const JointSpec> joints,
                                               std::span<const double> q_deg) {
  if (joints.size() != q_deg.size())
    throw Error(ErrorCode::LengthMismatch, "joint configuration length does not match the chain");
  std::vector<RigidTransform> poses;
  poses.reserve(joints.size());
  RigidTransform t = start;
  for (std::size_t k = 0; k < joints.size(); ++k) {
    t = t * joint_transform(joints[k], q_deg[k]);
    poses.push_back(t);
  }
  return poses;
}

/// Link poses in the world frame; the last entry is the end effector.
inline std::vector<RigidTransform> forward_kinematics(const RobotDescription& desc, const JointConfig& q) {
  return chain_poses(desc.base, desc.joints, q.degrees);
}

/// Joint origins (after the fixed transform) followed by the end effector;
/// the polyline used to draw a stick-figure robot.
inline std::vector<Vec3> skeleton_points(const RobotDescription& desc, const JointConfig& q) {
  const auto poses = forward_kinematics(desc, q);
  std::vector<Vec3> pts;
  pts.push_back(desc.base.translation);
  RigidTransform parent = desc.base;
  for (std::size_t k = 0; k < desc.dof(); ++k) {
    pts.push_back((parent * desc.joints[k].fixed).translation);
    parent = poses[k];
  }
  pts.push_back(poses.back().translation);
  return pts;
}

enum class JointClass { Twisting, Revolving };

inline constexpr double kTwistThresholdDeg = 45.0;

/// Twisting when the axis is within 45 deg of the link (sign-agnostic).
/// A null link borrows the next non-null offset along the chain at the zero
/// configuration.
inline JointClass classify_joint(const RobotDescription& desc, std::size_t idx) {
  if (idx >= desc.dof()) throw Error(ErrorCode::IndexOutOfRange, "joint index out of range");
  const JointSpec& j = desc.joints[idx];
  Vec3 link = j.link;
  if (link.norm() < 1e-12) {
    // Walk forward in the joint frame at zero angles.
    RigidTransform acc = RigidTransform::from_translation(j.link);
    for (std::size_t k = idx + 1; k < desc.dof() && link.norm() < 1e-12; ++k) {
      acc = acc * desc.joints[k].fixed;
      if (acc.translation.norm() >= 1e-12) {
        link = acc.translation;
        break;
      }
      acc = acc * RigidTransform::from_translation(desc.joints[k].link);
      link = acc.translation;
    }
    if (link.norm() < 1e-12)
      throw Error(ErrorCode::ZeroLink, "joint '" + j.name + "' has no non-null link to classify against");
  }
  const double c = std::abs(j.axis.normalized().dot(link.normalized()));
  const double angle = rad2deg(std::acos(std::min(1.0, c)));
  return angle < kTwistThresholdDeg ? JointClass::Twisting : JointClass::Revolving;
}

inline std::vector<JointClass> classify_joints(const RobotDescription& desc) {
  std::vector<JointClass> out;
  for (std::size_t i = 0; i < desc.dof(); ++i) out.push_back(classify_joint(desc, i));
  return out;
}

struct JointError {
  std::vector<std::size_t> joints;  // indices reported
  std::vector<double> per_joint_deg;
  double total_deg = 0.0;
  Summary summary;

  bool operator==(const JointError&) const = default;
};

/// |target_j - actual_j| without angular wrapping. `subset` restricts the
/// reported joints (all when empty).
inline JointError joint_config_error(const JointConfig& target, const JointConfig& actual,
                                     std::span<const std::size_t> subset = {}) {
  if (target.size() != actual.size())
    throw Error(ErrorCode::LengthMismatch, "target and actual configurations differ in length");
  if (target.size() == 0) throw Error(ErrorCode::EmptyInput, "empty joint configuration");
  JointError e;
  if (subset.empty()) {
    for (std::size_t i = 0; i < target.size(); ++i) e.joints.push_back(i);
  } else {
    e.joints.assign(subset.begin(), subset.end());
  }
  for (std::size_t i : e.joints) {
    if (i >= target.size()) throw Error(ErrorCode::IndexOutOfRange, "joint index out of range");
    e.per_joint_deg.push_back(std::abs(target.degrees[i] - actual.degrees[i]));
  }
  for (double d : e.per_joint_deg) e.total_deg += d;
  e.summary = summarize(e.per_joint_deg);
  return e;
}

inline std::string_view to_string(JointClass c) {
  return c == JointClass::Twisting ? "twisting" : "revolving";
}

}  // namespace viraal
