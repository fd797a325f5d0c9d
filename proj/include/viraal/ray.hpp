#pragma once

#include <cmath>

#include "viraal/manifold.hpp"

namespace viraal {

/// Half-line h + s u (s >= 0). Origin in mm, direction unit length.
struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  /// Normalizes `direction`; throws on a null or non-finite direction.
  static Ray through(const Vec3& origin, const Vec3& direction) {
    const double n = direction.norm();
    if (!origin.allFinite() || !std::isfinite(n) || n < 1e-300)
      throw Error(ErrorCode::InvalidArgument, "ray needs a finite origin and a non-null direction");
    return {origin, direction / n};
  }

  Vec3 at(double s) const { return origin + s * direction; }

  Ray transformed(const RigidTransform& t) const {
    return {t.apply(origin), t.rotation * direction};
  }
};

}  // namespace viraal
