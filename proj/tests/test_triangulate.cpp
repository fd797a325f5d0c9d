#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "viraal/triangulate.hpp"

using namespace viraal;

namespace {

std::vector<Landmark> landmarks(std::initializer_list<Vec3> pts, LandmarkSource s = LandmarkSource::Real) {
  std::vector<Landmark> out;
  for (const auto& p : pts) out.push_back({p, s, {}});
  return out;
}

std::vector<Ray> noisy_rays(std::mt19937_64& rng, const Vec3& target, int count, double noise_deg) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Ray> rays;
  for (int i = 0; i < count; ++i) {
    const Vec3 origin = target + 500.0 * oracle::random_unit(rng);
    const Vec3 dir = so3_exp(deg2rad(noise_deg) * Vec3(n(rng), n(rng), n(rng))) * (target - origin).normalized();
    rays.push_back(Ray::through(origin, dir));
  }
  return rays;
}

}  // namespace

TEST(IntersectRays, ExactCrossing) {
  const std::vector<Ray> rays{Ray::through({0, 0, 0}, {1, 1, 0}), Ray::through({2, 0, 0}, {-1, 1, 0})};
  const auto r = intersect_rays(rays);
  EXPECT_LT((r.point - Vec3(1, 1, 0)).norm(), 1e-12);
  EXPECT_LT(r.residual, 1e-20);
}

TEST(IntersectRays, SkewRaysGiveCommonPerpendicularMidpoint) {
  const std::vector<Ray> rays{Ray::through({0, 0, 0}, {0, 0, 1}), Ray::through({1, -5, 0}, {0, 1, 0})};
  const auto r = intersect_rays(rays);
  EXPECT_LT((r.point - Vec3(0.5, 0, 0)).norm(), 1e-12);
  EXPECT_NEAR(r.residual, 0.5, 1e-12);
}

TEST(IntersectRays, ParallelRaysAreDegenerate) {
  const std::vector<Ray> rays{Ray::through({0, 0, 0}, {0, 0, 1}), Ray::through({1, 0, 0}, {0, 0, 1})};
  try {
    intersect_rays(rays);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateRays);
  }
  const std::vector<Ray> nearly{Ray::through({0, 0, 0}, {0, 0, 1}), Ray::through({1, 0, 0}, {1e-6, 0, 1})};
  EXPECT_THROW(intersect_rays(nearly), Error);
}

TEST(IntersectRays, NeedsTwoRays) {
  const std::vector<Ray> one{Ray::through({0, 0, 0}, {0, 0, 1})};
  EXPECT_THROW(intersect_rays(one), Error);
}

TEST(IntersectRays, FourNoisyRaysMatchCoordinateDescent) {
  std::mt19937_64 rng(19);
  const Vec3 target(10, 20, 30);
  for (int k = 0; k < 20; ++k) {
    const auto rays = noisy_rays(rng, target, 4, 1.0);
    const Vec3 ref = oracle::coordinate_descent(rays, Vec3::Zero());
    const auto r = intersect_rays(rays);
    EXPECT_LT((r.point - ref).norm(), 1e-6);
    EXPECT_NEAR(r.residual, oracle::perp_objective(rays, ref), 1e-6);
  }
}

TEST(IntersectRays, RigidInvariance) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 50; ++k) {
    const auto rays = noisy_rays(rng, Vec3(100, -40, 700), 3, 2.0);
    const RigidTransform t{oracle::random_rotation(rng), 300.0 * oracle::random_unit(rng)};
    std::vector<Ray> moved;
    for (const auto& r : rays) moved.push_back(r.transformed(t));
    EXPECT_LT((intersect_rays(moved).point - t.apply(intersect_rays(rays).point)).norm(), 1e-9);
  }
}

TEST(IntersectRays, OriginSlidingInvariance) {
  std::mt19937_64 rng(22);
  const auto rays = noisy_rays(rng, Vec3(-5, 5, 50), 3, 2.0);
  const Vec3 p0 = intersect_rays(rays).point;
  std::vector<Ray> slid = rays;
  for (auto& r : slid) r.origin = r.at(std::uniform_real_distribution<double>(-300, 300)(rng));
  EXPECT_LT((intersect_rays(slid).point - p0).norm(), 1e-9);
}

TEST(TriangulateLandmark, CarriesSourceAndLabel) {
  const std::vector<Ray> rays{Ray::through({0, 0, 0}, {1, 1, 0}), Ray::through({2, 0, 0}, {-1, 1, 0})};
  const Landmark l = triangulate_landmark(rays, LandmarkSource::Virtual, "tip");
  EXPECT_EQ(l.source, LandmarkSource::Virtual);
  EXPECT_EQ(l.label, "tip");
}

TEST(PairMisalignment, IdenticalListsAreZero) {
  const auto a = landmarks({{1, 2, 3}, {4, 5, 6}});
  const auto r = pair_misalignment(a, a);
  EXPECT_EQ(r.mean, Vec3::Zero());
  EXPECT_EQ(r.stddev, Vec3::Zero());
  EXPECT_EQ(r.l2_mean, 0.0);
  EXPECT_EQ(r.count, 2u);
}

TEST(PairMisalignment, ConstantOffsetRow) {
  const Vec3 off(9.00, 10.3, 9.18);
  const auto real = landmarks({{0, 0, 0}, {150, 20, -30}, {40, 300, 80}});
  std::vector<Landmark> virt = real;
  for (auto& l : virt) l.position += off;
  const auto r = pair_misalignment(real, virt);
  EXPECT_LT((r.mean - off).norm(), 1e-12);
  EXPECT_LT(r.stddev.norm(), 1e-12);
  EXPECT_NEAR(r.l2_mean, std::sqrt(9.0 * 9.0 + 10.3 * 10.3 + 9.18 * 9.18), 1e-12);
  EXPECT_NEAR(r.l2_mean, 16.5, 0.05);
}

TEST(PairMisalignment, ThreePairsHandComputed) {
  const auto real = landmarks({{0, 0, 0}, {10, 10, 10}, {20, 0, 5}});
  const auto virt = landmarks({{1, -2, 3}, {14, 15, 4}, {13, 8, 14}}, LandmarkSource::Virtual);
  // |differences| = (1,2,3), (4,5,6), (7,8,9)
  const auto r = pair_misalignment(real, virt);
  EXPECT_LT((r.mean - Vec3(4, 5, 6)).norm(), 1e-9);
  const double s = std::sqrt(6.0);
  EXPECT_LT((r.stddev - Vec3(s, s, s)).norm(), 1e-9);
  EXPECT_NEAR(r.l2_mean, std::sqrt(77.0), 1e-9);
  EXPECT_NEAR(r.l2_std, std::sqrt(18.0), 1e-9);
  EXPECT_EQ(r.difference_mode, "absolute");
}

TEST(PairMisalignment, L2IsNormOfPerAxisMeans) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> n(0, 20);
  std::vector<Landmark> real, virt;
  for (int i = 0; i < 12; ++i) {
    real.push_back({Vec3(n(rng), n(rng), n(rng)), LandmarkSource::Real, {}});
    virt.push_back({Vec3(n(rng), n(rng), n(rng)), LandmarkSource::Virtual, {}});
  }
  const auto r = pair_misalignment(real, virt);
  EXPECT_EQ(r.l2_mean, r.mean.norm());
  EXPECT_EQ(r.l2_std, r.stddev.norm());
}

TEST(PairMisalignment, LengthMismatch) {
  try {
    pair_misalignment(landmarks({{0, 0, 0}}), landmarks({{0, 0, 0}, {1, 1, 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(DistanceCheck, Trivial) {
  const auto l = landmarks({{0, 0, 0}, {100, 0, 0}, {103.6, 0, 0}});
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {0, 2}};
  const std::vector<double> expected{100.0, 100.0};
  const auto c = distance_check(l, pairs, expected);
  EXPECT_NEAR(c.errors[0], 0.0, 1e-12);
  EXPECT_NEAR(c.errors[1], 3.6, 1e-12);
  EXPECT_NEAR(c.mean_error, 1.8, 1e-12);
}

TEST(DistanceCheck, RandomConfigurationMatchesNorms) {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> n(0, 100);
  std::vector<Landmark> l;
  for (int i = 0; i < 6; ++i) l.push_back({Vec3(n(rng), n(rng), n(rng)), LandmarkSource::Real, {}});
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {2, 3}, {4, 5}, {1, 4}};
  const std::vector<double> expected{50, 100, 150, 200};
  const auto c = distance_check(l, pairs, expected);
  double sum = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec3 d = l[pairs[i].first].position - l[pairs[i].second].position;
    const double ref = std::abs(std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z()) - expected[i]);
    EXPECT_NEAR(c.errors[i], ref, 1e-9);
    sum += ref;
  }
  EXPECT_NEAR(c.mean_error, sum / 4.0, 1e-9);
}

TEST(DistanceCheck, IndexOutOfRange) {
  const auto l = landmarks({{0, 0, 0}});
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 3}};
  const std::vector<double> expected{1.0};
  try {
    distance_check(l, pairs, expected);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
}
