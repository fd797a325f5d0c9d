#pragma once

// Monte Carlo model of interactive alignment. Each view observes the true
// pose with Gaussian error whose spread along that view's line of sight is k
// times the lateral spread; the user's alignment is the information-weighted
// fusion of all active views. All magnitudes produced here are simulated.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "viraal/camera.hpp"
#include "viraal/manifold.hpp"
#include "viraal/stats.hpp"
#include "viraal/triangulate.hpp"

namespace viraal {

struct NoiseModel {
  double lateral_sigma_mm = 5.0;
  double depth_multiplier = 3.0;
  double rotation_sigma_deg = 2.0;

  void validate() const {
    if (!(lateral_sigma_mm >= 0.0) || !(rotation_sigma_deg >= 0.0))
      throw Error(ErrorCode::InvalidArgument, "noise sigmas must be non-negative");
    if (!(depth_multiplier >= 1.0))
      throw Error(ErrorCode::InvalidArgument, "depth multiplier must be >= 1");
  }
};

/// Default ground truth and a ladder of mutually orthogonal views onto it.
inline RigidTransform default_truth() {
  return {so3_exp(Vec3(0.05, -0.10, 0.30)), Vec3(600.0, 150.0, 900.0)};
}

inline std::vector<ObserverPose> default_views(const Vec3& target, double distance_mm = 1500.0) {
  return {
      ObserverPose::look_at(target - Vec3(0.0, distance_mm, 0.0), target),  // front
      ObserverPose::look_at(target - Vec3(distance_mm, 0.0, 0.0), target),  // side
      ObserverPose::look_at(target + Vec3(0.0, 0.0, distance_mm), target),  // top
  };
}

struct ExperimentConfig {
  std::string label = "experiment";
  std::size_t trials = 1000;
  std::uint64_t seed = 42;
  std::size_t views = 1;
  std::size_t averaging_n = 1;
  RigidTransform truth = default_truth();
  std::vector<ObserverPose> observers = default_views(default_truth().translation);
  unsigned threads = 1;

  void validate() const {
    if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
    if (views < 1) throw Error(ErrorCode::NoViews, "at least one view is required");
    if (averaging_n < 1) throw Error(ErrorCode::InvalidArgument, "averaging N must be >= 1");
    if (observers.size() < views)
      throw Error(ErrorCode::InvalidArgument, "fewer observer poses than requested views");
  }
};

/// Line of sight from the observer to `target` (principal axis if they coincide).
inline Vec3 line_of_sight(const ObserverPose& view, const Vec3& target) {
  const Vec3 d = target - view.center();
  return d.norm() > 1e-9 ? Vec3(d.normalized()) : Vec3(view.principal_axis().normalized());
}

/// One simulated interactive alignment of `truth` seen through `views`.
template <class Rng>
RigidTransform sample_user_alignment(const RigidTransform& truth, std::span<const ObserverPose> views,
                                     const NoiseModel& noise, Rng& rng) {
  if (views.empty()) throw Error(ErrorCode::NoViews, "at least one view is required");
  noise.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = noise.lateral_sigma_mm;
  const double k = noise.depth_multiplier;
  const double rot_sigma = deg2rad(noise.rotation_sigma_deg);

  Mat3 info = Mat3::Zero();
  Vec3 weighted = Vec3::Zero();
  std::vector<Rotation> rotations;
  rotations.reserve(views.size());
  for (const auto& view : views) {
    const Vec3 d = line_of_sight(view, truth.translation);
    const Vec3 g(normal(rng), normal(rng), normal(rng));
    const Vec3 obs = truth.translation + sigma * (g + (k - 1.0) * d.dot(g) * d);
    const Vec3 w(normal(rng), normal(rng), normal(rng));
    rotations.push_back(truth.rotation * so3_exp(rot_sigma * w));
    if (sigma > 0.0) {
      const Mat3 dd = d * d.transpose();
      const Mat3 lambda = (Mat3::Identity() - dd) / (sigma * sigma) + dd / (k * k * sigma * sigma);
      info += lambda;
      weighted += lambda * obs;
    }
  }
  RigidTransform out;
  out.translation = sigma > 0.0 ? Vec3(info.ldlt().solve(weighted)) : truth.translation;
  out.rotation = rotation_mean(rotations);
  return out;
}

struct TrialRow {
  std::size_t trial = 0;
  Vec3 translation_error = Vec3::Zero();  // estimate - truth, mm
  double translation_l2 = 0.0;
  double rotation_error_deg = 0.0;

  bool operator==(const TrialRow&) const = default;
};

struct Distribution {
  Summary summary;
  double p05 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;

  bool operator==(const Distribution&) const = default;
};

inline Distribution distribution_of(std::span<const double> v) {
  return {summarize(v), percentile(v, 0.05), percentile(v, 0.5), percentile(v, 0.95)};
}

struct ExperimentReport {
  std::string label;
  std::size_t views = 1;
  std::size_t averaging_n = 1;
  std::uint64_t seed = 0;
  MisalignmentReport per_axis;  // absolute per-axis error, table layout
  Distribution translation_l2;
  Distribution rotation_deg;
  std::vector<TrialRow> rows;

  std::vector<double> translation_errors() const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.translation_l2);
    return v;
  }

  /// Statistics are a pure function of the raw rows.
  void recompute() {
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "report has no trials");
    std::vector<Vec3> diffs;
    std::vector<double> rot;
    for (const auto& r : rows) {
      diffs.push_back(r.translation_error);
      rot.push_back(r.rotation_error_deg);
    }
    per_axis = misalignment_from_differences(diffs);
    translation_l2 = distribution_of(translation_errors());
    rotation_deg = distribution_of(rot);
  }
};

/// Per-trial generator: independent of thread scheduling and trial order.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

inline TrialRow run_trial(const ExperimentConfig& cfg, const NoiseModel& noise, std::size_t trial) {
  auto rng = trial_rng(cfg.seed, trial);
  const std::span<const ObserverPose> views(cfg.observers.data(), cfg.views);
  std::vector<RigidTransform> draws;
  draws.reserve(cfg.averaging_n);
  for (std::size_t i = 0; i < cfg.averaging_n; ++i)
    draws.push_back(sample_user_alignment(cfg.truth, views, noise, rng));
  const RigidTransform est = transform_mean(draws);
  TrialRow row;
  row.trial = trial;
  row.translation_error = est.translation - cfg.truth.translation;
  row.translation_l2 = row.translation_error.norm();
  row.rotation_error_deg = rad2deg(geodesic_distance(est.rotation, cfg.truth.rotation));
  return row;
}

inline ExperimentReport run_alignment_experiment(const ExperimentConfig& cfg, const NoiseModel& noise) {
  cfg.validate();
  noise.validate();
  ExperimentReport report;
  report.label = cfg.label;
  report.views = cfg.views;
  report.averaging_n = cfg.averaging_n;
  report.seed = cfg.seed;
  report.rows.resize(cfg.trials);
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.trials)));
  if (threads == 1) {
    for (std::size_t t = 0; t < cfg.trials; ++t) report.rows[t] = run_trial(cfg, noise, t);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < cfg.trials; t += threads) report.rows[t] = run_trial(cfg, noise, t);
      });
  }
  report.recompute();
  return report;
}

struct Condition {
  std::string label;
  std::size_t views = 1;
  std::size_t averaging_n = 1;
};

/// Single view, two views (one reflective display), two views averaged over N = 3.
inline std::vector<Condition> default_conditions() {
  return {{"single-view", 1, 1}, {"reflective", 2, 1}, {"reflective-avg3", 2, 3}};
}

inline std::vector<ExperimentReport> run_conditions(ExperimentConfig base, const NoiseModel& noise,
                                                    std::span<const Condition> conditions) {
  std::vector<ExperimentReport> out;
  for (const auto& c : conditions) {
    base.label = c.label;
    base.views = c.views;
    base.averaging_n = c.averaging_n;
    out.push_back(run_alignment_experiment(base, noise));
  }
  return out;
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Paired percentile bootstrap of statistic(a*, b*) where a* and b* are
/// resampled with the same indices. `lower` and `upper` are each one-sided
/// bounds at `confidence`.
inline Interval paired_bootstrap(std::span<const double> a, std::span<const double> b,
                                 const std::function<double(std::span<const double>, std::span<const double>)>& statistic,
                                 std::size_t resamples = 2000, std::uint64_t seed = 7,
                                 double confidence = 0.95) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "paired samples differ in length");
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "empty bootstrap sample");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
  std::vector<double> stats;
  stats.reserve(resamples);
  std::vector<double> ra(a.size()), rb(b.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::size_t j = pick(rng);
      ra[i] = a[j];
      rb[i] = b[j];
    }
    stats.push_back(statistic(ra, rb));
  }
  return {percentile(stats, 1.0 - confidence), percentile(stats, confidence)};
}

}  // namespace viraal
