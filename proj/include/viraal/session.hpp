#pragma once

// Alignment session state machine: record trials, finalize the averaged
// virtual-to-real registration, evaluate it on landmark pairs, then guide
// and score the joint-by-joint set-up.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "viraal/camera.hpp"
#include "viraal/manifold.hpp"
#include "viraal/robot.hpp"
#include "viraal/triangulate.hpp"

namespace viraal {

inline constexpr const char* kSessionSchema = "viraal.session/1";
inline constexpr std::size_t kSuggestedTrials = 3;

/// Milliseconds since session start.
using Clock = std::function<std::int64_t()>;

/// Wall clock relative to the moment it is created.
inline Clock steady_clock_from_now() {
  const auto t0 = std::chrono::steady_clock::now();
  return [t0] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
        .count();
  };
}

/// Deterministic clock advancing `step_ms` per reading.
inline Clock manual_clock(std::int64_t step_ms = 1000) {
  auto now = std::make_shared<std::int64_t>(0);
  return [now, step_ms] { return *now += step_ms; };
}

struct AlignmentTrial {
  std::size_t index = 0;
  RigidTransform transform;
  JointConfig config;
  int mirrors = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool operator==(const AlignmentTrial&) const = default;
};

struct RegistrationResult {
  RigidTransform mean;
  std::vector<double> rotation_deviation_rad;
  std::vector<double> translation_deviation_mm;
  std::size_t trial_count = 0;

  bool operator==(const RegistrationResult&) const = default;
};

struct GuidanceStep {
  std::size_t joint = 0;
  double target_deg = 0.0;
  bool done = false;

  bool operator==(const GuidanceStep&) const = default;
};

struct GuidancePlan {
  JointConfig target;
  std::vector<GuidanceStep> steps;  // base to tip
  std::int64_t created_ms = 0;

  bool complete() const {
    return std::all_of(steps.begin(), steps.end(), [](const GuidanceStep& s) { return s.done; });
  }

  /// First pending step in chain order.
  std::optional<std::size_t> next_pending() const {
    for (std::size_t i = 0; i < steps.size(); ++i)
      if (!steps[i].done) return i;
    return std::nullopt;
  }

  bool operator==(const GuidancePlan&) const = default;
};

struct EvaluationRecord {
  std::vector<Landmark> real;
  std::vector<Landmark> virtual_;
  MisalignmentReport report;
  std::int64_t at_ms = 0;

  bool operator==(const EvaluationRecord&) const = default;
};

struct ExecutionRecord {
  JointConfig target;
  JointConfig actual;
  JointError error;
  std::int64_t elapsed_ms = 0;
  std::int64_t at_ms = 0;

  bool operator==(const ExecutionRecord&) const = default;
};

/// Everything needed to replay a session without external state.
struct SessionDocument {
  std::string schema = kSessionSchema;
  RobotDescription robot;
  std::optional<SceneMesh> scene;
  std::size_t suggested_trials = kSuggestedTrials;
  std::vector<AlignmentTrial> trials;
  std::optional<RegistrationResult> registration;
  std::optional<RigidTransform> ground_truth;  // revealed after finalize
  std::vector<EvaluationRecord> evaluations;
  std::optional<GuidancePlan> plan;
  std::vector<ExecutionRecord> executions;
};

inline RegistrationResult compute_registration(std::span<const AlignmentTrial> trials) {
  if (trials.empty()) throw Error(ErrorCode::NoTrials, "cannot finalize without trials");
  std::vector<RigidTransform> ts;
  ts.reserve(trials.size());
  for (const auto& t : trials) ts.push_back(t.transform);
  RegistrationResult r;
  r.mean = transform_mean(ts);
  r.trial_count = trials.size();
  for (const auto& t : ts) {
    r.rotation_deviation_rad.push_back(geodesic_distance(r.mean.rotation, t.rotation));
    r.translation_deviation_mm.push_back((t.translation - r.mean.translation).norm());
  }
  return r;
}

/// Maps virtual landmarks through the registration, then compares by index.
inline MisalignmentReport compute_evaluation(const RigidTransform& registration,
                                             std::span<const Landmark> real,
                                             std::span<const Landmark> virt) {
  if (real.size() != virt.size())
    throw Error(ErrorCode::LengthMismatch, "real and virtual landmark lists differ in length");
  std::vector<Landmark> mapped(virt.begin(), virt.end());
  for (auto& l : mapped) l.position = registration.apply(l.position);
  return pair_misalignment(real, mapped);
}

class AlignmentSession {
 public:
  explicit AlignmentSession(RobotDescription robot, Clock clock = steady_clock_from_now())
      : clock_(std::move(clock)) {
    robot.validate();
    doc_.robot = std::move(robot);
  }

  AlignmentSession(SessionDocument doc, Clock clock) : doc_(std::move(doc)), clock_(std::move(clock)) {
    doc_.robot.validate();
    if (!doc_.trials.empty()) last_ms_ = doc_.trials.back().end_ms;
  }

  const SessionDocument& document() const { return doc_; }
  SessionDocument& document() { return doc_; }
  bool finalized() const { return doc_.registration.has_value(); }
  std::size_t trial_count() const { return doc_.trials.size(); }

  void set_scene(SceneMesh mesh) {
    mesh.validate();
    doc_.scene = std::move(mesh);
  }

  /// Marks the start of the next alignment trial.
  void begin_trial() { pending_start_ = now(); }

  const AlignmentTrial& record_trial(const RigidTransform& transform, const JointConfig& config,
                                     int mirrors) {
    if (finalized()) throw Error(ErrorCode::SessionFinalized, "session registration is already final");
    if (config.size() != doc_.robot.dof())
      throw Error(ErrorCode::LengthMismatch, "trial configuration length does not match the robot");
    if (mirrors < 0) throw Error(ErrorCode::InvalidArgument, "mirror count must be non-negative");
    AlignmentTrial t;
    t.index = doc_.trials.size();
    t.transform = transform;
    t.config = config;
    t.mirrors = mirrors;
    const std::int64_t prev_end = doc_.trials.empty() ? 0 : doc_.trials.back().end_ms;
    t.start_ms = pending_start_.value_or(prev_end);
    // strictly increasing end stamps at 1 ms resolution
    t.end_ms = std::max({now(), t.start_ms, doc_.trials.empty() ? std::int64_t{0} : prev_end + 1});
    pending_start_.reset();
    doc_.trials.push_back(std::move(t));
    return doc_.trials.back();
  }

  /// Idempotent: later calls return the stored result.
  const RegistrationResult& finalize_registration() {
    if (!doc_.registration) doc_.registration = compute_registration(doc_.trials);
    return *doc_.registration;
  }

  const MisalignmentReport& evaluate_registration(std::span<const Landmark> real,
                                                  std::span<const Landmark> virt) {
    require_finalized();
    EvaluationRecord rec;
    rec.report = compute_evaluation(doc_.registration->mean, real, virt);
    rec.real.assign(real.begin(), real.end());
    rec.virtual_.assign(virt.begin(), virt.end());
    rec.at_ms = now();
    doc_.evaluations.push_back(std::move(rec));
    return doc_.evaluations.back().report;
  }

  const GuidancePlan& make_guidance_plan(const JointConfig& target) {
    require_finalized();
    if (target.size() != doc_.robot.dof())
      throw Error(ErrorCode::LengthMismatch, "target configuration length does not match the robot");
    GuidancePlan plan;
    plan.target = target;
    for (std::size_t j = 0; j < target.size(); ++j) plan.steps.push_back({j, target.degrees[j], false});
    plan.created_ms = now();
    doc_.plan = std::move(plan);
    return *doc_.plan;
  }

  const GuidancePlan& mark_step_done(std::size_t step) {
    if (!doc_.plan) throw Error(ErrorCode::NoPlan, "no guidance plan");
    if (step >= doc_.plan->steps.size()) throw Error(ErrorCode::IndexOutOfRange, "step index out of range");
    doc_.plan->steps[step].done = true;
    return *doc_.plan;
  }

  const ExecutionRecord& score_execution(const JointConfig& actual) {
    if (!doc_.plan) throw Error(ErrorCode::NoPlan, "no guidance plan to score against");
    ExecutionRecord rec;
    rec.error = joint_config_error(doc_.plan->target, actual);
    rec.target = doc_.plan->target;
    rec.actual = actual;
    rec.at_ms = now();
    rec.elapsed_ms = rec.at_ms - doc_.plan->created_ms;
    doc_.executions.push_back(std::move(rec));
    return doc_.executions.back();
  }

 private:
  void require_finalized() const {
    if (!finalized()) throw Error(ErrorCode::NotFinalized, "registration has not been finalized");
  }

  std::int64_t now() {
    last_ms_ = std::max(last_ms_, clock_());
    return last_ms_;
  }

  SessionDocument doc_;
  Clock clock_;
  std::optional<std::int64_t> pending_start_;
  std::int64_t last_ms_ = 0;
};

/// Recomputes every derived number of a document from its raw inputs.
struct ReplayResult {
  std::optional<RegistrationResult> registration;
  std::vector<MisalignmentReport> evaluations;
  std::vector<JointError> executions;

  bool matches(const SessionDocument& doc) const {
    if (registration != doc.registration) return false;
    if (evaluations.size() != doc.evaluations.size() || executions.size() != doc.executions.size())
      return false;
    for (std::size_t i = 0; i < evaluations.size(); ++i)
      if (!(evaluations[i] == doc.evaluations[i].report)) return false;
    for (std::size_t i = 0; i < executions.size(); ++i)
      if (!(executions[i] == doc.executions[i].error)) return false;
    return true;
  }
};

inline ReplayResult replay_session(const SessionDocument& doc) {
  ReplayResult r;
  if (doc.registration) r.registration = compute_registration(doc.trials);
  for (const auto& e : doc.evaluations) {
    if (!r.registration) throw Error(ErrorCode::NotFinalized, "evaluation recorded without a registration");
    r.evaluations.push_back(compute_evaluation(r.registration->mean, e.real, e.virtual_));
  }
  for (const auto& x : doc.executions) r.executions.push_back(joint_config_error(x.target, x.actual));
  return r;
}

}  // namespace viraal
