#pragma once

// Structured-text documents: robot descriptions, session documents,
// experiment configurations and simulation reports. All documents carry a
// "schema" tag and explicit units in their key names.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "viraal/camera.hpp"
#include "viraal/manifold.hpp"
#include "viraal/robot.hpp"
#include "viraal/session.hpp"
#include "viraal/sim.hpp"
#include "viraal/triangulate.hpp"

namespace viraal {

using json = nlohmann::json;

inline constexpr const char* kRobotSchema = "viraal.robot/1";
inline constexpr const char* kExperimentSchema = "viraal.experiment/1";
inline constexpr const char* kReportSchema = "viraal.report/1";

namespace io {

inline void require_schema(const json& j, std::string_view expected) {
  if (!j.is_object() || !j.contains("schema") || j.at("schema") != expected)
    throw Error(ErrorCode::SchemaError, "document schema tag must be '" + std::string(expected) + "'");
}

/// Runs `fn`, translating JSON library exceptions into SchemaError.
template <class Fn>
auto guarded(std::string_view what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string(what) + ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return guarded("parse " + path, [&] { return json::parse(in); });
}

inline void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::SchemaError, "expected a 3-vector");
  const Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!v.allFinite()) throw Error(ErrorCode::SchemaError, "3-vector is not finite");
  return v;
}

inline json vec2(const Vec2& v) { return json::array({v.x(), v.y()}); }

inline Vec2 vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::SchemaError, "expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

/// Row-major 3x3 matrix form; lossless for replay.
inline json transform(const RigidTransform& t) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back(json::array({t.rotation.matrix()(r, 0), t.rotation.matrix()(r, 1), t.rotation.matrix()(r, 2)}));
  return {{"rotation", rows}, {"translation_mm", vec(t.translation)}};
}

/// Accepts {"rotation": 3x3 rows} or {"rotation_wxyz": [w,x,y,z]}, plus
/// "translation_mm".
inline RigidTransform transform(const json& j) {
  return guarded("transform", [&] {
    RigidTransform t;
    if (j.contains("rotation")) {
      const json& rows = j.at("rotation");
      if (!rows.is_array() || rows.size() != 3) throw Error(ErrorCode::SchemaError, "rotation needs 3 rows");
      Mat3 m;
      for (int r = 0; r < 3; ++r) {
        const Vec3 row = vec3(rows[static_cast<std::size_t>(r)]);
        m.row(r) = row.transpose();
      }
      t.rotation = Rotation::from_matrix(m);
    } else if (j.contains("rotation_wxyz")) {
      const json& q = j.at("rotation_wxyz");
      if (!q.is_array() || q.size() != 4) throw Error(ErrorCode::SchemaError, "rotation_wxyz needs 4 values");
      t.rotation = Rotation::from_quaternion(
          Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()));
    }
    if (j.contains("translation_mm")) t.translation = vec3(j.at("translation_mm"));
    return t;
  });
}

inline json quaternion_transform(const RigidTransform& t) {
  const Eigen::Quaterniond q = t.rotation.quaternion();
  return {{"rotation_wxyz", json::array({q.w(), q.x(), q.y(), q.z()})},
          {"translation_mm", vec(t.translation)}};
}

inline json intrinsics(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"skew", k.skew}};
}

inline CameraIntrinsics intrinsics(const json& j) {
  return guarded("intrinsics", [&] {
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.value("cx", 0.0);
    k.cy = j.value("cy", 0.0);
    k.skew = j.value("skew", 0.0);
    k.validate();
    return k;
  });
}

inline json projection(const ProjectionMatrix& p) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(p.matrix(r, c));
    rows.push_back(row);
  }
  return {{"matrix", rows}, {"role", p.role == ProjectionRole::Mirror ? "mirror" : "observer"}};
}

inline json mesh(const SceneMesh& m) {
  json tris = json::array();
  for (const auto& t : m.triangles) tris.push_back(json::array({vec(t.a), vec(t.b), vec(t.c)}));
  return {{"triangles_mm", tris}};
}

inline SceneMesh mesh(const json& j) {
  return guarded("scene mesh", [&] {
    SceneMesh m;
    for (const auto& t : j.at("triangles_mm")) {
      if (!t.is_array() || t.size() != 3) throw Error(ErrorCode::SchemaError, "triangle needs 3 vertices");
      m.triangles.push_back({vec3(t[0]), vec3(t[1]), vec3(t[2])});
    }
    m.validate();
    return m;
  });
}

// -- robot description -------------------------------------------------------

inline json robot(const RobotDescription& r) {
  json joints = json::array();
  for (const auto& jt : r.joints)
    joints.push_back({{"name", jt.name},
                      {"fixed_pose", quaternion_transform(jt.fixed)},
                      {"axis", vec(jt.axis)},
                      {"limits_deg", json::array({jt.lower_deg, jt.upper_deg})},
                      {"link_mm", vec(jt.link)}});
  json out = {{"schema", kRobotSchema}, {"name", r.name}, {"base_pose", quaternion_transform(r.base)},
              {"joints", joints}};
  if (!r.link_meshes.empty()) out["link_meshes"] = r.link_meshes;
  return out;
}

inline RobotDescription robot(const json& j) {
  require_schema(j, kRobotSchema);
  return guarded("robot description", [&] {
    RobotDescription r;
    r.name = j.value("name", "");
    if (j.contains("base_pose")) r.base = transform(j.at("base_pose"));
    for (const auto& jj : j.at("joints")) {
      JointSpec s;
      s.name = jj.value("name", "");
      if (jj.contains("fixed_pose")) s.fixed = transform(jj.at("fixed_pose"));
      s.axis = vec3(jj.at("axis"));
      const json& lim = jj.at("limits_deg");
      if (!lim.is_array() || lim.size() != 2) throw Error(ErrorCode::SchemaError, "limits_deg needs [lo, hi]");
      s.lower_deg = lim[0].get<double>();
      s.upper_deg = lim[1].get<double>();
      s.link = vec3(jj.at("link_mm"));
      r.joints.push_back(std::move(s));
    }
    if (j.contains("link_meshes")) r.link_meshes = j.at("link_meshes").get<std::vector<std::string>>();
    r.validate();
    return r;
  });
}

inline RobotDescription load_robot(const std::string& path) { return robot(read_json_file(path)); }

inline json config(const JointConfig& q) { return q.degrees; }

inline JointConfig config(const json& j) {
  return guarded("joint configuration", [&] { return JointConfig{j.get<std::vector<double>>()}; });
}

// -- metrics ----------------------------------------------------------------

inline json landmark(const Landmark& l) {
  return {{"position_mm", vec(l.position)},
          {"source", l.source == LandmarkSource::Real ? "real" : "virtual"},
          {"label", l.label}};
}

inline Landmark landmark(const json& j, LandmarkSource fallback) {
  return guarded("landmark", [&] {
    Landmark l;
    if (j.is_array()) {
      l.position = vec3(j);
      l.source = fallback;
      return l;
    }
    l.position = vec3(j.at("position_mm"));
    const std::string src = j.value("source", fallback == LandmarkSource::Real ? "real" : "virtual");
    if (src != "real" && src != "virtual") throw Error(ErrorCode::SchemaError, "landmark source must be real|virtual");
    l.source = src == "real" ? LandmarkSource::Real : LandmarkSource::Virtual;
    l.label = j.value("label", "");
    return l;
  });
}

inline std::vector<Landmark> landmarks(const json& j, LandmarkSource fallback) {
  if (!j.is_array()) throw Error(ErrorCode::SchemaError, "landmarks must be a list");
  std::vector<Landmark> out;
  for (const auto& e : j) out.push_back(landmark(e, fallback));
  return out;
}

inline json landmarks(const std::vector<Landmark>& ls) {
  json out = json::array();
  for (const auto& l : ls) out.push_back(landmark(l));
  return out;
}

inline json misalignment(const MisalignmentReport& r) {
  return {{"tx_mean_mm", r.mean.x()}, {"tx_std_mm", r.stddev.x()},
          {"ty_mean_mm", r.mean.y()}, {"ty_std_mm", r.stddev.y()},
          {"tz_mean_mm", r.mean.z()}, {"tz_std_mm", r.stddev.z()},
          {"l2_mean_mm", r.l2_mean},  {"l2_std_mm", r.l2_std},
          {"count", r.count},         {"difference_mode", r.difference_mode}};
}

inline MisalignmentReport misalignment(const json& j) {
  return guarded("misalignment report", [&] {
    MisalignmentReport r;
    r.mean = Vec3(j.at("tx_mean_mm").get<double>(), j.at("ty_mean_mm").get<double>(), j.at("tz_mean_mm").get<double>());
    r.stddev = Vec3(j.at("tx_std_mm").get<double>(), j.at("ty_std_mm").get<double>(), j.at("tz_std_mm").get<double>());
    r.l2_mean = j.at("l2_mean_mm").get<double>();
    r.l2_std = j.at("l2_std_mm").get<double>();
    r.count = j.at("count").get<std::size_t>();
    r.difference_mode = j.value("difference_mode", "absolute");
    return r;
  });
}

inline json summary(const Summary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"min", s.min}, {"max", s.max}, {"std", s.stddev}, {"count", s.count}};
}

inline Summary summary(const json& j) {
  return {j.at("mean").get<double>(), j.at("median").get<double>(), j.at("min").get<double>(),
          j.at("max").get<double>(),  j.at("std").get<double>(),    j.at("count").get<std::size_t>()};
}

inline json joint_error(const JointError& e) {
  return {{"joints", e.joints}, {"per_joint_deg", e.per_joint_deg}, {"total_deg", e.total_deg},
          {"summary_deg", summary(e.summary)}};
}

inline JointError joint_error(const json& j) {
  return guarded("joint error", [&] {
    JointError e;
    e.joints = j.at("joints").get<std::vector<std::size_t>>();
    e.per_joint_deg = j.at("per_joint_deg").get<std::vector<double>>();
    e.total_deg = j.at("total_deg").get<double>();
    e.summary = summary(j.at("summary_deg"));
    return e;
  });
}

// -- session document ---------------------------------------------------------

inline json session(const SessionDocument& d) {
  json trials = json::array();
  for (const auto& t : d.trials)
    trials.push_back({{"index", t.index}, {"transform", transform(t.transform)}, {"config_deg", config(t.config)},
                      {"mirrors", t.mirrors}, {"start_ms", t.start_ms}, {"end_ms", t.end_ms}});
  json out = {{"schema", d.schema}, {"robot", robot(d.robot)}, {"suggested_trials", d.suggested_trials},
              {"trials", trials}};
  if (d.scene) out["scene"] = mesh(*d.scene);
  if (d.registration) {
    const auto& r = *d.registration;
    out["registration"] = {{"mean", transform(r.mean)}, {"rotation_deviation_rad", r.rotation_deviation_rad},
                           {"translation_deviation_mm", r.translation_deviation_mm}, {"trial_count", r.trial_count}};
  }
  if (d.ground_truth) out["ground_truth"] = transform(*d.ground_truth);
  json evals = json::array();
  for (const auto& e : d.evaluations)
    evals.push_back({{"real", landmarks(e.real)}, {"virtual", landmarks(e.virtual_)},
                     {"report", misalignment(e.report)}, {"at_ms", e.at_ms}});
  out["evaluations"] = evals;
  if (d.plan) {
    json steps = json::array();
    for (const auto& s : d.plan->steps) steps.push_back({{"joint", s.joint}, {"target_deg", s.target_deg}, {"done", s.done}});
    out["plan"] = {{"target_deg", config(d.plan->target)}, {"steps", steps}, {"created_ms", d.plan->created_ms},
                   {"complete", d.plan->complete()}};
  }
  json execs = json::array();
  for (const auto& x : d.executions)
    execs.push_back({{"target_deg", config(x.target)}, {"actual_deg", config(x.actual)},
                     {"error", joint_error(x.error)}, {"elapsed_ms", x.elapsed_ms}, {"at_ms", x.at_ms}});
  out["executions"] = execs;
  return out;
}

inline SessionDocument session(const json& j) {
  require_schema(j, kSessionSchema);
  return guarded("session document", [&] {
    SessionDocument d;
    d.robot = robot(j.at("robot"));
    d.suggested_trials = j.value("suggested_trials", kSuggestedTrials);
    if (j.contains("scene")) d.scene = mesh(j.at("scene"));
    for (const auto& t : j.at("trials")) {
      AlignmentTrial tr;
      tr.index = t.at("index").get<std::size_t>();
      tr.transform = transform(t.at("transform"));
      tr.config = config(t.at("config_deg"));
      tr.mirrors = t.at("mirrors").get<int>();
      tr.start_ms = t.at("start_ms").get<std::int64_t>();
      tr.end_ms = t.at("end_ms").get<std::int64_t>();
      if (tr.end_ms < tr.start_ms) throw Error(ErrorCode::SchemaError, "trial ends before it starts");
      d.trials.push_back(std::move(tr));
    }
    if (j.contains("registration")) {
      const json& r = j.at("registration");
      RegistrationResult reg;
      reg.mean = transform(r.at("mean"));
      reg.rotation_deviation_rad = r.at("rotation_deviation_rad").get<std::vector<double>>();
      reg.translation_deviation_mm = r.at("translation_deviation_mm").get<std::vector<double>>();
      reg.trial_count = r.at("trial_count").get<std::size_t>();
      d.registration = std::move(reg);
    }
    if (j.contains("ground_truth")) d.ground_truth = transform(j.at("ground_truth"));
    for (const auto& e : j.value("evaluations", json::array())) {
      EvaluationRecord rec;
      rec.real = landmarks(e.at("real"), LandmarkSource::Real);
      rec.virtual_ = landmarks(e.at("virtual"), LandmarkSource::Virtual);
      rec.report = misalignment(e.at("report"));
      rec.at_ms = e.value("at_ms", std::int64_t{0});
      d.evaluations.push_back(std::move(rec));
    }
    if (j.contains("plan")) {
      const json& p = j.at("plan");
      GuidancePlan plan;
      plan.target = config(p.at("target_deg"));
      for (const auto& s : p.at("steps"))
        plan.steps.push_back({s.at("joint").get<std::size_t>(), s.at("target_deg").get<double>(), s.at("done").get<bool>()});
      plan.created_ms = p.value("created_ms", std::int64_t{0});
      d.plan = std::move(plan);
    }
    for (const auto& x : j.value("executions", json::array())) {
      ExecutionRecord rec;
      rec.target = config(x.at("target_deg"));
      rec.actual = config(x.at("actual_deg"));
      rec.error = joint_error(x.at("error"));
      rec.elapsed_ms = x.at("elapsed_ms").get<std::int64_t>();
      rec.at_ms = x.value("at_ms", std::int64_t{0});
      d.executions.push_back(std::move(rec));
    }
    return d;
  });
}

inline SessionDocument load_session(const std::string& path) { return session(read_json_file(path)); }

inline void save_session(const SessionDocument& d, const std::string& path) {
  write_text_file(path, session(d).dump(2) + "\n");
}

// -- experiments ----------------------------------------------------------------

struct ExperimentPlan {
  ExperimentConfig base;
  NoiseModel noise;
  std::vector<Condition> conditions = default_conditions();
};

inline json noise(const NoiseModel& n) {
  return {{"lateral_sigma_mm", n.lateral_sigma_mm}, {"depth_multiplier", n.depth_multiplier},
          {"rotation_sigma_deg", n.rotation_sigma_deg}};
}

inline ExperimentPlan experiment(const json& j) {
  require_schema(j, kExperimentSchema);
  return guarded("experiment config", [&] {
    ExperimentPlan p;
    p.base.trials = j.value("trials", p.base.trials);
    p.base.seed = j.value("seed", p.base.seed);
    p.base.threads = j.value("threads", p.base.threads);
    if (j.contains("truth")) p.base.truth = transform(j.at("truth"));
    if (j.contains("observers")) {
      p.base.observers.clear();
      for (const auto& o : j.at("observers")) {
        if (o.contains("look_at_mm")) {
          p.base.observers.push_back(ObserverPose::look_at(vec3(o.at("center_mm")), vec3(o.at("look_at_mm"))));
        } else {
          p.base.observers.push_back({transform(o.at("world_to_camera"))});
        }
      }
    } else {
      p.base.observers = default_views(p.base.truth.translation);
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      p.noise.lateral_sigma_mm = n.value("lateral_sigma_mm", p.noise.lateral_sigma_mm);
      p.noise.depth_multiplier = n.value("depth_multiplier", p.noise.depth_multiplier);
      p.noise.rotation_sigma_deg = n.value("rotation_sigma_deg", p.noise.rotation_sigma_deg);
    }
    if (j.contains("conditions")) {
      p.conditions.clear();
      for (const auto& c : j.at("conditions"))
        p.conditions.push_back({c.at("label").get<std::string>(), c.at("views").get<std::size_t>(),
                                c.value("avg_n", std::size_t{1})});
    }
    p.noise.validate();
    return p;
  });
}

inline json distribution(const Distribution& d) {
  json s = summary(d.summary);
  s["p05"] = d.p05;
  s["p50"] = d.p50;
  s["p95"] = d.p95;
  return s;
}

/// Structured report; rows are included so statistics can be recomputed.
inline json report(const std::vector<ExperimentReport>& reports, const NoiseModel& n) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no conditions to report");
  json conds = json::array();
  for (const auto& r : reports) {
    if (r.rows.empty()) throw Error(ErrorCode::EmptyInput, "condition '" + r.label + "' has no trials");
    json rows = json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"trial", row.trial}, {"error_mm", vec(row.translation_error)},
                      {"l2_mm", row.translation_l2}, {"rotation_deg", row.rotation_error_deg}});
    conds.push_back({{"label", r.label}, {"views", r.views}, {"avg_n", r.averaging_n}, {"seed", r.seed},
                     {"trials", r.rows.size()}, {"table", misalignment(r.per_axis)},
                     {"translation_l2_mm", distribution(r.translation_l2)},
                     {"rotation_error_deg", distribution(r.rotation_deg)}, {"rows", rows}});
  }
  return {{"schema", kReportSchema}, {"magnitudes", "simulated"}, {"noise", noise(n)}, {"conditions", conds}};
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// Delimited table, one row per condition; columns follow the misalignment
/// table layout (per-axis mean/std, then L2 of the mean and std vectors).
inline std::string report_csv(const std::vector<ExperimentReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no conditions to report");
  std::ostringstream os;
  os << "condition,views,avg_n,trials,tx_mean_mm,tx_std_mm,ty_mean_mm,ty_std_mm,tz_mean_mm,tz_std_mm,"
        "l2_mean_mm,l2_std_mm,err_l2_mean_mm,err_l2_median_mm,err_l2_p95_mm,rot_mean_deg,rot_median_deg,"
        "rot_p95_deg,magnitudes\n";
  for (const auto& r : reports) {
    if (r.rows.empty()) throw Error(ErrorCode::EmptyInput, "condition '" + r.label + "' has no trials");
    const auto& t = r.per_axis;
    os << r.label << ',' << r.views << ',' << r.averaging_n << ',' << r.rows.size() << ','
       << fixed(t.mean.x()) << ',' << fixed(t.stddev.x()) << ',' << fixed(t.mean.y()) << ','
       << fixed(t.stddev.y()) << ',' << fixed(t.mean.z()) << ',' << fixed(t.stddev.z()) << ','
       << fixed(t.l2_mean) << ',' << fixed(t.l2_std) << ',' << fixed(r.translation_l2.summary.mean) << ','
       << fixed(r.translation_l2.p50) << ',' << fixed(r.translation_l2.p95) << ','
       << fixed(r.rotation_deg.summary.mean) << ',' << fixed(r.rotation_deg.p50) << ','
       << fixed(r.rotation_deg.p95) << ",simulated\n";
  }
  return os.str();
}

enum class ReportFormat { Csv, Json };

inline std::string emit_report(const std::vector<ExperimentReport>& reports, const NoiseModel& n,
                               ReportFormat format) {
  return format == ReportFormat::Csv ? report_csv(reports) : report(reports, n).dump(2) + "\n";
}

/// Writes report.csv and report.json into `dir`.
inline void write_report_files(const std::vector<ExperimentReport>& reports, const NoiseModel& n,
                               const std::string& dir) {
  const std::string csv = emit_report(reports, n, ReportFormat::Csv);
  const std::string js = emit_report(reports, n, ReportFormat::Json);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir + ": " + ec.message());
  write_text_file((std::filesystem::path(dir) / "report.csv").string(), csv);
  write_text_file((std::filesystem::path(dir) / "report.json").string(), js);
}

}  // namespace io
}  // namespace viraal
