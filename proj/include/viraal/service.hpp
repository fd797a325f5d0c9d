#pragma once

// Message-level workbench API. Requests and responses are JSON envelopes
//
//   request:  {"id": <any>, "verb": "<name>", "payload": {...}}
//   response: {"id": <same>, "verb": "<name>", "ok": bool, "revision": n,
//              "payload": {...}}            on success
//              "error": {"code", "message"}  on failure
//
// Every request yields exactly one response. Mutating verbs are serialized
// and bump the scene revision by exactly one when they succeed; a failed
// verb leaves the scene untouched. Reads return the last published snapshot.
// The ground-truth pose of the simulated real robot is withheld from
// snapshots until the registration is finalized.

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "viraal/camera.hpp"
#include "viraal/io.hpp"
#include "viraal/session.hpp"
#include "viraal/triangulate.hpp"

namespace viraal {

inline constexpr const char* kApiProtocol = "viraal.api/1";
inline constexpr const char* kSceneSchema = "viraal.scene/1";

/// Static inputs of a workbench instance.
struct ServiceConfig {
  RobotDescription robot;
  SceneMesh mesh;
  RigidTransform ground_truth;          // virtual -> real, hidden until finalize
  JointConfig config;                   // shared by real and virtual robot
  RigidTransform initial_virtual;
  CameraIntrinsics intrinsics{500.0, 500.0, 320.0, 240.0, 0.0};
};

namespace io {

/// Scene document; "robot" and "mesh" may be inline or paths relative to
/// `base_dir`. A path ending in .json is a mesh document, anything else a
/// triangle soup.
inline ServiceConfig scene(const json& j, const std::filesystem::path& base_dir = {}) {
  require_schema(j, kSceneSchema);
  return guarded("scene config", [&] {
    ServiceConfig c;
    const json& r = j.at("robot");
    c.robot = r.is_string() ? load_robot((base_dir / r.get<std::string>()).string()) : robot(r);
    const json& m = j.at("mesh");
    if (m.is_string()) {
      const auto p = base_dir / m.get<std::string>();
      c.mesh = p.extension() == ".json" ? mesh(read_json_file(p.string())) : SceneMesh::load_triangle_soup(p.string());
    } else {
      c.mesh = mesh(m);
    }
    c.ground_truth = transform(j.at("ground_truth"));
    c.config = j.contains("config_deg") ? config(j.at("config_deg")) : JointConfig::zeros(c.robot.dof());
    if (c.config.size() != c.robot.dof())
      throw Error(ErrorCode::LengthMismatch, "scene config_deg length does not match the robot");
    if (j.contains("initial_virtual")) c.initial_virtual = transform(j.at("initial_virtual"));
    if (j.contains("intrinsics")) c.intrinsics = intrinsics(j.at("intrinsics"));
    return c;
  });
}

inline ServiceConfig load_scene(const std::string& path) {
  return scene(read_json_file(path), std::filesystem::path(path).parent_path());
}

}  // namespace io

class Service {
 public:
  explicit Service(ServiceConfig cfg, Clock clock = steady_clock_from_now())
      : cfg_(std::move(cfg)), clock_(clock), session_(cfg_.robot, clock) {
    cfg_.mesh.validate();
    cfg_.intrinsics.validate();
    session_.set_scene(cfg_.mesh);
    virtual_ = cfg_.initial_virtual;
    config_ = cfg_.config;
    publish();
  }

  static const std::set<std::string>& mutating_verbs() {
    static const std::set<std::string> v{"nudge_virtual", "set_virtual", "set_config", "add_mirror",
                                         "remove_mirror", "begin_trial", "record_trial", "finalize",
                                         "evaluate",      "plan",        "step_done",  "score",
                                         "load_session"};
    return v;
  }

  static const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v{
        "hello",  "get_scene",     "nudge_virtual", "set_virtual", "set_config",       "add_mirror",
        "remove_mirror", "begin_trial", "record_trial", "finalize", "evaluate",        "plan",
        "step_done", "score",      "save_session",  "load_session", "render_reference", "project",
        "pick"};
    return v;
  }

  /// Handles one request envelope and returns its response envelope.
  json handle(const json& request) {
    json response = {{"id", request.is_object() && request.contains("id") ? request.at("id") : json()}};
    std::string verb;
    try {
      if (!request.is_object() || !request.contains("verb") || !request.at("verb").is_string())
        throw Error(ErrorCode::InvalidArgument, "request needs a string 'verb'");
      verb = request.at("verb").get<std::string>();
      response["verb"] = verb;
      const json payload = request.value("payload", json::object());
      if (!payload.is_object()) throw Error(ErrorCode::InvalidArgument, "payload must be an object");
      if (std::find(verbs().begin(), verbs().end(), verb) == verbs().end())
        throw Error(ErrorCode::UnknownVerb, "unknown verb '" + verb + "'");

      json out;
      std::uint64_t rev = 0;
      if (mutating_verbs().count(verb)) {
        std::lock_guard lock(mutation_);
        out = io::guarded(verb, [&] { return mutate(verb, payload); });
        ++revision_;
        publish();
        rev = revision_;
      } else {
        const auto snap = snapshot();
        out = io::guarded(verb, [&] { return read(verb, payload, *snap); });
        rev = snap->at("revision").get<std::uint64_t>();
      }
      response["ok"] = true;
      response["revision"] = rev;
      response["payload"] = std::move(out);
    } catch (const Error& e) {
      response["ok"] = false;
      response["revision"] = snapshot()->at("revision");
      response["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    } catch (const std::exception& e) {
      response["ok"] = false;
      response["revision"] = snapshot()->at("revision");
      response["error"] = {{"code", "InvalidArgument"}, {"message", e.what()}};
    }
    return response;
  }

  /// Current scene snapshot; revision and state are always consistent.
  std::shared_ptr<const json> snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

  /// Blocks until the revision exceeds `since` or the timeout expires.
  std::shared_ptr<const json> wait_for_revision(std::uint64_t since, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(snapshot_mutex_);
    changed_.wait_for(lock, timeout, [&] { return snapshot_->at("revision").get<std::uint64_t>() > since; });
    return snapshot_;
  }

  SessionDocument session_document() const {
    std::lock_guard lock(mutation_);
    return session_.document();
  }

 private:
  json mutate(const std::string& verb, const json& p) {
    if (verb == "nudge_virtual") {
      require_open();
      const Vec3 dt = p.contains("translation_mm") ? io::vec3(p.at("translation_mm")) : Vec3::Zero();
      const Vec3 dr = p.contains("rotation_deg") ? io::vec3(p.at("rotation_deg")) : Vec3::Zero();
      // rotate about the virtual robot's origin, axes world-aligned
      virtual_ = {so3_exp(dr * std::numbers::pi / 180.0) * virtual_.rotation, virtual_.translation + dt};
      return {{"virtual", io::transform(virtual_)}};
    }
    if (verb == "set_virtual") {
      require_open();
      virtual_ = io::transform(p.at("transform"));
      return {{"virtual", io::transform(virtual_)}};
    }
    if (verb == "set_config") {
      const JointConfig q = io::config(p.at("config_deg"));
      if (q.size() != cfg_.robot.dof()) throw Error(ErrorCode::LengthMismatch, "config length does not match the robot");
      if (!within_limits(cfg_.robot, q)) throw Error(ErrorCode::InvalidArgument, "config violates joint limits");
      config_ = q;
      return {{"config_deg", io::config(config_)}};
    }
    if (verb == "add_mirror") {
      const ObserverPose pose = observer_from(p);
      const CameraIntrinsics k = p.contains("intrinsics") ? io::intrinsics(p.at("intrinsics")) : cfg_.intrinsics;
      const MirrorView m = make_mirror(k, pose, cfg_.mesh);
      const std::uint64_t id = next_mirror_id_++;
      mirrors_.emplace(id, m);
      return mirror_json(id, m);
    }
    if (verb == "remove_mirror") {
      const auto id = p.at("id").get<std::uint64_t>();
      if (mirrors_.erase(id) == 0) throw Error(ErrorCode::IndexOutOfRange, "no mirror with id " + std::to_string(id));
      return {{"removed", id}};
    }
    if (verb == "begin_trial") {
      require_open();
      session_.begin_trial();
      return json::object();
    }
    if (verb == "record_trial") {
      const JointConfig q = p.contains("config_deg") ? io::config(p.at("config_deg")) : config_;
      const auto& t = session_.record_trial(virtual_, q, static_cast<int>(mirrors_.size()));
      return {{"index", t.index}, {"transform", io::transform(t.transform)}, {"mirrors", t.mirrors},
              {"start_ms", t.start_ms}, {"end_ms", t.end_ms}, {"trial_count", session_.trial_count()}};
    }
    if (verb == "finalize") {
      const auto& r = session_.finalize_registration();
      session_.document().ground_truth = cfg_.ground_truth;
      return registration_json(r);
    }
    if (verb == "evaluate") {
      const auto real = landmark_list(p.at("real"), LandmarkSource::Real);
      const auto virt = landmark_list(p.at("virtual"), LandmarkSource::Virtual);
      return io::misalignment(session_.evaluate_registration(real, virt));
    }
    if (verb == "plan") {
      return plan_json(session_.make_guidance_plan(io::config(p.at("target_deg"))));
    }
    if (verb == "step_done") {
      return plan_json(session_.mark_step_done(p.at("step").get<std::size_t>()));
    }
    if (verb == "score") {
      const auto& rec = session_.score_execution(io::config(p.at("actual_deg")));
      return {{"error", io::joint_error(rec.error)}, {"elapsed_ms", rec.elapsed_ms}};
    }
    if (verb == "load_session") {
      SessionDocument doc = p.contains("document") ? io::session(p.at("document"))
                                                   : io::load_session(p.at("path").get<std::string>());
      if (!(doc.robot == cfg_.robot)) throw Error(ErrorCode::SchemaError, "session robot differs from the scene robot");
      session_ = AlignmentSession(std::move(doc), clock_);
      if (!session_.document().trials.empty()) virtual_ = session_.document().trials.back().transform;
      return {{"trials", session_.trial_count()}, {"finalized", session_.finalized()}};
    }
    throw Error(ErrorCode::UnknownVerb, "unknown verb '" + verb + "'");
  }

  json read(const std::string& verb, const json& p, const json& snap) const {
    if (verb == "hello") {
      const std::string client = p.value("protocol", std::string(kApiProtocol));
      if (client != kApiProtocol)
        throw Error(ErrorCode::InvalidArgument, "unsupported protocol '" + client + "', server speaks " + kApiProtocol);
      return {{"protocol", kApiProtocol}, {"verbs", verbs()}};
    }
    if (verb == "get_scene") return snap;
    if (verb == "save_session") {
      const SessionDocument doc = session_document();
      if (p.contains("path")) {
        io::save_session(doc, p.at("path").get<std::string>());
        return {{"path", p.at("path")}};
      }
      return {{"document", io::session(doc)}};
    }
    if (verb == "render_reference") {
      // Server-side rendering of the real robot: pixels only, never its pose.
      const auto [k, pose, proj] = camera_from(p, snap);
      const auto pts = skeleton_points(cfg_.robot, config_at(snap));
      json pixels = json::array();
      for (const auto& x : pts) {
        const Vec3 world = cfg_.ground_truth.apply(x);
        const Projection pr = project(proj, world);
        pixels.push_back({{"pixel", io::vec2(pr.pixel)}, {"depth", pr.depth}});
      }
      return {{"points", pixels}};
    }
    if (verb == "project") {
      const auto [k, pose, proj] = camera_from(p, snap);
      json out = json::array();
      for (const auto& x : p.at("points_mm")) {
        const Projection pr = project(proj, io::vec3(x));
        out.push_back({{"pixel", io::vec2(pr.pixel)}, {"depth", pr.depth}, {"behind_camera", pr.behind_camera()}});
      }
      return {{"projections", out}};
    }
    if (verb == "pick") {
      const auto [k, pose, proj] = camera_from(p, snap);
      const Ray ray = pixel_to_ray(k, pose, io::vec2(p.at("pixel")));
      json out = {{"origin_mm", io::vec(ray.origin)}, {"direction", io::vec(ray.direction)}};
      if (const auto hit = viraal::pick(ray, cfg_.mesh)) {
        out["hit_distance_mm"] = hit->distance;
        out["hit_mm"] = io::vec(ray.at(hit->distance));
      }
      return out;
    }
    throw Error(ErrorCode::UnknownVerb, "unknown verb '" + verb + "'");
  }

  void require_open() const {
    if (session_.finalized()) throw Error(ErrorCode::SessionFinalized, "registration is final; the virtual robot is locked");
  }

  static ObserverPose observer_from(const json& p) {
    if (p.contains("world_to_camera")) return {io::transform(p.at("world_to_camera"))};
    if (p.contains("center_mm") && p.contains("look_at_mm"))
      return ObserverPose::look_at(io::vec3(p.at("center_mm")), io::vec3(p.at("look_at_mm")));
    throw Error(ErrorCode::InvalidArgument, "observer needs world_to_camera or center_mm + look_at_mm");
  }

  struct CameraSel {
    CameraIntrinsics k;
    ObserverPose pose;
    ProjectionMatrix proj;
  };

  CameraSel camera_from(const json& p, const json& snap) const {
    if (p.contains("mirror_id")) {
      const auto id = p.at("mirror_id").get<std::uint64_t>();
      for (const auto& m : snap.at("mirrors"))
        if (m.at("id") == id) {
          const MirrorView mv{io::intrinsics(m.at("observer_intrinsics")), {io::transform(m.at("observer_world_to_camera"))},
                              m.at("distance_mm").get<double>()};
          return {mv.intrinsics(), mv.pose(), mv.projection()};
        }
      throw Error(ErrorCode::IndexOutOfRange, "no mirror with id " + std::to_string(id));
    }
    const CameraIntrinsics k = p.contains("intrinsics") ? io::intrinsics(p.at("intrinsics")) : cfg_.intrinsics;
    const ObserverPose pose = observer_from(p);
    return {k, pose, observer_projection(k, pose)};
  }

  static JointConfig config_at(const json& snap) { return io::config(snap.at("config_deg")); }

  static std::vector<Landmark> landmark_list(const json& j, LandmarkSource src) {
    if (!j.is_array()) throw Error(ErrorCode::SchemaError, "landmarks must be a list");
    std::vector<Landmark> out;
    for (const auto& e : j) {
      if (e.is_object() && e.contains("rays")) {
        std::vector<Ray> rays;
        for (const auto& r : e.at("rays")) rays.push_back(Ray::through(io::vec3(r.at("origin_mm")), io::vec3(r.at("direction"))));
        out.push_back(triangulate_landmark(rays, src, e.value("label", "")));
      } else {
        out.push_back(io::landmark(e, src));
      }
    }
    return out;
  }

  static json mirror_json(std::uint64_t id, const MirrorView& m) {
    return {{"id", id},
            {"distance_mm", m.distance_mm},
            {"observer_intrinsics", io::intrinsics(m.observer_intrinsics)},
            {"observer_world_to_camera", io::transform(m.observer.world_to_camera)},
            {"intrinsics", io::intrinsics(m.intrinsics())},
            {"world_to_camera", io::transform(m.pose().world_to_camera)},
            {"projection", io::projection(m.projection())}};
  }

  static json registration_json(const RegistrationResult& r) {
    return {{"mean", io::transform(r.mean)}, {"trial_count", r.trial_count},
            {"rotation_deviation_rad", r.rotation_deviation_rad},
            {"translation_deviation_mm", r.translation_deviation_mm}};
  }

  static json plan_json(const GuidancePlan& plan) {
    json steps = json::array();
    for (const auto& s : plan.steps) steps.push_back({{"joint", s.joint}, {"target_deg", s.target_deg}, {"done", s.done}});
    json out = {{"target_deg", io::config(plan.target)}, {"steps", steps}, {"complete", plan.complete()}};
    if (const auto n = plan.next_pending()) out["next_step"] = *n;
    return out;
  }

  // Caller holds mutation_ (or is the constructor).
  void publish() {
    const auto& doc = session_.document();
    json mirrors = json::array();
    for (const auto& [id, m] : mirrors_) mirrors.push_back(mirror_json(id, m));
    json s = {{"revision", revision_},
              {"protocol", kApiProtocol},
              {"robot", io::robot(cfg_.robot)},
              {"config_deg", io::config(config_)},
              {"virtual", io::transform(virtual_)},
              {"intrinsics", io::intrinsics(cfg_.intrinsics)},
              {"mirrors", mirrors},
              {"trial_count", doc.trials.size()},
              {"suggested_trials", doc.suggested_trials},
              {"finalized", session_.finalized()},
              {"evaluation_count", doc.evaluations.size()},
              {"execution_count", doc.executions.size()}};
    if (doc.registration) {
      s["registration"] = registration_json(*doc.registration);
      s["ground_truth"] = io::transform(cfg_.ground_truth);
      s["registration_error"] = {
          {"translation_mm", (doc.registration->mean.translation - cfg_.ground_truth.translation).norm()},
          {"rotation_deg", rad2deg(geodesic_distance(doc.registration->mean.rotation, cfg_.ground_truth.rotation))}};
    }
    if (doc.plan) s["plan"] = plan_json(*doc.plan);
    if (!doc.evaluations.empty()) s["last_evaluation"] = io::misalignment(doc.evaluations.back().report);
    if (!doc.executions.empty()) s["last_execution"] = io::joint_error(doc.executions.back().error);
    auto next = std::make_shared<const json>(std::move(s));
    {
      std::lock_guard lock(snapshot_mutex_);
      snapshot_ = std::move(next);
    }
    changed_.notify_all();
  }

  ServiceConfig cfg_;
  Clock clock_;
  mutable std::mutex mutation_;
  AlignmentSession session_;
  RigidTransform virtual_;
  JointConfig config_;
  std::map<std::uint64_t, MirrorView> mirrors_;
  std::uint64_t next_mirror_id_ = 1;
  std::uint64_t revision_ = 0;

  mutable std::mutex snapshot_mutex_;
  mutable std::condition_variable changed_;
  std::shared_ptr<const json> snapshot_;
};

/// Feeds each request of a script (JSON array or one envelope per line) to
/// the service and collects the responses.
inline json run_script(Service& svc, std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json requests = json::array();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    requests = io::guarded("script", [&] { return json::parse(text); });
  } else {
    std::istringstream ls(text);
    std::string line;
    while (std::getline(ls, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t\r")] == '#') continue;
      requests.push_back(io::guarded("script line", [&] { return json::parse(line); }));
    }
  }
  json responses = json::array();
  for (const auto& r : requests) responses.push_back(svc.handle(r));
  return responses;
}

}  // namespace viraal
