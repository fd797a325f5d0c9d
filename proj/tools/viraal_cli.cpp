// viraal: simulation, replay, validation and the workbench service.
//
//   viraal sim [--config exp.json] [--seed N] [--trials N] [--views M] [--avg-n N] [--out DIR]
//   viraal replay SESSION.json [--out REPORT.json]
//   viraal serve --scene SCENE.json [--host H] [--port P] [--static DIR]
//   viraal validate ROBOT.json
//   viraal script SCENE.json SCRIPT [--save-session OUT.json]

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>

#include "viraal/viraal.hpp"
#include "viraal/http.hpp"

namespace {

using viraal::json;

int run_sim(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> trials, std::optional<std::size_t> views,
            std::optional<std::size_t> avg_n, std::optional<unsigned> threads, const std::string& out_dir) {
  viraal::io::ExperimentPlan plan;
  if (!config_path.empty()) plan = viraal::io::experiment(viraal::io::read_json_file(config_path));
  if (seed) plan.base.seed = *seed;
  if (trials) plan.base.trials = *trials;
  if (threads) plan.base.threads = *threads;
  if (views || avg_n) plan.conditions = {{"custom", views.value_or(1), avg_n.value_or(1)}};

  const auto reports = viraal::run_conditions(plan.base, plan.noise, plan.conditions);
  viraal::io::write_report_files(reports, plan.noise, out_dir);
  std::cout << viraal::io::emit_report(reports, plan.noise, viraal::io::ReportFormat::Csv);
  return 0;
}

json replay_report(const viraal::SessionDocument& doc, const viraal::ReplayResult& r) {
  json out = {{"schema", "viraal.replay/1"}, {"trial_count", doc.trials.size()}, {"matches_stored", r.matches(doc)}};
  if (r.registration)
    out["registration"] = {{"mean", viraal::io::transform(r.registration->mean)},
                           {"rotation_deviation_rad", r.registration->rotation_deviation_rad},
                           {"translation_deviation_mm", r.registration->translation_deviation_mm}};
  json evals = json::array();
  for (const auto& e : r.evaluations) evals.push_back(viraal::io::misalignment(e));
  out["evaluations"] = evals;
  json execs = json::array();
  for (const auto& e : r.executions) execs.push_back(viraal::io::joint_error(e));
  out["executions"] = execs;
  return out;
}

int run_replay(const std::string& path, const std::string& out_path) {
  const auto doc = viraal::io::load_session(path);
  const auto result = viraal::replay_session(doc);
  const std::string text = replay_report(doc, result).dump(2) + "\n";
  if (!out_path.empty()) viraal::io::write_text_file(out_path, text);
  std::cout << text;
  if (!result.matches(doc)) {
    std::cerr << "replay: recomputed results differ from those stored in " << path << "\n";
    return 3;
  }
  return 0;
}

int run_validate(const std::string& path) {
  const auto robot = viraal::io::load_robot(path);
  std::cout << "robot '" << robot.name << "': " << robot.dof() << " joints\n";
  for (std::size_t i = 0; i < robot.dof(); ++i)
    std::cout << "  " << i + 1 << " " << robot.joints[i].name << " "
              << viraal::to_string(viraal::classify_joint(robot, i)) << "\n";
  const auto ee = viraal::forward_kinematics(robot, viraal::JointConfig::zeros(robot.dof())).back();
  std::cout << "  zero-config end effector (mm): " << ee.translation.transpose() << "\n";
  return 0;
}

viraal::HttpServer* g_server_for_signal = nullptr;

int run_serve(const std::string& scene, const std::string& host, int port, const std::string& static_dir) {
  viraal::Service svc(viraal::io::load_scene(scene));
  viraal::HttpServer server(svc, {host, port, static_dir});
  g_server_for_signal = &server;
  std::signal(SIGINT, [](int) {
    if (g_server_for_signal) g_server_for_signal->stop();
  });
  const int bound = server.start();
  std::cout << "serving " << viraal::kApiProtocol << " on http://" << host << ":" << bound << std::endl;
  server.wait();
  return 0;
}

int run_script(const std::string& scene, const std::string& script, const std::string& save_path) {
  viraal::Service svc(viraal::io::load_scene(scene), viraal::manual_clock());
  std::ifstream in(script);
  if (!in) throw viraal::Error(viraal::ErrorCode::IoFailure, "cannot open " + script);
  const json responses = viraal::run_script(svc, in);
  for (const auto& r : responses) std::cout << r.dump() << "\n";
  if (!save_path.empty()) viraal::io::save_session(svc.session_document(), save_path);
  for (const auto& r : responses)
    if (!r.at("ok").get<bool>()) return 4;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viraal: virtual-real active alignment engine"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("sim", "run simulated alignment experiments");
  std::string sim_config, sim_out = "results";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials, views, avg_n;
  std::optional<unsigned> threads;
  sim->add_option("--config", sim_config, "experiment document")->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--trials", trials, "trials per condition");
  sim->add_option("--views", views, "simultaneous views (1 = no reflective display)");
  sim->add_option("--avg-n", avg_n, "alignments averaged per registration");
  sim->add_option("--threads", threads, "worker threads");
  sim->add_option("--out", sim_out, "results directory");

  auto* replay = app.add_subcommand("replay", "recompute all derived results of a session document");
  std::string replay_path, replay_out;
  replay->add_option("session", replay_path)->required()->check(CLI::ExistingFile);
  replay->add_option("--out", replay_out, "also write the report here");

  auto* serve = app.add_subcommand("serve", "start the workbench API");
  std::string scene, host = "127.0.0.1", static_dir;
  int port = 8765;
  serve->add_option("--scene", scene, "scene document")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--static", static_dir, "directory of UI assets");

  auto* validate = app.add_subcommand("validate", "schema-check a robot description");
  std::string robot_path;
  validate->add_option("robot", robot_path)->required()->check(CLI::ExistingFile);

  auto* script = app.add_subcommand("script", "run an API request script against a scene (deterministic clock)");
  std::string script_scene, script_path, save_path;
  script->add_option("scene", script_scene)->required()->check(CLI::ExistingFile);
  script->add_option("script", script_path)->required()->check(CLI::ExistingFile);
  script->add_option("--save-session", save_path, "write the resulting session document");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return run_sim(sim_config, seed, trials, views, avg_n, threads, sim_out);
    if (*replay) return run_replay(replay_path, replay_out);
    if (*serve) return run_serve(scene, host, port, static_dir);
    if (*validate) return run_validate(robot_path);
    if (*script) return run_script(script_scene, script_path, save_path);
  } catch (const viraal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
