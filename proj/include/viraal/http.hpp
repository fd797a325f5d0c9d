#pragma once

// HTTP transport for the workbench API (cpp-httplib):
//   POST /api                     one request envelope, or an array of them
//   GET  /api/scene               current snapshot
//   GET  /events?since=N&timeout_ms=T
//                                 long-poll; returns the snapshot once its
//                                 revision exceeds N (or on timeout)
//   GET  /*                       static UI assets when a directory is given

// Eigen must be seen before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "viraal/service.hpp"

#include <httplib.h>

#include <chrono>
#include <memory>
#include <string>
#include <thread>

namespace viraal {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  std::string static_dir;
};

class HttpServer {
 public:
  HttpServer(Service& svc, ServeOptions opts) : svc_(svc), opts_(std::move(opts)) {
    // SO_REUSEADDR only: httplib's default SO_REUSEPORT would let a second
    // server share a busy port instead of failing
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }
  ~HttpServer() { stop(); }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts serving on a background thread; returns the port.
  int start() {
    if (!opts_.static_dir.empty() && !server_.set_mount_point("/", opts_.static_dir))
      throw Error(ErrorCode::BindFailure, "static directory " + opts_.static_dir + " does not exist");
    if (opts_.port == 0) {
      port_ = server_.bind_to_any_port(opts_.host);
      if (port_ < 0) throw Error(ErrorCode::BindFailure, "cannot bind " + opts_.host);
    } else {
      if (!server_.bind_to_port(opts_.host, opts_.port))
        throw Error(ErrorCode::BindFailure, "cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
      port_ = opts_.port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Blocks until the server stops.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  void routes() {
    server_.Post("/api", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const std::exception& e) {
        const json err = {{"id", nullptr}, {"ok", false},
                          {"error", {{"code", "InvalidArgument"}, {"message", std::string("malformed JSON: ") + e.what()}}}};
        res.set_content(err.dump(), "application/json");
        return;
      }
      json out;
      if (body.is_array()) {
        out = json::array();
        for (const auto& r : body) out.push_back(svc_.handle(r));
      } else {
        out = svc_.handle(body);
      }
      res.set_content(out.dump(), "application/json");
    });
    server_.Get("/api/scene", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(svc_.snapshot()->dump(), "application/json");
    });
    server_.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
      const std::uint64_t since = req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0;
      const long timeout = req.has_param("timeout_ms") ? std::stol(req.get_param_value("timeout_ms")) : 25000;
      res.set_content(svc_.wait_for_revision(since, std::chrono::milliseconds(timeout))->dump(), "application/json");
    });
  }

  Service& svc_;
  ServeOptions opts_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace viraal
