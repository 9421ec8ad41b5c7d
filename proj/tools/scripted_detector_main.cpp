// Rule-driven detector speaking protocol v1 on stdio or HTTP. Used to exercise
// the harness end to end without a neural network.
#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <mutex>

#include "cli/scripted_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scripted protocol-v1 detector"};
  std::string script_path;
  int http_port = -1;
  int delay_ms = 0;
  warp::cli::ServerFaults faults;
  std::string crash_marker;
  app.add_option("--script", script_path, "Rule file (JSON)")->required();
  app.add_option("--http", http_port, "Serve HTTP on this port (0 picks one) instead of stdio");
  app.add_option("--version-override", faults.version, "Protocol version to announce");
  app.add_option("--delay-ms", delay_ms, "Sleep before every DETECT reply");
  app.add_flag("--malformed", faults.malformed, "Reply to DETECT with broken JSON");
  app.add_flag("--stale-first", faults.stale_first, "Emit a reply for an unknown request id first");
  app.add_flag("--always-error", faults.always_error, "Reply ERROR to every DETECT");
  app.add_option("--crash-marker", crash_marker, "Die on the first DETECT unless this file exists");
  CLI11_PARSE(app, argc, argv);
  faults.delay = std::chrono::milliseconds(delay_ms);
  faults.crash_marker = crash_marker;

  spdlog::set_default_logger(spdlog::stderr_color_mt("scripted"));

  warp::Script script;
  try {
    script = warp::load_script(script_path);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  warp::cli::ScriptedServer server(std::move(script), faults);

  if (http_port >= 0) {
    httplib::Server http;
    std::mutex mutex;
    http.Post(R"(.*)", [&](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      auto reply = server.handle(req.body);
      if (reply.exit_now || reply.lines.empty()) {
        res.status = 500;
        return;
      }
      res.set_content(reply.lines.back() + "\n", "application/json");
    });
    const int port = http_port == 0 ? http.bind_to_any_port("127.0.0.1") : (http.bind_to_port("127.0.0.1", http_port) ? http_port : -1);
    if (port < 0) {
      spdlog::error("cannot bind port {}", http_port);
      return 3;
    }
    std::cout << "listening on " << port << std::endl;
    http.listen_after_bind();
    return 0;
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    auto reply = server.handle(line);
    if (reply.exit_now) return 1;
    for (const auto& out : reply.lines) std::cout << out << '\n';
    std::cout.flush();
  }
  return 0;
}
