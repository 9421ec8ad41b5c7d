#include "warp/transport.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include "warp/errors.hpp"

namespace warp {
namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

SubprocessChannel::SubprocessChannel(std::string command) : command_(std::move(command)) {
  ignore_sigpipe();
  spawn();
}

SubprocessChannel::~SubprocessChannel() { shutdown(); }

void SubprocessChannel::spawn() {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw TransportError("pipe() failed: " + std::string(std::strerror(errno)));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw TransportError("pipe() failed: " + std::string(std::strerror(errno)));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw TransportError("fork() failed: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void SubprocessChannel::close_pipes() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
}

void SubprocessChannel::shutdown() {
  close_pipes();
  if (pid_ > 0) {
    // Closing stdin asks a well-behaved detector to exit; give it a moment.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_ || (r < 0 && errno == ECHILD)) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

bool SubprocessChannel::alive() const {
  // A closed pipe means the detector is gone even if it has not been reaped yet.
  if (pid_ <= 0 || to_child_ < 0 || from_child_ < 0) return false;
  int status = 0;
  return ::waitpid(pid_, &status, WNOHANG) == 0;
}

void SubprocessChannel::restart() {
  shutdown();
  spawn();
}

void SubprocessChannel::send(std::string_view line) {
  if (to_child_ < 0) throw TransportError("detector process is not running");
  std::string data(line);
  data.push_back('\n');
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      close_pipes();
      throw TransportError("write to detector failed: " + std::string(std::strerror(err)));
    }
    written += static_cast<std::size_t>(n);
  }
}

std::string SubprocessChannel::receive(std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (from_child_ < 0) throw TransportError("detector process is not running");
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (remaining.count() <= 0) {
      throw TransportError("detector did not answer within " + std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError("poll failed: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("read from detector failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) {
      close_pipes();
      throw TransportError("detector process closed its output (exited?)");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

HttpChannel::HttpChannel(std::string url, std::chrono::milliseconds connect_timeout)
    : url_(std::move(url)), connect_timeout_(connect_timeout) {
  const auto scheme_end = url_.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("detector URL lacks a scheme: " + url_);
  const auto path_start = url_.find('/', scheme_end + 3);
  scheme_host_port_ = url_.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url_.substr(path_start);
}

HttpChannel::~HttpChannel() = default;

void HttpChannel::send(std::string_view line) { outgoing_.emplace_back(line); }

std::string HttpChannel::receive(std::chrono::milliseconds timeout) {
  if (!pending_.empty()) {
    std::string line = std::move(pending_.front());
    pending_.pop_front();
    return line;
  }
  if (outgoing_.empty()) throw TransportError("no request outstanding on " + url_);
  const std::string body = std::move(outgoing_.front());
  outgoing_.pop_front();

  httplib::Client client(scheme_host_port_);
  const auto to_timeval = [](std::chrono::milliseconds ms) {
    return std::pair<time_t, time_t>(ms.count() / 1000, (ms.count() % 1000) * 1000);
  };
  auto [cs, cus] = to_timeval(connect_timeout_);
  auto [rs, rus] = to_timeval(timeout);
  client.set_connection_timeout(cs, cus);
  client.set_read_timeout(rs, rus);
  client.set_write_timeout(rs, rus);
  auto res = client.Post(path_, body, "application/json");
  if (!res) throw TransportError("HTTP request to " + url_ + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + url_);
  }
  std::string reply = res->body;
  while (!reply.empty() && (reply.back() == '\n' || reply.back() == '\r')) reply.pop_back();
  return reply;
}

}  // namespace warp
