#pragma once

#include <chrono>
#include <deque>
#include <memory>
#include <string>
#include <string_view>

namespace warp {

/// Bidirectional line-oriented message channel to a detector.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send(std::string_view line) = 0;
  /// Next complete line, without the terminator. Throws TransportError on
  /// timeout or when the peer is gone.
  virtual std::string receive(std::chrono::milliseconds timeout) = 0;
  virtual bool alive() const = 0;
  /// Tears down and re-establishes the connection.
  virtual void restart() = 0;
  virtual std::string describe() const = 0;
};

/// Detector running as a child process, speaking over its stdin/stdout.
class SubprocessChannel final : public LineChannel {
 public:
  explicit SubprocessChannel(std::string command);
  ~SubprocessChannel() override;
  SubprocessChannel(const SubprocessChannel&) = delete;
  SubprocessChannel& operator=(const SubprocessChannel&) = delete;

  void send(std::string_view line) override;
  std::string receive(std::chrono::milliseconds timeout) override;
  bool alive() const override;
  void restart() override;
  std::string describe() const override { return "subprocess: " + command_; }

 private:
  void spawn();
  void shutdown();
  void close_pipes();

  std::string command_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Remote detector reached by POSTing each message to `url`; the response
/// body is the reply line.
class HttpChannel final : public LineChannel {
 public:
  HttpChannel(std::string url, std::chrono::milliseconds connect_timeout);
  ~HttpChannel() override;

  void send(std::string_view line) override;
  std::string receive(std::chrono::milliseconds timeout) override;
  bool alive() const override { return true; }
  void restart() override { pending_.clear(); }
  std::string describe() const override { return "http: " + url_; }

 private:
  std::string url_;
  std::string scheme_host_port_;
  std::string path_;
  std::chrono::milliseconds connect_timeout_;
  std::deque<std::string> outgoing_;
  std::deque<std::string> pending_;
};

}  // namespace warp
