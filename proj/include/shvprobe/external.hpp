// Copyright 2026 The shvprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHVPROBE_EXTERNAL_HPP_
#define SHVPROBE_EXTERNAL_HPP_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "shvprobe/evaluator.hpp"

namespace shvprobe {

// Newline-framed byte stream to a model host.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  // Appends '\n'.
  virtual void send_line(std::string_view line) = 0;
  // nullopt on timeout; throws EvaluationError when the stream is closed.
  virtual std::optional<std::string> receive_line(std::chrono::milliseconds timeout) = 0;
};

// Buffered reader/writer over a pair of POSIX file descriptors.
class FdLineTransport : public LineTransport {
 public:
  FdLineTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  ~FdLineTransport() override;

  void send_line(std::string_view line) override;
  std::optional<std::string> receive_line(std::chrono::milliseconds timeout) override;

 protected:
  void close_fds();

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
  std::mutex write_mutex_;
};

// Spawns `/bin/sh -c command` and talks over its stdin/stdout.
class ProcessTransport : public FdLineTransport {
 public:
  static std::unique_ptr<ProcessTransport> Spawn(const std::string& command);
  ~ProcessTransport() override;

 private:
  ProcessTransport(int read_fd, int write_fd, int pid)
      : FdLineTransport(read_fd, write_fd), pid_(pid) {}

  int pid_;
};

class TcpTransport : public FdLineTransport {
 public:
  static std::unique_ptr<TcpTransport> Connect(const std::string& host, std::uint16_t port);

 private:
  explicit TcpTransport(int fd) : FdLineTransport(fd, fd) {}
};

namespace wire {

inline constexpr int kProtocolVersion = 1;

struct Request {
  std::uint64_t id = 0;
  std::string op;  // "topology" or "evaluate"
  std::vector<std::uint8_t> mask;
  std::string paradigm;
  std::string split;
};

struct Response {
  std::uint64_t id = 0;
  std::optional<std::string> error;
  nlohmann::json body;
};

std::string EncodeTopologyRequest(std::uint64_t id);
std::string EncodeEvaluateRequest(std::uint64_t id, const GateMask& mask, std::string_view paradigm,
                                  Split split);
std::string EncodeTopologyResponse(std::uint64_t id, std::size_t layers,
                                   std::size_t heads_per_layer, int protocol = kProtocolVersion);
std::string EncodeEvaluateResponse(std::uint64_t id, double accuracy, std::size_t n);
std::string EncodeErrorResponse(std::uint64_t id, std::string_view message);

// Throw ProtocolError on malformed lines.
Request DecodeRequest(std::string_view line);
Response DecodeResponse(std::string_view line);

}  // namespace wire

struct ExternalOptions {
  std::chrono::milliseconds timeout{30000};
  // Upper bound on in-flight requests; the host may declare a lower one at
  // handshake with an optional "concurrency" field.
  std::size_t max_in_flight = 1;
};

// Evaluator forwarding to a model host over the line protocol. Responses
// are matched to requests by id, so a pipelining host may answer out of
// order. A malformed line, an unknown id or a closed stream ends the
// session: pending and later requests fail with EvaluationError.
class ExternalEvaluator : public Evaluator {
 public:
  // Performs the topology handshake. Throws ProtocolError on a version
  // mismatch and EvaluationError on transport failure.
  ExternalEvaluator(std::unique_ptr<LineTransport> transport, ExternalOptions options = {},
                    std::string host_label = "external");
  ~ExternalEvaluator() override;

  std::string backend_id() const override { return "external:" + host_label_; }
  const ModelTopology& topology() const override { return topology_; }
  bool has_paradigm(std::string_view) const override { return true; }
  EvaluationResult evaluate(const GateMask& mask, std::string_view paradigm_id,
                            Split split) override;
  std::size_t concurrency_limit() const override { return concurrency_; }

 private:
  std::future<wire::Response> submit(std::uint64_t id, const std::string& line);
  wire::Response await(std::uint64_t id, std::future<wire::Response>& future);
  void reader_loop();
  void fail_all(const std::string& message);

  std::unique_ptr<LineTransport> transport_;
  ExternalOptions options_;
  std::string host_label_;
  ModelTopology topology_{1, 1};
  std::size_t concurrency_ = 1;

  std::mutex mutex_;
  std::condition_variable slots_;
  std::size_t in_flight_ = 0;
  std::map<std::uint64_t, std::promise<wire::Response>> pending_;
  std::atomic<std::uint64_t> next_id_{0};
  std::atomic<bool> stop_{false};
  std::string broken_;
  std::thread reader_;
};

}  // namespace shvprobe

#endif  // SHVPROBE_EXTERNAL_HPP_
