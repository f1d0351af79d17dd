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

#include "shvprobe/external.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "shvprobe/errors.hpp"

namespace shvprobe {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Transports.

FdLineTransport::~FdLineTransport() { close_fds(); }

void FdLineTransport::close_fds() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  read_fd_ = write_fd_ = -1;
}

void FdLineTransport::send_line(std::string_view line) {
  std::lock_guard lock(write_mutex_);
  std::string framed(line);
  framed.push_back('\n');
  std::size_t off = 0;
  while (off < framed.size()) {
    const ssize_t n = ::write(write_fd_, framed.data() + off, framed.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EvaluationError(std::string("write to host failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdLineTransport::receive_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw EvaluationError(std::string("poll on host stream failed: ") + std::strerror(errno));
    }
    if (ready == 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EvaluationError(std::string("read from host failed: ") + std::strerror(errno));
    }
    if (n == 0) throw EvaluationError("host closed the stream");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<ProcessTransport> ProcessTransport::Spawn(const std::string& command) {
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
    throw EvaluationError(std::string("pipe failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw EvaluationError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::unique_ptr<ProcessTransport>(new ProcessTransport(from_child[0], to_child[1], pid));
}

ProcessTransport::~ProcessTransport() {
  close_fds();
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

std::unique_ptr<TcpTransport> TcpTransport::Connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw EvaluationError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw EvaluationError("cannot connect to " + host + ":" + service);
  ::signal(SIGPIPE, SIG_IGN);
  return std::unique_ptr<TcpTransport>(new TcpTransport(fd));
}

// ---------------------------------------------------------------------------
// Wire format. Keys are emitted in the documented order, compact, one
// object per line.

namespace wire {

std::string EncodeTopologyRequest(std::uint64_t id) {
  ordered_json j;
  j["id"] = id;
  j["op"] = "topology";
  return j.dump();
}

std::string EncodeEvaluateRequest(std::uint64_t id, const GateMask& mask, std::string_view paradigm,
                                  Split split) {
  ordered_json j;
  j["id"] = id;
  j["op"] = "evaluate";
  j["mask"] = mask.bits();
  j["paradigm"] = paradigm;
  j["split"] = SplitName(split);
  return j.dump();
}

std::string EncodeTopologyResponse(std::uint64_t id, std::size_t layers,
                                   std::size_t heads_per_layer, int protocol) {
  ordered_json j;
  j["id"] = id;
  j["layers"] = layers;
  j["heads_per_layer"] = heads_per_layer;
  j["protocol"] = protocol;
  return j.dump();
}

std::string EncodeEvaluateResponse(std::uint64_t id, double accuracy, std::size_t n) {
  ordered_json j;
  j["id"] = id;
  j["accuracy"] = accuracy;
  j["n"] = n;
  return j.dump();
}

std::string EncodeErrorResponse(std::uint64_t id, std::string_view message) {
  ordered_json j;
  j["id"] = id;
  j["error"] = message;
  return j.dump();
}

namespace {

json ParseObject(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not an object");
  auto id = j.find("id");
  if (id == j.end() || !id->is_number_unsigned()) {
    throw ProtocolError("message lacks an unsigned integer id");
  }
  return j;
}

}  // namespace

Request DecodeRequest(std::string_view line) {
  const json j = ParseObject(line);
  Request r;
  r.id = j.at("id").get<std::uint64_t>();
  auto op = j.find("op");
  if (op == j.end() || !op->is_string()) throw ProtocolError("request lacks an op");
  r.op = op->get<std::string>();
  if (r.op == "topology") return r;
  if (r.op != "evaluate") throw ProtocolError("unknown op '" + r.op + "'");
  try {
    for (const auto& b : j.at("mask")) {
      const auto v = b.get<int>();
      if (v != 0 && v != 1) throw ProtocolError("mask entries must be 0 or 1");
      r.mask.push_back(static_cast<std::uint8_t>(v));
    }
    r.paradigm = j.at("paradigm").get<std::string>();
    r.split = j.at("split").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed evaluate request: ") + e.what());
  }
  return r;
}

Response DecodeResponse(std::string_view line) {
  json j = ParseObject(line);
  Response r;
  r.id = j.at("id").get<std::uint64_t>();
  if (auto e = j.find("error"); e != j.end()) {
    if (!e->is_string()) throw ProtocolError("error field must be a string");
    r.error = e->get<std::string>();
  }
  r.body = std::move(j);
  return r;
}

}  // namespace wire

// ---------------------------------------------------------------------------
// Adapter.

ExternalEvaluator::ExternalEvaluator(std::unique_ptr<LineTransport> transport,
                                     ExternalOptions options, std::string host_label)
    : transport_(std::move(transport)), options_(options), host_label_(std::move(host_label)) {
  reader_ = std::thread([this] { reader_loop(); });
  const std::uint64_t id = next_id_++;
  wire::Response response;
  try {
    auto future = submit(id, wire::EncodeTopologyRequest(id));
    response = await(id, future);
  } catch (...) {
    stop_ = true;
    reader_.join();
    throw;
  }
  auto fail = [&](const std::string& message) {
    stop_ = true;
    reader_.join();
    throw ProtocolError(message);
  };
  if (response.error) fail("host rejected handshake: " + *response.error);
  const json& body = response.body;
  if (!body.contains("protocol") || !body["protocol"].is_number_integer() ||
      body["protocol"].get<int>() != wire::kProtocolVersion) {
    fail("host speaks protocol " + (body.contains("protocol") ? body["protocol"].dump() : "?") +
         ", expected " + std::to_string(wire::kProtocolVersion));
  }
  try {
    topology_ = ModelTopology(body.at("layers").get<std::size_t>(),
                              body.at("heads_per_layer").get<std::size_t>());
  } catch (const json::exception& e) {
    fail(std::string("bad topology response: ") + e.what());
  }
  std::size_t declared = 1;
  if (body.contains("concurrency") && body["concurrency"].is_number_unsigned()) {
    declared = std::max<std::size_t>(1, body["concurrency"].get<std::size_t>());
  }
  concurrency_ = std::max<std::size_t>(1, std::min(declared, options_.max_in_flight));
}

ExternalEvaluator::~ExternalEvaluator() {
  stop_ = true;
  if (reader_.joinable()) reader_.join();
}

std::future<wire::Response> ExternalEvaluator::submit(std::uint64_t id, const std::string& line) {
  std::future<wire::Response> future;
  {
    std::lock_guard lock(mutex_);
    if (!broken_.empty()) throw EvaluationError(broken_, id);
    future = pending_[id].get_future();
  }
  try {
    transport_->send_line(line);
  } catch (const EvaluationError& e) {
    std::lock_guard lock(mutex_);
    pending_.erase(id);
    throw EvaluationError(e.what(), id);
  }
  return future;
}

wire::Response ExternalEvaluator::await(std::uint64_t id, std::future<wire::Response>& future) {
  if (future.wait_for(options_.timeout) != std::future_status::ready) {
    std::lock_guard lock(mutex_);
    pending_.erase(id);
    throw EvaluationError("request " + std::to_string(id) + " timed out", id);
  }
  return future.get();
}

void ExternalEvaluator::fail_all(const std::string& message) {
  std::lock_guard lock(mutex_);
  for (auto& [id, promise] : pending_) {
    promise.set_exception(std::make_exception_ptr(EvaluationError(message, id)));
  }
  pending_.clear();
}

void ExternalEvaluator::reader_loop() {
  auto give_up = [this](const std::string& message) {
    {
      std::lock_guard lock(mutex_);
      broken_ = message;
    }
    fail_all(message);
  };
  while (!stop_) {
    std::optional<std::string> line;
    try {
      line = transport_->receive_line(std::chrono::milliseconds(50));
    } catch (const EvaluationError& e) {
      give_up(e.what());
      return;
    }
    if (!line) continue;
    wire::Response response;
    try {
      response = wire::DecodeResponse(*line);
    } catch (const ProtocolError& e) {
      give_up(e.what());
      return;
    }
    std::unique_lock lock(mutex_);
    auto it = pending_.find(response.id);
    if (it == pending_.end()) {
      lock.unlock();
      give_up("host answered unknown request id " + std::to_string(response.id));
      return;
    }
    it->second.set_value(std::move(response));
    pending_.erase(it);
  }
}

EvaluationResult ExternalEvaluator::evaluate(const GateMask& mask, std::string_view paradigm_id,
                                             Split split) {
  mask.check_topology(topology_);
  {
    std::unique_lock lock(mutex_);
    slots_.wait(lock, [&] { return in_flight_ < concurrency_; });
    ++in_flight_;
  }
  struct Release {
    ExternalEvaluator* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slots_.notify_one();
    }
  } release{this};

  const std::uint64_t id = next_id_++;
  auto future = submit(id, wire::EncodeEvaluateRequest(id, mask, paradigm_id, split));
  const wire::Response response = await(id, future);
  if (response.error) throw EvaluationError("host error: " + *response.error, id);
  try {
    const double accuracy = response.body.at("accuracy").get<double>();
    const auto n = response.body.at("n").get<std::size_t>();
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
      throw EvaluationError("host accuracy outside [0, 1]", id);
    }
    return {accuracy, n};
  } catch (const json::exception& e) {
    throw EvaluationError(std::string("malformed evaluate response: ") + e.what(), id);
  }
}

}  // namespace shvprobe
