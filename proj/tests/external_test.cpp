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

#include <arpa/inet.h>
#include <gtest/gtest.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <deque>
#include <future>
#include <thread>

#include "shvprobe/errors.hpp"
#include "shvprobe/planted.hpp"
#include "test_util.hpp"

namespace shvprobe {
namespace {

using namespace std::chrono_literals;

TEST(WireTest, EncodesCompactFixedOrder) {
  EXPECT_EQ(wire::EncodeTopologyRequest(0), R"({"id":0,"op":"topology"})");
  EXPECT_EQ(wire::EncodeEvaluateRequest(7, GateMask::FromBits({1, 0, 1}), "p", Split::kDev),
            R"({"id":7,"op":"evaluate","mask":[1,0,1],"paradigm":"p","split":"dev"})");
  EXPECT_EQ(wire::EncodeTopologyResponse(0, 12, 12),
            R"({"id":0,"layers":12,"heads_per_layer":12,"protocol":1})");
  EXPECT_EQ(wire::EncodeEvaluateResponse(3, 0.75, 100), R"({"id":3,"accuracy":0.75,"n":100})");
  EXPECT_EQ(wire::EncodeErrorResponse(4, "boom"), R"({"id":4,"error":"boom"})");
}

TEST(WireTest, DecodesRequests) {
  const auto r = wire::DecodeRequest(
      R"({"split":"attribution","paradigm":"q","mask":[0,1],"op":"evaluate","id":9})");
  EXPECT_EQ(r.id, 9u);
  EXPECT_EQ(r.op, "evaluate");
  EXPECT_EQ(r.mask, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_EQ(r.paradigm, "q");
  EXPECT_EQ(r.split, "attribution");
  EXPECT_EQ(wire::DecodeRequest(R"({"id":1,"op":"topology"})").op, "topology");
}

TEST(WireTest, RejectsMalformedMessages) {
  EXPECT_THROW(wire::DecodeRequest("{not json"), ProtocolError);
  EXPECT_THROW(wire::DecodeRequest("[1,2]"), ProtocolError);
  EXPECT_THROW(wire::DecodeRequest(R"({"op":"topology"})"), ProtocolError);
  EXPECT_THROW(wire::DecodeRequest(R"({"id":-1,"op":"topology"})"), ProtocolError);
  EXPECT_THROW(wire::DecodeRequest(R"({"id":1,"op":"train"})"), ProtocolError);
  EXPECT_THROW(
      wire::DecodeRequest(R"({"id":1,"op":"evaluate","mask":[2],"paradigm":"p","split":"dev"})"),
      ProtocolError);
  EXPECT_THROW(wire::DecodeRequest(R"({"id":1,"op":"evaluate","mask":[1]})"), ProtocolError);
  EXPECT_THROW(wire::DecodeResponse(R"({"id":1,"error":5})"), ProtocolError);
}

TEST(WireTest, DecodesResponses) {
  const auto ok = wire::DecodeResponse(R"({"id":2,"accuracy":0.5,"n":10})");
  EXPECT_EQ(ok.id, 2u);
  EXPECT_FALSE(ok.error);
  EXPECT_EQ(ok.body["n"], 10);
  const auto bad = wire::DecodeResponse(R"({"id":3,"error":"nope"})");
  EXPECT_EQ(bad.error.value_or(""), "nope");
}

// Two layers of three heads, additive games "p" and "q".
class FakeHostTest : public ::testing::Test {
 protected:
  void SetUp() override {
    spec_.topology = ModelTopology(2, 3);
    for (const char* id : {"p", "q"}) {
      PlantedGame g;
      g.paradigm_id = id;
      g.category = "c";
      g.base = 0.4;
      g.weights.resize(6);
      g.weights << 0.1, 0.05, 0.0, 0.2, id[0] == 'p' ? 0.15 : -0.1, 0.01;
      spec_.games.push_back(g);
    }
    spec_.save(dir_ / "planted.json");
  }

  std::string Command(const std::string& flags = "") const {
    return std::string(SHVPROBE_FAKE_HOST) + " --planted " + (dir_ / "planted.json").string() +
           " " + flags;
  }

  std::unique_ptr<ExternalEvaluator> Connect(const std::string& flags = "",
                                             ExternalOptions options = {}) {
    return std::make_unique<ExternalEvaluator>(ProcessTransport::Spawn(Command(flags)), options,
                                               "fake");
  }

  testing::TempDir dir_;
  PlantedGameSpec spec_;
};

TEST_F(FakeHostTest, HandshakeReportsTopology) {
  auto ev = Connect();
  EXPECT_EQ(ev->topology(), ModelTopology(2, 3));
  EXPECT_EQ(ev->backend_id(), "external:fake");
  EXPECT_EQ(ev->concurrency_limit(), 1u);
}

TEST_F(FakeHostTest, EvaluateMatchesPlantedValues) {
  auto ev = Connect();
  PlantedEvaluator local(spec_);
  for (std::uint32_t bits = 0; bits < 64; ++bits) {
    std::vector<std::uint8_t> v;
    for (int h = 0; h < 6; ++h) v.push_back((bits >> h) & 1u);
    const GateMask m = GateMask::FromBits(v);
    for (const char* id : {"p", "q"}) {
      EXPECT_EQ(ev->evaluate(m, id, Split::kDev).accuracy,
                local.evaluate(m, id, Split::kDev).accuracy);
    }
  }
}

TEST_F(FakeHostTest, OutOfOrderAnswersAreMatchedById) {
  ExternalOptions opt;
  opt.max_in_flight = 4;
  auto ev = Connect("--reorder --concurrency 2", opt);
  EXPECT_EQ(ev->concurrency_limit(), 2u);
  PlantedEvaluator local(spec_);
  const GateMask a = GateMask::FromBits({1, 0, 1, 1, 0, 1});
  const GateMask b = GateMask::FromBits({0, 1, 1, 0, 1, 1});
  for (int round = 0; round < 5; ++round) {
    auto fa = std::async(std::launch::async, [&] { return ev->evaluate(a, "p", Split::kDev); });
    auto fb = std::async(std::launch::async, [&] { return ev->evaluate(b, "q", Split::kDev); });
    EXPECT_EQ(fa.get().accuracy, local.evaluate(a, "p", Split::kDev).accuracy);
    EXPECT_EQ(fb.get().accuracy, local.evaluate(b, "q", Split::kDev).accuracy);
  }
}

TEST_F(FakeHostTest, ConcurrencyIsCappedByOptions) {
  ExternalOptions opt;
  opt.max_in_flight = 1;
  auto ev = Connect("--concurrency 8", opt);
  EXPECT_EQ(ev->concurrency_limit(), 1u);
}

TEST_F(FakeHostTest, VersionMismatchIsProtocolError) {
  EXPECT_THROW(Connect("--protocol 2"), ProtocolError);
}

TEST_F(FakeHostTest, HostErrorIsEvaluationError) {
  auto ev = Connect("--error-paradigm q");
  const GateMask on = GateMask::AllOn(ev->topology());
  EXPECT_THROW(ev->evaluate(on, "q", Split::kDev), EvaluationError);
  EXPECT_NEAR(ev->evaluate(on, "p", Split::kDev).accuracy, 0.91, 1e-12);
  EXPECT_THROW(ev->evaluate(on, "missing", Split::kDev), EvaluationError);
}

TEST_F(FakeHostTest, WrongMaskLengthIsCheckedLocally) {
  auto ev = Connect();
  EXPECT_THROW(ev->evaluate(GateMask::FromBits({1, 1}), "p", Split::kDev), TopologyError);
}

TEST_F(FakeHostTest, GarbageLineEndsTheSession) {
  ExternalOptions opt;
  opt.timeout = 2000ms;
  // The handshake is answer 1; the garbage follows answer 2.
  auto ev = Connect("--garbage-after 2 --delay-ms 20", opt);
  const GateMask on = GateMask::AllOn(ev->topology());
  EXPECT_NO_THROW(ev->evaluate(on, "p", Split::kDev));
  EXPECT_THROW(ev->evaluate(on, "p", Split::kDev), EvaluationError);
  EXPECT_THROW(ev->evaluate(on, "q", Split::kDev), EvaluationError);
}

TEST_F(FakeHostTest, UnknownIdEndsTheSession) {
  auto ev = Connect("--wrong-id-after 1");
  const GateMask on = GateMask::AllOn(ev->topology());
  EXPECT_THROW(ev->evaluate(on, "p", Split::kDev), EvaluationError);
  EXPECT_THROW(ev->evaluate(on, "p", Split::kDev), EvaluationError);
}

TEST_F(FakeHostTest, HostExitBreaksTheEvaluator) {
  auto ev = Connect("--exit-after 2");
  const GateMask on = GateMask::AllOn(ev->topology());
  EXPECT_NO_THROW(ev->evaluate(on, "p", Split::kDev));
  EXPECT_THROW(ev->evaluate(on, "p", Split::kDev), EvaluationError);
  EXPECT_THROW(ev->evaluate(on, "p", Split::kDev), EvaluationError);
}

TEST_F(FakeHostTest, SilentHostTimesOut) {
  ExternalOptions opt;
  opt.timeout = 200ms;
  EXPECT_THROW(ExternalEvaluator(ProcessTransport::Spawn("cat > /dev/null"), opt), EvaluationError);
}

TEST(ProcessTransportTest, MissingCommandFailsHandshake) {
  ExternalOptions opt;
  opt.timeout = 2000ms;
  EXPECT_THROW(ExternalEvaluator(ProcessTransport::Spawn("/nonexistent/host 2>/dev/null"), opt),
               EvaluationError);
}

// Answers the handshake, then drops every evaluate request.
class MuteTransport : public LineTransport {
 public:
  void send_line(std::string_view line) override {
    std::lock_guard lock(mutex_);
    const auto req = wire::DecodeRequest(line);
    if (req.op == "topology") queue_.push_back(wire::EncodeTopologyResponse(req.id, 1, 2));
  }
  std::optional<std::string> receive_line(std::chrono::milliseconds timeout) override {
    {
      std::lock_guard lock(mutex_);
      if (!queue_.empty()) {
        std::string line = queue_.front();
        queue_.pop_front();
        return line;
      }
    }
    std::this_thread::sleep_for(std::min(timeout, std::chrono::milliseconds(5)));
    return std::nullopt;
  }

 private:
  std::mutex mutex_;
  std::deque<std::string> queue_;
};

TEST(ExternalEvaluatorTest, EvaluateTimesOut) {
  ExternalOptions opt;
  opt.timeout = 100ms;
  ExternalEvaluator ev(std::make_unique<MuteTransport>(), opt);
  EXPECT_EQ(ev.topology(), ModelTopology(1, 2));
  EXPECT_THROW(ev.evaluate(GateMask::FromBits({1, 0}), "p", Split::kDev), EvaluationError);
}

TEST(TcpTransportTest, ServesOverLoopback) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(listener, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ASSERT_EQ(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(listener, 1), 0);
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  const std::uint16_t port = ntohs(addr.sin_port);

  std::thread server([listener] {
    const int fd = ::accept(listener, nullptr, nullptr);
    FdLineTransport io(fd, fd);
    try {
      for (;;) {
        const auto line = io.receive_line(5000ms);
        if (!line) return;
        const auto req = wire::DecodeRequest(*line);
        if (req.op == "topology") {
          io.send_line(wire::EncodeTopologyResponse(req.id, 1, 3));
        } else {
          double on = 0;
          for (auto b : req.mask) on += b;
          io.send_line(wire::EncodeEvaluateResponse(req.id, on / 4.0, 8));
        }
      }
    } catch (const EvaluationError&) {
    }
  });
  {
    ExternalEvaluator ev(TcpTransport::Connect("127.0.0.1", port), {}, "tcp");
    EXPECT_EQ(ev.topology(), ModelTopology(1, 3));
    const auto r = ev.evaluate(GateMask::FromBits({1, 0, 1}), "p", Split::kTrain);
    EXPECT_EQ(r.accuracy, 0.5);
    EXPECT_EQ(r.n_examples, 8u);
  }
  server.join();
  ::close(listener);
}

TEST(TcpTransportTest, RefusedConnectionIsEvaluationError) {
  EXPECT_THROW(TcpTransport::Connect("127.0.0.1", 1), EvaluationError);
}

}  // namespace
}  // namespace shvprobe
