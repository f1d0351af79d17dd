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

// Serves a planted game over the evaluation protocol on stdin/stdout. Used
// by the conformance and adapter tests; flags inject protocol faults.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "shvprobe/errors.hpp"
#include "shvprobe/external.hpp"
#include "shvprobe/planted.hpp"

namespace {

using shvprobe::GateMask;
using shvprobe::PlantedEvaluator;
namespace wire = shvprobe::wire;

struct Faults {
  int protocol = wire::kProtocolVersion;
  std::size_t concurrency = 0;  // 0: field omitted
  bool reorder = false;
  std::string error_paradigm;
  std::size_t garbage_after = 0;
  std::size_t exit_after = 0;
  std::size_t wrong_id_after = 0;
  int delay_ms = 0;
};

std::string Answer(PlantedEvaluator& evaluator, const std::string& line, const Faults& f) {
  std::uint64_t id = 0;
  try {
    const auto j = nlohmann::json::parse(line);
    if (j.is_object() && j.contains("id") && j["id"].is_number_unsigned()) id = j["id"];
  } catch (const nlohmann::json::exception&) {
  }
  wire::Request req;
  try {
    req = wire::DecodeRequest(line);
  } catch (const shvprobe::Error& e) {
    return wire::EncodeErrorResponse(id, e.what());
  }
  const auto& topo = evaluator.topology();
  if (req.op == "topology") {
    std::string reply =
        wire::EncodeTopologyResponse(req.id, topo.layers(), topo.heads_per_layer(), f.protocol);
    if (f.concurrency) {
      auto j = nlohmann::ordered_json::parse(reply);
      j["concurrency"] = f.concurrency;
      reply = j.dump();
    }
    return reply;
  }
  if (req.paradigm == f.error_paradigm) {
    return wire::EncodeErrorResponse(req.id, "injected failure for " + req.paradigm);
  }
  try {
    const auto mask = GateMask::FromBits(req.mask);
    const auto r = evaluator.evaluate(mask, req.paradigm, shvprobe::ParseSplit(req.split));
    return wire::EncodeEvaluateResponse(req.id, r.accuracy, r.n_examples);
  } catch (const shvprobe::Error& e) {
    return wire::EncodeErrorResponse(req.id, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planted-game evaluation host for protocol tests", "shvprobe_fake_host"};
  std::string planted;
  Faults f;
  app.add_option("--planted", planted, "Planted game spec")->required();
  app.add_option("--protocol", f.protocol, "Protocol version announced at handshake");
  app.add_option("--concurrency", f.concurrency, "Concurrency announced at handshake");
  app.add_flag("--reorder", f.reorder, "Answer pairs of requests in reverse order");
  app.add_option("--error-paradigm", f.error_paradigm, "Paradigm answered with an error");
  app.add_option("--garbage-after", f.garbage_after, "Emit a malformed line after N answers");
  app.add_option("--exit-after", f.exit_after, "Exit after N answers");
  app.add_option("--wrong-id-after", f.wrong_id_after, "Answer with an unknown id after N answers");
  app.add_option("--delay-ms", f.delay_ms, "Sleep before each answer");
  CLI11_PARSE(app, argc, argv);

  std::signal(SIGPIPE, SIG_IGN);
  PlantedEvaluator evaluator(shvprobe::PlantedGameSpec::Load(planted));
  shvprobe::FdLineTransport io(0, 1);
  std::vector<std::string> held;
  std::size_t answered = 0;
  auto emit = [&](const std::string& reply) {
    if (f.delay_ms) std::this_thread::sleep_for(std::chrono::milliseconds(f.delay_ms));
    ++answered;
    if (f.wrong_id_after && answered > f.wrong_id_after) {
      io.send_line(wire::EncodeEvaluateResponse(999999, 0.5, 0));
    } else {
      io.send_line(reply);
    }
    if (f.garbage_after && answered == f.garbage_after) io.send_line("{not json");
    if (f.exit_after && answered >= f.exit_after) std::exit(0);
  };
  auto flush = [&] {
    for (auto it = held.rbegin(); it != held.rend(); ++it) emit(*it);
    held.clear();
  };
  try {
    for (;;) {
      const auto line = io.receive_line(std::chrono::milliseconds(f.reorder ? 100 : 60000));
      if (!line) {
        flush();
        continue;
      }
      const std::string reply = Answer(evaluator, *line, f);
      if (f.reorder && line->find("\"evaluate\"") != std::string::npos) {
        held.push_back(reply);
        if (held.size() == 2) flush();
      } else {
        emit(reply);
      }
    }
  } catch (const shvprobe::EvaluationError&) {
    try {
      flush();
    } catch (const shvprobe::EvaluationError&) {
    }
  }
  return 0;
}
