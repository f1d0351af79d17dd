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

#ifndef SHVPROBE_ERRORS_HPP_
#define SHVPROBE_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shvprobe {

// Broad error families. The CLI maps these onto exit codes.
enum class ErrorKind {
  kTopology,
  kParse,
  kValidation,
  kInsufficientData,
  kConfiguration,
  kLookup,
  kInput,
  kEvaluation,
  kProtocol,
  kTraining,
  kBudget,
  kDomain,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class TopologyError : public Error {
 public:
  explicit TopologyError(const std::string& m) : Error(ErrorKind::kTopology, m) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& m)
      : Error(ErrorKind::kParse, file + ":" + std::to_string(line) + ": " + m),
        file_(file),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(ErrorKind::kValidation, m) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& m) : Error(ErrorKind::kInsufficientData, m) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& m) : Error(ErrorKind::kConfiguration, m) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& m) : Error(ErrorKind::kLookup, m) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& m) : Error(ErrorKind::kInput, m) {}
};

// Carries the wire request id when the failure happened on an external host.
class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& m, std::uint64_t request_id = 0)
      : Error(ErrorKind::kEvaluation, m), request_id_(request_id) {}

  std::uint64_t request_id() const { return request_id_; }

 private:
  std::uint64_t request_id_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& m) : Error(ErrorKind::kProtocol, m) {}
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& m, std::string loss_trace)
      : Error(ErrorKind::kTraining, m), loss_trace_(std::move(loss_trace)) {}

  const std::string& loss_trace() const { return loss_trace_; }

 private:
  std::string loss_trace_;
};

class BudgetError : public Error {
 public:
  explicit BudgetError(const std::string& m) : Error(ErrorKind::kBudget, m) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& m) : Error(ErrorKind::kDomain, m) {}
};

}  // namespace shvprobe

#endif  // SHVPROBE_ERRORS_HPP_
