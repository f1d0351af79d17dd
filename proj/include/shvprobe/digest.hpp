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

#ifndef SHVPROBE_DIGEST_HPP_
#define SHVPROBE_DIGEST_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace shvprobe {

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view data);
std::string Sha256Hex(std::span<const std::uint8_t> data);

// Incremental SHA-256 for digests over many records.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data);
  std::string hex_digest();

 private:
  void* ctx_;
};

}  // namespace shvprobe

#endif  // SHVPROBE_DIGEST_HPP_
