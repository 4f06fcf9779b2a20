// Copyright 2026 The Fasten Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fasten/placement.hpp"
#include "fasten/workflows.hpp"

namespace fasten {

struct EngineConfig {
  std::size_t n_servers = 20;
  std::uint64_t server_capacity = 100000;
  std::uint64_t attribute_seed = 1;
  std::size_t default_block_size = 64 * 1024;
  std::size_t default_redundancy = 3;
  std::size_t max_servers_per_user = 20;
  RatingWeights rating_weights;
  double preferred_query_size = 256.0 * 1024;
  std::filesystem::path snapshot_path = "fasten.snapshot";

  EngineSettings settings() const { return {rating_weights, preferred_query_size}; }
  std::string to_json() const;
};

// One JSON object; absent keys keep their defaults, unknown keys and
// non-positive counts or negative weights are rejected with
// Error(kInvalidArgument).
EngineConfig parse_config(std::string_view text);

// A relative snapshot_path is resolved against the config file's directory.
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace fasten
