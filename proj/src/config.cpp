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

#include "fasten/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fasten/error.hpp"

namespace fasten {

using json = nlohmann::json;

namespace {

template <typename T>
void read_positive(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::int64_t>();
  if (v <= 0) throw Error(Errc::kInvalidArgument, std::string("config: ") + key + " must be positive");
  out = static_cast<T>(v);
}

void read_weight(const json& w, const char* key, double& out) {
  if (!w.contains(key)) return;
  out = w.at(key).get<double>();
  if (!(out >= 0.0)) throw Error(Errc::kInvalidArgument, std::string("config: weight ") + key + " is negative");
}

}  // namespace

std::string EngineConfig::to_json() const {
  const auto& w = rating_weights;
  json j{{"n_servers", n_servers},
         {"server_capacity", server_capacity},
         {"attribute_seed", attribute_seed},
         {"default_block_size", default_block_size},
         {"default_redundancy", default_redundancy},
         {"max_servers_per_user", max_servers_per_user},
         {"rating_weights", {{"a", w.dedup}, {"b", w.load}, {"c", w.query}, {"d", w.distance}, {"e", w.capacity}}},
         {"preferred_query_size", preferred_query_size},
         {"snapshot_path", snapshot_path.string()}};
  return j.dump();
}

EngineConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "config: expected a JSON object");

  static const std::set<std::string> kKnown = {
      "n_servers",          "server_capacity",      "attribute_seed",  "default_block_size",
      "default_redundancy", "max_servers_per_user", "rating_weights", "preferred_query_size",
      "snapshot_path"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw Error(Errc::kInvalidArgument, "config: unknown key '" + key + "'");
  }

  EngineConfig c;
  try {
    read_positive(j, "n_servers", c.n_servers);
    read_positive(j, "server_capacity", c.server_capacity);
    if (j.contains("attribute_seed")) c.attribute_seed = j.at("attribute_seed").get<std::uint64_t>();
    read_positive(j, "default_block_size", c.default_block_size);
    read_positive(j, "default_redundancy", c.default_redundancy);
    read_positive(j, "max_servers_per_user", c.max_servers_per_user);
    if (j.contains("rating_weights")) {
      const auto& w = j.at("rating_weights");
      read_weight(w, "a", c.rating_weights.dedup);
      read_weight(w, "b", c.rating_weights.load);
      read_weight(w, "c", c.rating_weights.query);
      read_weight(w, "d", c.rating_weights.distance);
      read_weight(w, "e", c.rating_weights.capacity);
    }
    if (j.contains("preferred_query_size")) {
      c.preferred_query_size = j.at("preferred_query_size").get<double>();
      if (!(c.preferred_query_size > 0)) {
        throw Error(Errc::kInvalidArgument, "config: preferred_query_size must be positive");
      }
    }
    if (j.contains("snapshot_path")) c.snapshot_path = j.at("snapshot_path").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  EngineConfig c = parse_config(buf.str());
  if (c.snapshot_path.is_relative()) c.snapshot_path = path.parent_path() / c.snapshot_path;
  return c;
}

}  // namespace fasten
