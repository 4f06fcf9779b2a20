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

#include "fasten/error.hpp"

namespace fasten {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidArgument: return "invalid argument";
    case Errc::kInvalidBlockSize: return "invalid block size";
    case Errc::kCorruptCiphertext: return "corrupt ciphertext";
    case Errc::kNotFound: return "not found";
    case Errc::kSlotConflict: return "slot conflict";
    case Errc::kRedundantPlacement: return "redundant placement";
    case Errc::kNoSpace: return "no space";
    case Errc::kUnavailable: return "unavailable";
    case Errc::kEmptySlot: return "empty slot";
    case Errc::kNoSuchServer: return "no such server";
    case Errc::kInfeasibleRedundancy: return "infeasible redundancy";
    case Errc::kSubsetSplit: return "Error";
    case Errc::kNotEnoughServers: return "not enough servers";
    case Errc::kUnrecoverable: return "unrecoverable";
    case Errc::kCorruptSnapshot: return "corrupt snapshot";
    case Errc::kEmptyTree: return "empty tree";
    case Errc::kOutOfRange: return "index out of range";
  }
  return "unknown error";
}

namespace {

std::string format_message(Errc code, const std::string& detail) {
  std::string msg(errc_name(code));
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}

}  // namespace

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(format_message(code, detail)), code_(code) {}

}  // namespace fasten
