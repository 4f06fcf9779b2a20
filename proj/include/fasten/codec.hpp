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

// Deterministic data pipeline: convergent keys, AES-256-GCM with a
// synthetic IV, fixed-size chunking and SHA-256 block tags.

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fasten {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(ByteView data);
inline Digest sha256(std::string_view s) {
  return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// Lowercase hex.
std::string to_hex(ByteView data);
inline std::string to_hex(const Digest& d) { return to_hex(ByteView(d)); }
// Throws Error(kInvalidArgument) unless `hex` is exactly 64 hex digits.
Digest digest_from_hex(std::string_view hex);
Bytes bytes_from_hex(std::string_view hex);

/// SHA-256 of one encrypted block. The dedup, audit and index key.
struct BlockTag {
  Digest digest{};

  std::string hex() const { return to_hex(digest); }
  static BlockTag from_hex(std::string_view hex) { return {digest_from_hex(hex)}; }

  friend auto operator<=>(const BlockTag&, const BlockTag&) = default;
};

struct ConvergentKey {
  Digest bytes{};

  friend bool operator==(const ConvergentKey&, const ConvergentKey&) = default;
};

ConvergentKey derive_convergent_key(ByteView plaintext);

// GCM tag appended to every ciphertext.
inline constexpr std::size_t kCipherOverhead = 16;

// Deterministic: the IV is the first 16 bytes of SHA-256(key), so equal
// (plaintext, key) pairs always give equal ciphertext. Output is
// plaintext.size() + kCipherOverhead bytes.
Bytes encrypt(ByteView plaintext, const ConvergentKey& key);

// Throws Error(kCorruptCiphertext) on a wrong key, truncation or tampering.
Bytes decrypt(ByteView ciphertext, const ConvergentKey& key);

struct CipherBlockSequence {
  std::vector<Bytes> blocks;  // each exactly block_size bytes
  std::size_t block_size = 0;
  std::size_t original_len = 0;
  std::size_t pad_len = 0;
};

// Splits into ceil(len / block_size) blocks, zero-padding the last one.
// An empty input yields no blocks. Throws Error(kInvalidBlockSize) when
// block_size is 0.
CipherBlockSequence chunk(ByteView ciphertext, std::size_t block_size);

// Inverse of chunk(): concatenates and strips the padding.
Bytes reassemble(const CipherBlockSequence& seq);

std::vector<BlockTag> tag_blocks(const CipherBlockSequence& seq);

/// Output of the upload pipeline for one file.
///
/// The plaintext is cut into segments of block_size - kCipherOverhead
/// bytes and each segment is convergently encrypted on its own, so cipher
/// block i is exactly the sealed segment i. Equal plaintext segments at
/// aligned offsets therefore produce equal tags, in this file or any other.
struct SealedFile {
  std::vector<ConvergentKey> keys;  // one per block
  CipherBlockSequence blocks;
  std::vector<BlockTag> tags;
  BlockTag file_tag;  // SHA-256 of the whole (unpadded) ciphertext
};

// Requires block_size > kCipherOverhead. The empty plaintext seals to a
// single block.
SealedFile seal(ByteView plaintext, std::size_t block_size);

// Rebuilds the plaintext from stored blocks. `original_len` is the
// unpadded ciphertext length recorded at seal time.
Bytes unseal(std::span<const Bytes> blocks, std::span<const ConvergentKey> keys,
             std::size_t block_size, std::size_t original_len);

}  // namespace fasten

template <>
struct std::hash<fasten::BlockTag> {
  std::size_t operator()(const fasten::BlockTag& tag) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | tag.digest[i];
    return h;
  }
};
