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

#include "fasten/codec.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

#include "fasten/error.hpp"

namespace fasten {

namespace {

using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;

constexpr int kIvLen = 16;

CipherCtx new_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new(), &EVP_CIPHER_CTX_free);
  if (!ctx) throw std::bad_alloc();
  return ctx;
}

std::array<std::uint8_t, kIvLen> synthetic_iv(const ConvergentKey& key) {
  const Digest h = sha256(ByteView(key.bytes));
  std::array<std::uint8_t, kIvLen> iv{};
  std::copy_n(h.begin(), kIvLen, iv.begin());
  return iv;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Digest sha256(ByteView data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("EVP_Digest failed");
  }
  return out;
}

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

Bytes bytes_from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::kInvalidArgument, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::kInvalidArgument, "bad hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) throw Error(Errc::kInvalidArgument, "digest must be 64 hex digits");
  const Bytes raw = bytes_from_hex(hex);
  Digest d{};
  std::copy(raw.begin(), raw.end(), d.begin());
  return d;
}

ConvergentKey derive_convergent_key(ByteView plaintext) { return {sha256(plaintext)}; }

Bytes encrypt(ByteView plaintext, const ConvergentKey& key) {
  const auto iv = synthetic_iv(key);
  auto ctx = new_ctx();
  Bytes out(plaintext.size() + kCipherOverhead);
  int len = 0;
  bool ok = EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kIvLen, nullptr) == 1 &&
            EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes.data(), iv.data()) == 1;
  if (ok && !plaintext.empty()) {
    ok = EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                           static_cast<int>(plaintext.size())) == 1;
  }
  int tail = 0;
  ok = ok && EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &tail) == 1 &&
       EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kCipherOverhead,
                           out.data() + plaintext.size()) == 1;
  if (!ok) throw std::runtime_error("AES-256-GCM encryption failed");
  return out;
}

Bytes decrypt(ByteView ciphertext, const ConvergentKey& key) {
  if (ciphertext.size() < kCipherOverhead) {
    throw Error(Errc::kCorruptCiphertext, "shorter than the authentication tag");
  }
  const std::size_t body = ciphertext.size() - kCipherOverhead;
  const auto iv = synthetic_iv(key);
  auto ctx = new_ctx();
  Bytes out(body);
  int len = 0;
  bool ok = EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
            EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kIvLen, nullptr) == 1 &&
            EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes.data(), iv.data()) == 1;
  if (ok && body > 0) {
    ok = EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(),
                           static_cast<int>(body)) == 1;
  }
  Bytes tag(ciphertext.begin() + static_cast<std::ptrdiff_t>(body), ciphertext.end());
  ok = ok && EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kCipherOverhead, tag.data()) == 1;
  int tail = 0;
  if (!ok || EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &tail) != 1) {
    throw Error(Errc::kCorruptCiphertext, "authentication failed");
  }
  return out;
}

CipherBlockSequence chunk(ByteView ciphertext, std::size_t block_size) {
  if (block_size == 0) throw Error(Errc::kInvalidBlockSize, "block size must be positive");
  CipherBlockSequence seq;
  seq.block_size = block_size;
  seq.original_len = ciphertext.size();
  const std::size_t n = (ciphertext.size() + block_size - 1) / block_size;
  seq.pad_len = n * block_size - ciphertext.size();
  seq.blocks.reserve(n);
  for (std::size_t off = 0; off < ciphertext.size(); off += block_size) {
    const std::size_t take = std::min(block_size, ciphertext.size() - off);
    Bytes block(block_size, 0);
    std::copy_n(ciphertext.begin() + static_cast<std::ptrdiff_t>(off), take, block.begin());
    seq.blocks.push_back(std::move(block));
  }
  return seq;
}

Bytes reassemble(const CipherBlockSequence& seq) {
  Bytes out;
  out.reserve(seq.blocks.size() * seq.block_size);
  for (const auto& b : seq.blocks) out.insert(out.end(), b.begin(), b.end());
  out.resize(seq.original_len);
  return out;
}

std::vector<BlockTag> tag_blocks(const CipherBlockSequence& seq) {
  std::vector<BlockTag> tags;
  tags.reserve(seq.blocks.size());
  for (const auto& b : seq.blocks) tags.push_back({sha256(ByteView(b))});
  return tags;
}

SealedFile seal(ByteView plaintext, std::size_t block_size) {
  if (block_size <= kCipherOverhead) {
    throw Error(Errc::kInvalidBlockSize,
                "block size must exceed the " + std::to_string(kCipherOverhead) +
                    "-byte cipher overhead");
  }
  const std::size_t segment = block_size - kCipherOverhead;
  const std::size_t n_segments = plaintext.empty() ? 1 : (plaintext.size() + segment - 1) / segment;

  SealedFile out;
  out.keys.reserve(n_segments);
  Bytes ciphertext;
  ciphertext.reserve(plaintext.size() + n_segments * kCipherOverhead);
  for (std::size_t i = 0; i < n_segments; ++i) {
    const std::size_t off = i * segment;
    const auto piece = plaintext.subspan(off, std::min(segment, plaintext.size() - off));
    const ConvergentKey key = derive_convergent_key(piece);
    const Bytes sealed = encrypt(piece, key);
    ciphertext.insert(ciphertext.end(), sealed.begin(), sealed.end());
    out.keys.push_back(key);
  }
  out.file_tag = {sha256(ByteView(ciphertext))};
  out.blocks = chunk(ciphertext, block_size);
  out.tags = tag_blocks(out.blocks);
  return out;
}

Bytes unseal(std::span<const Bytes> blocks, std::span<const ConvergentKey> keys,
             std::size_t block_size, std::size_t original_len) {
  if (block_size <= kCipherOverhead) throw Error(Errc::kInvalidBlockSize);
  if (blocks.size() != keys.size() || original_len > blocks.size() * block_size) {
    throw Error(Errc::kCorruptCiphertext, "block and key lists do not match");
  }
  Bytes plaintext;
  plaintext.reserve(original_len);
  std::size_t remaining = original_len;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].size() != block_size) throw Error(Errc::kCorruptCiphertext, "bad block length");
    const std::size_t take = std::min(block_size, remaining);
    const Bytes piece = decrypt(ByteView(blocks[i]).first(take), keys[i]);
    plaintext.insert(plaintext.end(), piece.begin(), piece.end());
    remaining -= take;
  }
  if (remaining != 0) throw Error(Errc::kCorruptCiphertext, "ciphertext length mismatch");
  return plaintext;
}

}  // namespace fasten
