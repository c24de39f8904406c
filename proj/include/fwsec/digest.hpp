#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace fwsec {

/// Incremental SHA-256. Content identity throughout the pipeline (finding
/// ids, source-tree refs, campaign state digests) is derived from this one
/// primitive so identities stay stable across platforms and reruns.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::array<std::uint8_t, 32> finish();

 private:
  void process_block(const std::uint8_t* block);

  std::array<std::uint32_t, 8> state_{};
  std::array<std::uint8_t, 64> buffer_{};
  std::uint64_t total_len_ = 0;
  std::size_t buffer_len_ = 0;
};

/// Full SHA-256 as 64 lowercase hex chars.
std::string sha256_hex(std::string_view data);

/// Truncated 128-bit digest (first 16 bytes of SHA-256) as 32 hex chars.
/// This is the project-wide short identity format.
std::string digest128_hex(std::string_view data);

/// A firmware snapshot: relative path -> full file text. std::map keeps the
/// iteration order sorted so digests and serializations are deterministic.
using SourceTree = std::map<std::string, std::string>;

/// Content digest of a source tree. Covers paths and bytes, path order
/// sorted; layout: "<path>\n<size>\n<bytes>\n" per file.
std::string tree_digest(const SourceTree& tree);

}  // namespace fwsec
