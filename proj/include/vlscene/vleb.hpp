#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "vlscene/embedding.hpp"

namespace vlscene {

// VLEB embedding bundle, all integers little-endian:
//
//   offset 0   magic "VLEB"
//   offset 4   u32 version (1)
//   offset 8   u32 dim
//   offset 12  u32 count
//   offset 16  u32 meta_len
//   offset 20  meta_len bytes of UTF-8 JSON metadata
//   then       count * dim IEEE-754 binary32 values, row-major
//
// Metadata keys: "kind" (required), "labels" (optional, one per row),
// "extra" (optional object).
inline constexpr std::uint32_t kVlebVersion = 1;
inline constexpr std::size_t kVlebHeaderSize = 20;

struct BundleMeta {
  std::string kind;
  std::optional<std::vector<std::string>> labels;
  nlohmann::json extra;  // null when absent

  friend bool operator==(const BundleMeta&, const BundleMeta&) = default;
};

struct Bundle {
  std::uint32_t dim = 0;
  std::uint32_t count = 0;
  BundleMeta meta;
  std::vector<float> payload;  // count * dim

  std::span<const float> row(std::size_t i) const { return {payload.data() + i * dim, dim}; }
};

bool is_known_kind(std::string_view kind);

std::string serialize_meta(const BundleMeta& meta);

std::vector<std::uint8_t> serialize_bundle(const Bundle& bundle);
Bundle parse_bundle(std::span<const std::uint8_t> bytes);

// Rounds each value to the nearest binary32 (ties to even).
Bundle make_bundle(std::span<const Embedding> embeddings, BundleMeta meta,
                   std::uint32_t dim_if_empty = 0);
std::vector<Embedding> bundle_embeddings(const Bundle& bundle);

void write_bundle(const std::filesystem::path& path, const Bundle& bundle);
Bundle read_bundle(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Bit-exact comparison (distinguishes signed zeros).
bool bitwise_equal(const Bundle& a, const Bundle& b);

}  // namespace vlscene
