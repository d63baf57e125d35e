#include "vlscene/vleb.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace vlscene {

namespace {

constexpr std::uint8_t kMagic[4] = {'V', 'L', 'E', 'B'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[offset + i]} << (8 * i);
  return v;
}

BundleMeta parse_meta(std::string_view text, std::uint32_t count) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MetaParseError, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::MetaParseError, "metadata is not a JSON object");
  BundleMeta meta;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      if (!value.is_string()) throw Error(ErrorCode::MetaParseError, "kind must be a string");
      meta.kind = value.get<std::string>();
    } else if (key == "labels") {
      if (!value.is_array()) throw Error(ErrorCode::MetaParseError, "labels must be an array");
      std::vector<std::string> labels;
      for (const auto& item : value) {
        if (!item.is_string()) throw Error(ErrorCode::MetaParseError, "labels must be strings");
        labels.push_back(item.get<std::string>());
      }
      meta.labels = std::move(labels);
    } else if (key == "extra") {
      if (!value.is_object()) throw Error(ErrorCode::MetaParseError, "extra must be an object");
      meta.extra = value;
    } else {
      throw Error(ErrorCode::MetaParseError, "unknown metadata key '" + key + "'");
    }
  }
  if (!is_known_kind(meta.kind)) {
    throw Error(ErrorCode::MetaParseError, "unknown or missing kind '" + meta.kind + "'");
  }
  if (meta.labels && meta.labels->size() != count) {
    throw Error(ErrorCode::MetaParseError, "labels length differs from row count");
  }
  return meta;
}

}  // namespace

bool is_known_kind(std::string_view kind) {
  return kind == "image" || kind == "text" || kind == "object" || kind == "prototype" ||
         kind == "params";
}

std::string serialize_meta(const BundleMeta& meta) {
  nlohmann::ordered_json j;
  j["kind"] = meta.kind;
  if (meta.labels) j["labels"] = *meta.labels;
  if (!meta.extra.is_null()) j["extra"] = meta.extra;
  return j.dump();
}

std::vector<std::uint8_t> serialize_bundle(const Bundle& bundle) {
  if (bundle.payload.size() != std::size_t{bundle.count} * bundle.dim) {
    throw Error(ErrorCode::DimMismatch, "payload size differs from count * dim");
  }
  if (!is_known_kind(bundle.meta.kind)) {
    throw Error(ErrorCode::MetaParseError, "unknown kind '" + bundle.meta.kind + "'");
  }
  if (bundle.meta.labels && bundle.meta.labels->size() != bundle.count) {
    throw Error(ErrorCode::MetaParseError, "labels length differs from row count");
  }
  if (!bundle.meta.extra.is_null() && !bundle.meta.extra.is_object()) {
    throw Error(ErrorCode::MetaParseError, "extra must be an object");
  }
  for (float x : bundle.payload) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "NaN/Inf cannot be written to VLEB");
  }

  const std::string meta = serialize_meta(bundle.meta);
  std::vector<std::uint8_t> out;
  out.reserve(kVlebHeaderSize + meta.size() + 4 * bundle.payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVlebVersion);
  put_u32(out, bundle.dim);
  put_u32(out, bundle.count);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  for (float x : bundle.payload) put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

Bundle parse_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a VLEB file");
  }
  if (bytes.size() < kVlebHeaderSize) throw Error(ErrorCode::TruncatedFile, "header incomplete");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVlebVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "VLEB version " + std::to_string(version));
  }
  Bundle b;
  b.dim = get_u32(bytes, 8);
  b.count = get_u32(bytes, 12);
  const std::uint32_t meta_len = get_u32(bytes, 16);

  const std::uint64_t expected =
      kVlebHeaderSize + std::uint64_t{meta_len} + 4 * std::uint64_t{b.count} * b.dim;
  if (bytes.size() < expected) {
    throw Error(ErrorCode::TruncatedFile, "expected " + std::to_string(expected) + " bytes, got " +
                                              std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw Error(ErrorCode::TrailingData, "expected " + std::to_string(expected) + " bytes, got " +
                                             std::to_string(bytes.size()));
  }

  const auto* meta_begin = reinterpret_cast<const char*>(bytes.data() + kVlebHeaderSize);
  b.meta = parse_meta(std::string_view(meta_begin, meta_len), b.count);

  b.payload.resize(std::size_t{b.count} * b.dim);
  std::size_t offset = kVlebHeaderSize + meta_len;
  for (float& x : b.payload) {
    x = std::bit_cast<float>(get_u32(bytes, offset));
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "payload contains NaN/Inf");
    offset += 4;
  }
  return b;
}

Bundle make_bundle(std::span<const Embedding> embeddings, BundleMeta meta,
                   std::uint32_t dim_if_empty) {
  Bundle b;
  b.dim = embeddings.empty() ? dim_if_empty : static_cast<std::uint32_t>(embeddings.front().dim());
  b.count = static_cast<std::uint32_t>(embeddings.size());
  b.meta = std::move(meta);
  b.payload.reserve(std::size_t{b.count} * b.dim);
  for (const auto& e : embeddings) {
    if (e.dim() != b.dim) throw Error(ErrorCode::DimMismatch, "bundle rows differ in dimension");
    for (double x : e.values()) b.payload.push_back(static_cast<float>(x));
  }
  return b;
}

std::vector<Embedding> bundle_embeddings(const Bundle& bundle) {
  std::vector<Embedding> out;
  out.reserve(bundle.count);
  for (std::size_t i = 0; i < bundle.count; ++i) {
    const auto row = bundle.row(i);
    out.emplace_back(std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + ": " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bundle(const std::filesystem::path& path, const Bundle& bundle) {
  write_file_atomic(path, serialize_bundle(bundle));
}

Bundle read_bundle(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  return parse_bundle({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

bool bitwise_equal(const Bundle& a, const Bundle& b) {
  if (a.dim != b.dim || a.count != b.count || !(a.meta == b.meta)) return false;
  if (a.payload.size() != b.payload.size()) return false;
  for (std::size_t i = 0; i < a.payload.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a.payload[i]) != std::bit_cast<std::uint32_t>(b.payload[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace vlscene
