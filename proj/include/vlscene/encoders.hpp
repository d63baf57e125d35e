#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vlscene/embedding.hpp"

namespace vlscene {

// Trainable linear stand-ins for the vision and language encoders.
//
//   image:  v = normalize(x * w_vision)                     x has length f
//   text:   r = mean_k(token_table[id_k] * w_text)
//           pooled = normalize(r), tokens[k] = normalize(token_table[id_k] * w_text)
struct EncoderParams {
  std::size_t feature_dim = 0;  // f
  std::size_t embed_dim = 0;    // d
  std::size_t vocab = 0;
  Matrix w_vision;     // f x d
  Matrix token_table;  // vocab x d
  Matrix w_text;       // d x d
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

using TokenIds = std::vector<std::uint32_t>;

struct TextEncoding {
  Embedding pooled;
  std::vector<Embedding> tokens;
};

// Entries are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]: fan_in is f for
// w_vision, d for w_text, and 1 for the token table (so rows are U[-1, 1]).
EncoderParams init_params(std::size_t feature_dim, std::size_t embed_dim, std::size_t vocab,
                          std::uint64_t seed);

Embedding encode_image(const EncoderParams& params, std::span<const double> features);

TextEncoding encode_text(const EncoderParams& params, std::span<const std::uint32_t> token_ids);

// Un-normalized pooled text projection r; exposed for the gradient code.
std::vector<double> text_projection(const EncoderParams& params,
                                    std::span<const std::uint32_t> token_ids);

}  // namespace vlscene
