#include "vlscene/encoders.hpp"

#include <cmath>
#include <string>

#include "vlscene/rng.hpp"

namespace vlscene {

namespace {

Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.uniform(-bound, bound);
  return m;
}

void check_tokens(const EncoderParams& params, std::span<const std::uint32_t> token_ids) {
  if (token_ids.empty()) throw Error(ErrorCode::EmptyInput, "empty token sequence");
  for (auto id : token_ids) {
    if (id >= params.vocab) {
      throw Error(ErrorCode::TokenOutOfRange,
                  "token id " + std::to_string(id) + " >= vocab " + std::to_string(params.vocab));
    }
  }
}

}  // namespace

void EncoderParams::validate() const {
  if (feature_dim == 0 || embed_dim == 0 || vocab == 0) {
    throw Error(ErrorCode::InvalidShape, "encoder dimensions must be positive");
  }
  const bool shapes_ok = w_vision.rows == feature_dim && w_vision.cols == embed_dim &&
                         token_table.rows == vocab && token_table.cols == embed_dim &&
                         w_text.rows == embed_dim && w_text.cols == embed_dim &&
                         w_vision.data.size() == feature_dim * embed_dim &&
                         token_table.data.size() == vocab * embed_dim &&
                         w_text.data.size() == embed_dim * embed_dim;
  if (!shapes_ok) throw Error(ErrorCode::InvalidShape, "encoder matrix shapes inconsistent");
  for (const Matrix* m : {&w_vision, &token_table, &w_text}) {
    for (double x : m->data) {
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "encoder parameter not finite");
    }
  }
}

EncoderParams init_params(std::size_t feature_dim, std::size_t embed_dim, std::size_t vocab,
                          std::uint64_t seed) {
  if (feature_dim == 0 || embed_dim == 0 || vocab == 0) {
    throw Error(ErrorCode::InvalidShape, "f, d and vocab must all be >= 1");
  }
  Rng rng(seed);
  EncoderParams p;
  p.feature_dim = feature_dim;
  p.embed_dim = embed_dim;
  p.vocab = vocab;
  p.seed = seed;
  p.w_vision = uniform_matrix(rng, feature_dim, embed_dim, 1.0 / std::sqrt(double(feature_dim)));
  p.token_table = uniform_matrix(rng, vocab, embed_dim, 1.0);
  p.w_text = uniform_matrix(rng, embed_dim, embed_dim, 1.0 / std::sqrt(double(embed_dim)));
  return p;
}

Embedding encode_image(const EncoderParams& params, std::span<const double> features) {
  if (features.size() != params.feature_dim) {
    throw Error(ErrorCode::DimMismatch, "image features have length " +
                                            std::to_string(features.size()) + ", expected " +
                                            std::to_string(params.feature_dim));
  }
  return l2_normalize(Embedding(vec_mat(features, params.w_vision)));
}

std::vector<double> text_projection(const EncoderParams& params,
                                    std::span<const std::uint32_t> token_ids) {
  check_tokens(params, token_ids);
  std::vector<double> mean_row(params.embed_dim, 0.0);
  for (auto id : token_ids) {
    const auto row = params.token_table.row(id);
    for (std::size_t c = 0; c < params.embed_dim; ++c) mean_row[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(token_ids.size());
  for (double& x : mean_row) x *= inv;
  // mean(e_k) * W == mean(e_k * W) by linearity.
  return vec_mat(mean_row, params.w_text);
}

TextEncoding encode_text(const EncoderParams& params, std::span<const std::uint32_t> token_ids) {
  check_tokens(params, token_ids);
  TextEncoding out;
  out.tokens.reserve(token_ids.size());
  std::vector<double> sum(params.embed_dim, 0.0);
  for (auto id : token_ids) {
    auto proj = vec_mat(params.token_table.row(id), params.w_text);
    for (std::size_t c = 0; c < proj.size(); ++c) sum[c] += proj[c];
    out.tokens.push_back(l2_normalize(Embedding(std::move(proj))));
  }
  const double inv = 1.0 / static_cast<double>(token_ids.size());
  for (double& x : sum) x *= inv;
  out.pooled = l2_normalize(Embedding(std::move(sum)));
  return out;
}

}  // namespace vlscene
