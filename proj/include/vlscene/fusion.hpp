#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "vlscene/embedding.hpp"

namespace vlscene {

// Projection matrices for visual-query / text-key-value attention. All are
// d x d_k.
struct AttentionParams {
  Matrix w_q;
  Matrix w_k;
  Matrix w_v;

  std::size_t input_dim() const noexcept { return w_q.rows; }
  std::size_t key_dim() const noexcept { return w_q.cols; }

  static AttentionParams identity(std::size_t d);
  // Identity projections with the query scaled by sqrt(d)/tau, so the
  // attention logits between unit vectors are cos/tau. This is the default
  // used by the reasoner when no trained projections are supplied.
  static AttentionParams calibrated(std::size_t d, double tau);
  void validate() const;
};

// weights is n x m and row-stochastic; attended is n x d_k.
struct AttentionMap {
  Matrix weights;
  Matrix attended;
};

struct ContextVector {
  std::vector<double> c;
  double alpha = 0.0;
};

enum class FusionMode { Mean, Attended };

std::string_view to_string(FusionMode mode);
FusionMode fusion_mode_from_string(std::string_view name);

// weights = row_softmax(Q K^T / sqrt(d_k)), Q = objects * w_q, K = tokens * w_k;
// attended = weights * (tokens * w_v).
AttentionMap cross_attention(const AttentionParams& params, std::span<const Embedding> objects,
                             std::span<const Embedding> tokens, Exec exec = Exec::Parallel);

// c = mean(objects) + alpha * t_scene. c is not renormalized.
ContextVector aggregate_context(std::span<const Embedding> objects, const Embedding& t_scene,
                                double alpha);

// Attended wiring: the object mean is replaced by the mean of the attended
// rows mapped back to dimension d through w_v^T.
ContextVector aggregate_context_attended(const AttentionMap& map, const AttentionParams& params,
                                         const Embedding& t_scene, double alpha);

// normalize(global_v + beta * c); beta == 0 returns global_v untouched.
Embedding contextualize(const Embedding& global_v, const ContextVector& ctx, double beta);

}  // namespace vlscene
