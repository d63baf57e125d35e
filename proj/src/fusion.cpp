#include "vlscene/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vlscene {

namespace {

Matrix project_rows(std::span<const Embedding> rows, const Matrix& w) {
  Matrix out(rows.size(), w.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto projected = vec_mat(rows[i].values(), w);
    std::copy(projected.begin(), projected.end(), out.row(i).begin());
  }
  return out;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::ConfigInvalid, "alpha must be finite and >= 0");
  }
}

}  // namespace

AttentionParams AttentionParams::identity(std::size_t d) {
  return {Matrix::identity(d), Matrix::identity(d), Matrix::identity(d)};
}

AttentionParams AttentionParams::calibrated(std::size_t d, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidTau, "attention temperature");
  AttentionParams p = identity(d);
  const double scale = std::sqrt(static_cast<double>(d)) / tau;
  for (double& x : p.w_q.data) x *= scale;
  return p;
}

void AttentionParams::validate() const {
  const std::size_t d = w_q.rows;
  const std::size_t dk = w_q.cols;
  if (d == 0 || dk == 0) throw Error(ErrorCode::InvalidShape, "attention projections are empty");
  for (const Matrix* m : {&w_q, &w_k, &w_v}) {
    if (m->rows != d || m->cols != dk || m->data.size() != d * dk) {
      throw Error(ErrorCode::InvalidShape, "attention projections must share shape d x d_k");
    }
    for (double x : m->data) {
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "attention parameter not finite");
    }
  }
}

std::string_view to_string(FusionMode mode) {
  return mode == FusionMode::Mean ? "mean" : "attended";
}

FusionMode fusion_mode_from_string(std::string_view name) {
  if (name == "mean") return FusionMode::Mean;
  if (name == "attended") return FusionMode::Attended;
  throw Error(ErrorCode::ConfigInvalid, "unknown fusion mode '" + std::string(name) + "'");
}

AttentionMap cross_attention(const AttentionParams& params, std::span<const Embedding> objects,
                             std::span<const Embedding> tokens, Exec exec) {
  if (objects.empty() || tokens.empty()) throw Error(ErrorCode::EmptyInput, "cross_attention");
  params.validate();
  require_same_dim(objects, params.input_dim(), "cross_attention objects");
  require_same_dim(tokens, params.input_dim(), "cross_attention tokens");

  const Matrix q = project_rows(objects, params.w_q);
  const Matrix k = project_rows(tokens, params.w_k);
  const Matrix v = project_rows(tokens, params.w_v);

  const std::size_t n = objects.size();
  const std::size_t m = tokens.size();
  const std::size_t dk = params.key_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  AttentionMap out{Matrix(n, m), Matrix(n, dk)};

  auto fill_row = [&](std::ptrdiff_t row) {
    const auto i = static_cast<std::size_t>(row);
    auto w = out.weights.row(i);
    double max_logit = -INFINITY;
    for (std::size_t j = 0; j < m; ++j) {
      w[j] = dot(q.row(i), k.row(j)) * scale;
      max_logit = std::max(max_logit, w[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      w[j] = std::exp(w[j] - max_logit);
      total += w[j];
    }
    for (std::size_t j = 0; j < m; ++j) w[j] /= total;

    auto a = out.attended.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const auto vj = v.row(j);
      for (std::size_t c = 0; c < dk; ++c) a[c] += w[j] * vj[c];
    }
  };

  const auto rows = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) fill_row(i);
  } else {
    for (std::ptrdiff_t i = 0; i < rows; ++i) fill_row(i);
  }
  return out;
}

ContextVector aggregate_context(std::span<const Embedding> objects, const Embedding& t_scene,
                                double alpha) {
  check_alpha(alpha);
  const Embedding mean = mean_of(objects);
  if (t_scene.dim() != mean.dim()) {
    throw Error(ErrorCode::DimMismatch, "scene prompt dim differs from object dim");
  }
  ContextVector ctx{std::vector<double>(mean.dim()), alpha};
  for (std::size_t i = 0; i < mean.dim(); ++i) ctx.c[i] = mean[i] + alpha * t_scene[i];
  return ctx;
}

ContextVector aggregate_context_attended(const AttentionMap& map, const AttentionParams& params,
                                         const Embedding& t_scene, double alpha) {
  check_alpha(alpha);
  const std::size_t n = map.attended.rows;
  const std::size_t dk = map.attended.cols;
  const std::size_t d = params.input_dim();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "attention map has no rows");
  if (dk != params.key_dim() || t_scene.dim() != d) {
    throw Error(ErrorCode::DimMismatch, "attended context dims inconsistent");
  }

  // mean_i(a_i) * w_v^T, i.e. back-projection of the averaged attended row.
  std::vector<double> mean_attended(dk, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = map.attended.row(i);
    for (std::size_t c = 0; c < dk; ++c) mean_attended[c] += a[c];
  }
  for (double& x : mean_attended) x /= static_cast<double>(n);

  ContextVector ctx{std::vector<double>(d, 0.0), alpha};
  for (std::size_t r = 0; r < d; ++r) {
    ctx.c[r] = dot(params.w_v.row(r), mean_attended) + alpha * t_scene[r];
  }
  return ctx;
}

Embedding contextualize(const Embedding& global_v, const ContextVector& ctx, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::ConfigInvalid, "beta must be finite and >= 0");
  }
  if (ctx.c.size() != global_v.dim()) {
    throw Error(ErrorCode::DimMismatch, "context vector dim differs from visual embedding");
  }
  if (beta == 0.0) return global_v;
  std::vector<double> mixed(global_v.dim());
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = global_v[i] + beta * ctx.c[i];
  return l2_normalize(Embedding(std::move(mixed)));
}

}  // namespace vlscene
