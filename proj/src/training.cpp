#include "vlscene/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vlscene/rng.hpp"

namespace vlscene {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidTau, "temperature must be positive");
  }
}

void check_batch(const Batch& batch) {
  if (batch.pairs.empty()) throw Error(ErrorCode::EmptyBatch, "contrastive batch is empty");
}

// Projection before normalization plus its norm and unit direction.
struct Projected {
  std::vector<double> raw;
  std::vector<double> unit;
  double norm = 0.0;
};

Projected project(std::vector<double> raw) {
  Projected p;
  p.norm = std::sqrt(dot(raw, raw));
  if (p.norm <= kZeroNormEps) throw Error(ErrorCode::ZeroVector, "projection collapsed to zero");
  p.unit = raw;
  for (double& x : p.unit) x /= p.norm;
  p.raw = std::move(raw);
  return p;
}

struct Forward {
  std::vector<Projected> images;
  std::vector<Projected> texts;
  Matrix sims;
};

Forward forward(const EncoderParams& params, const Batch& batch) {
  params.validate();
  check_batch(batch);
  Forward fw;
  for (const auto& pair : batch.pairs) {
    if (pair.features.size() != params.feature_dim) {
      throw Error(ErrorCode::DimMismatch, "training features length differs from f");
    }
    fw.images.push_back(project(vec_mat(pair.features, params.w_vision)));
    fw.texts.push_back(project(text_projection(params, pair.tokens)));
  }
  const std::size_t b = batch.pairs.size();
  fw.sims = Matrix(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) fw.sims(i, j) = dot(fw.images[i].unit, fw.texts[j].unit);
  }
  return fw;
}

// Back through u -> u / |u|: (g - (g . n) n) / |u|.
std::vector<double> normalize_backward(const Projected& p, const std::vector<double>& grad_unit) {
  const double along = dot(grad_unit, p.unit);
  std::vector<double> g(grad_unit.size());
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = (grad_unit[c] - along * p.unit[c]) / p.norm;
  return g;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::ConfigInvalid, "lr must be >= 0");
  check_tau(tau);
}

double EncoderGrads::squared_norm() const {
  double total = 0.0;
  for (const Matrix* m : {&w_vision, &token_table, &w_text}) total += dot(m->data, m->data);
  return total;
}

double info_nce(const Matrix& sims, double tau) {
  check_tau(tau);
  if (sims.rows == 0) throw Error(ErrorCode::EmptyBatch, "contrastive batch is empty");
  if (sims.rows != sims.cols) throw Error(ErrorCode::InvalidShape, "similarity matrix not square");
  double total = 0.0;
  for (std::size_t i = 0; i < sims.rows; ++i) {
    const auto row = sims.row(i);
    const double max_logit = *std::max_element(row.begin(), row.end()) / tau;
    double denom = 0.0;
    for (double s : row) denom += std::exp(s / tau - max_logit);
    total += max_logit - row[i] / tau + std::log(denom);
  }
  return total / static_cast<double>(sims.rows);
}

double contrastive_loss(const EncoderParams& params, const Batch& batch, double tau) {
  check_tau(tau);
  return info_nce(forward(params, batch).sims, tau);
}

EncoderGrads loss_gradients(const EncoderParams& params, const Batch& batch, double tau) {
  check_tau(tau);
  const Forward fw = forward(params, batch);
  const std::size_t b = batch.pairs.size();
  const std::size_t d = params.embed_dim;

  // dL/ds_ij = (softmax_j(s_i. / tau) - [i == j]) / (B tau)
  Matrix dsims(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto row = fw.sims.row(i);
    const double max_logit = *std::max_element(row.begin(), row.end()) / tau;
    double denom = 0.0;
    for (double s : row) denom += std::exp(s / tau - max_logit);
    for (std::size_t j = 0; j < b; ++j) {
      const double p = std::exp(row[j] / tau - max_logit) / denom;
      dsims(i, j) = (p - (i == j ? 1.0 : 0.0)) / (static_cast<double>(b) * tau);
    }
  }

  EncoderGrads g{Matrix(params.feature_dim, d), Matrix(params.vocab, d), Matrix(d, d)};

  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> grad_unit(d, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t c = 0; c < d; ++c) grad_unit[c] += dsims(i, j) * fw.texts[j].unit[c];
    }
    const auto grad_raw = normalize_backward(fw.images[i], grad_unit);
    const auto& x = batch.pairs[i].features;
    for (std::size_t r = 0; r < params.feature_dim; ++r) {
      for (std::size_t c = 0; c < d; ++c) g.w_vision(r, c) += x[r] * grad_raw[c];
    }
  }

  for (std::size_t j = 0; j < b; ++j) {
    std::vector<double> grad_unit(d, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t c = 0; c < d; ++c) grad_unit[c] += dsims(i, j) * fw.images[i].unit[c];
    }
    const auto grad_raw = normalize_backward(fw.texts[j], grad_unit);

    // raw = mean_k(e_k) * w_text
    const auto& ids = batch.pairs[j].tokens;
    const double inv_m = 1.0 / static_cast<double>(ids.size());
    std::vector<double> mean_row(d, 0.0);
    for (auto id : ids) {
      const auto e = params.token_table.row(id);
      for (std::size_t c = 0; c < d; ++c) mean_row[c] += e[c];
    }
    for (double& x : mean_row) x *= inv_m;
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) g.w_text(r, c) += mean_row[r] * grad_raw[c];
    }

    // d raw / d e_k = w_text / m, so each occurrence receives (grad_raw * w_text^T) / m.
    std::vector<double> grad_row(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) grad_row[r] = dot(params.w_text.row(r), grad_raw) * inv_m;
    for (auto id : ids) {
      auto dst = g.token_table.row(id);
      for (std::size_t c = 0; c < d; ++c) dst[c] += grad_row[c];
    }
  }
  return g;
}

std::vector<std::size_t> batch_schedule(std::size_t num_batches, std::size_t steps,
                                        std::uint64_t seed) {
  std::vector<std::size_t> schedule;
  if (num_batches == 0) return schedule;
  schedule.reserve(steps);
  Rng rng(seed);
  std::vector<std::size_t> epoch(num_batches);
  while (schedule.size() < steps) {
    std::iota(epoch.begin(), epoch.end(), std::size_t{0});
    for (std::size_t i = num_batches; i > 1; --i) {
      std::swap(epoch[i - 1], epoch[rng.below(i)]);
    }
    for (std::size_t idx : epoch) {
      if (schedule.size() == steps) break;
      schedule.push_back(idx);
    }
  }
  return schedule;
}

double dataset_loss(const EncoderParams& params, const std::vector<Batch>& data, double tau) {
  if (data.empty()) throw Error(ErrorCode::EmptyBatch, "no training batches");
  double total = 0.0;
  for (const auto& batch : data) total += contrastive_loss(params, batch, tau);
  return total / static_cast<double>(data.size());
}

TrainResult train_toy(const EncoderParams& params, const std::vector<Batch>& data,
                      const TrainConfig& cfg) {
  cfg.validate();
  params.validate();
  TrainResult result{params, {}};
  if (cfg.steps == 0) return result;
  if (data.empty()) throw Error(ErrorCode::EmptyBatch, "no training batches");

  auto step = [lr = cfg.lr](Matrix& weights, const Matrix& grad) {
    for (std::size_t i = 0; i < weights.data.size(); ++i) weights.data[i] -= lr * grad.data[i];
  };

  result.loss_trace.reserve(cfg.steps);
  for (std::size_t idx : batch_schedule(data.size(), cfg.steps, cfg.seed)) {
    const Batch& batch = data[idx];
    result.loss_trace.push_back(contrastive_loss(result.params, batch, cfg.tau));
    const EncoderGrads g = loss_gradients(result.params, batch, cfg.tau);
    step(result.params.w_vision, g.w_vision);
    step(result.params.token_table, g.token_table);
    step(result.params.w_text, g.w_text);
  }
  return result;
}

}  // namespace vlscene
