#pragma once

#include <cstdint>
#include <vector>

#include "vlscene/encoders.hpp"

namespace vlscene {

struct TrainPair {
  std::vector<double> features;  // raw image features, length f
  TokenIds tokens;
};

// Positive pairs; the other texts in the batch act as negatives.
struct Batch {
  std::vector<TrainPair> pairs;
};

struct TrainConfig {
  std::size_t steps = 200;
  double lr = 0.05;
  double tau = 0.07;
  std::uint64_t seed = 0;

  void validate() const;
};

// Gradient with the same layout as the trainable part of EncoderParams.
struct EncoderGrads {
  Matrix w_vision;
  Matrix token_table;
  Matrix w_text;

  double squared_norm() const;
};

// Image-to-text InfoNCE from a B x B similarity matrix (row i = image i,
// column j = text j): mean_i -log softmax_j(sims(i, j) / tau)[i].
double info_nce(const Matrix& sims, double tau);

double contrastive_loss(const EncoderParams& params, const Batch& batch, double tau);

EncoderGrads loss_gradients(const EncoderParams& params, const Batch& batch, double tau);

struct TrainResult {
  EncoderParams params;
  std::vector<double> loss_trace;  // loss of the batch used at each step, before its update
};

// Plain gradient descent. Batches are visited in epochs, each epoch in a
// permutation drawn from cfg.seed.
TrainResult train_toy(const EncoderParams& params, const std::vector<Batch>& data,
                      const TrainConfig& cfg);

// Order in which train_toy visits batches.
std::vector<std::size_t> batch_schedule(std::size_t num_batches, std::size_t steps,
                                        std::uint64_t seed);

// Mean contrastive loss over every batch.
double dataset_loss(const EncoderParams& params, const std::vector<Batch>& data, double tau);

}  // namespace vlscene
