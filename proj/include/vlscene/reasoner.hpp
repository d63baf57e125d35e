#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "vlscene/embedding.hpp"
#include "vlscene/fusion.hpp"

namespace vlscene {

// K candidate labels with pooled and per-token text embeddings.
struct PromptSet {
  std::vector<std::string> labels;
  std::vector<Embedding> pooled;
  std::vector<std::vector<Embedding>> tokens;
  std::optional<Embedding> scene_prompt;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const { return pooled.empty() ? 0 : pooled.front().dim(); }
  std::size_t index_of(const std::string& label) const;

  void validate() const;
};

struct SceneBundle {
  std::string scene_id;
  std::vector<Embedding> objects;
  std::optional<Embedding> global_image;
  std::optional<std::string> truth_label;
  std::optional<std::vector<bool>> relevance_mask;
  bool novel = false;

  std::size_t dim() const { return objects.empty() ? 0 : objects.front().dim(); }
  void validate() const;
};

struct ReasonConfig {
  double tau = 0.07;
  double alpha = 0.5;
  double beta = 0.5;
  std::size_t k = 5;
  double threshold = 0.2;
  FusionMode fusion_mode = FusionMode::Attended;
  bool context = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Which visual embedding fed the prompt scores.
enum class VisualSource { GlobalImage, ObjectMean };

struct ReasonResult {
  std::string scene_id;
  ProbVector probs;
  std::string predicted_label;
  std::vector<std::size_t> selected_prompts;
  std::vector<double> sims;
  ContextVector context;
  double ambiguity = 0.0;
  ReasonConfig config;
  VisualSource visual_source = VisualSource::ObjectMean;
  // Column-normalized attention mass on relevance-masked objects, when the
  // scene carries a mask.
  std::optional<double> attention_on_truth;
  // beta*|c| / (|v| + beta*|c|); zero when context is off.
  double context_weight = 0.0;
  std::int64_t timing_us = 0;
};

// Scores every prompt against the scene's global visual embedding (the
// global image when present, otherwise the normalized object mean).
std::vector<double> score_prompts(const SceneBundle& scene, const PromptSet& prompts);

Embedding global_visual(const SceneBundle& scene, VisualSource* source = nullptr);

// Filter sims >= threshold, order by sim descending then index ascending,
// keep the first k. Falls back to the single argmax when nothing passes.
std::vector<std::size_t> select_top_k(std::span<const double> sims, std::size_t k,
                                      double threshold);

ProbVector predict_zero_shot(const Embedding& v, const PromptSet& prompts, double tau);

// Without explicit attention projections, AttentionParams::calibrated(d, tau)
// is used.
ReasonResult reason_scene(const SceneBundle& scene, const PromptSet& prompts,
                          const ReasonConfig& cfg,
                          const AttentionParams* attention = nullptr);

// Column-normalized attention overlap with a relevance mask. For each token
// column the weights are renormalized over objects; the result is the mean
// over tokens of the mass falling on masked objects.
double attention_mass_on_mask(const Matrix& weights, const std::vector<bool>& mask);

nlohmann::ordered_json to_json(const ReasonConfig& cfg);
ReasonConfig config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const ReasonResult& result, const PromptSet& prompts);

}  // namespace vlscene
