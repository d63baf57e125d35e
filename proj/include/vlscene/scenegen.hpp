#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "vlscene/reasoner.hpp"
#include "vlscene/training.hpp"

namespace vlscene {

struct GenConfig {
  std::size_t classes = 8;
  std::size_t dim = 32;
  std::size_t scenes = 200;
  std::size_t objects_per_scene = 6;
  double clutter = 0.3;
  double noise = 0.1;
  double novel_fraction = 0.25;
  std::uint64_t seed = 42;

  void validate() const;
  std::size_t novel_classes() const;
  // Target objects per scene after enforcing a strict plurality.
  std::size_t target_count() const;
};

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr std::size_t kPrototypeRetryCap = 10000;
inline constexpr double kPrototypeMaxAbsCos = 0.5;
inline constexpr double kTokenNoise = 0.05;
inline constexpr std::size_t kTokensPerPrompt = 2;

struct Dataset {
  GenConfig config;
  std::vector<Embedding> prototypes;
  PromptSet prompts;
  std::vector<SceneBundle> scenes;

  std::size_t class_of(const SceneBundle& scene) const;
  bool is_novel_class(std::size_t class_index) const;
};

std::string class_label(std::size_t class_index);

// Values are rounded to binary32 so a dataset and its on-disk copy agree.
Embedding quantize(const Embedding& e);

// Unit vectors with pairwise |cos| < 0.5. Each prototype is re-drawn until it
// separates from the earlier ones, at most kPrototypeRetryCap times.
std::vector<Embedding> gen_prototypes(std::size_t classes, std::size_t dim, std::uint64_t seed);

SceneBundle gen_scene(std::span<const Embedding> prototypes, std::size_t target_class,
                      const GenConfig& cfg, std::uint64_t scene_seed);

Dataset gen_dataset(const GenConfig& cfg);

std::uint64_t scene_seed(std::uint64_t seed, std::size_t scene_index);

// Dataset directory: manifest.json, prototypes.vleb, prompts.vleb,
// prompt_tokens.vleb, scenes.vleb.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

nlohmann::ordered_json to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j);

// Token ids standing for the text of class c: {2c, 2c + 1} mod vocab.
TokenIds class_token_ids(std::size_t class_index, std::size_t vocab);

// Contrastive batches over the non-novel classes. Batch b holds the b-th
// scene of every training class; the image features are the scene's object
// mean and the text is the class token sequence.
std::vector<Batch> training_batches(const Dataset& ds, std::size_t vocab);

}  // namespace vlscene
