#include "vlscene/reasoner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "vlscene/metrics.hpp"

namespace vlscene {

namespace {

std::vector<Embedding> normalized_all(std::span<const Embedding> items) {
  std::vector<Embedding> out;
  out.reserve(items.size());
  for (const auto& e : items) out.push_back(l2_normalize(e));
  return out;
}

PromptSet normalized(const PromptSet& prompts) {
  PromptSet out;
  out.labels = prompts.labels;
  out.pooled = normalized_all(prompts.pooled);
  out.tokens.reserve(prompts.tokens.size());
  for (const auto& list : prompts.tokens) out.tokens.push_back(normalized_all(list));
  if (prompts.scene_prompt) out.scene_prompt = l2_normalize(*prompts.scene_prompt);
  return out;
}

std::vector<double> sims_against(const Embedding& v, const PromptSet& prompts) {
  std::vector<double> sims(prompts.size());
  for (std::size_t j = 0; j < prompts.size(); ++j) sims[j] = cosine_sim(v, prompts.pooled[j]);
  return sims;
}

}  // namespace

std::size_t PromptSet::index_of(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorCode::UnknownLabel, "label '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

void PromptSet::validate() const {
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "prompt set has no labels");
  if (pooled.size() != labels.size() || tokens.size() != labels.size()) {
    throw Error(ErrorCode::InvalidShape, "prompt set labels/pooled/tokens sizes differ");
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    throw Error(ErrorCode::ConfigInvalid, "prompt labels must be unique");
  }
  const std::size_t d = dim();
  require_same_dim(pooled, d, "prompt pooled");
  for (const auto& list : tokens) {
    if (list.empty()) throw Error(ErrorCode::EmptyInput, "prompt with no token embeddings");
    require_same_dim(list, d, "prompt tokens");
  }
  if (scene_prompt && scene_prompt->dim() != d) {
    throw Error(ErrorCode::DimMismatch, "scene prompt dim differs from prompt dim");
  }
}

void SceneBundle::validate() const {
  if (objects.empty()) throw Error(ErrorCode::EmptyInput, "scene '" + scene_id + "' has no objects");
  require_same_dim(objects, dim(), "scene objects");
  if (global_image && global_image->dim() != dim()) {
    throw Error(ErrorCode::DimMismatch, "global image dim differs from object dim");
  }
  if (relevance_mask && relevance_mask->size() != objects.size()) {
    throw Error(ErrorCode::InvalidShape, "relevance mask length differs from object count");
  }
}

void ReasonConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::ConfigInvalid, "tau must be > 0");
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "k must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::ConfigInvalid, "alpha must be >= 0");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::ConfigInvalid, "beta must be >= 0");
  }
  if (!std::isfinite(threshold)) throw Error(ErrorCode::ConfigInvalid, "threshold not finite");
}

Embedding global_visual(const SceneBundle& scene, VisualSource* source) {
  if (scene.global_image) {
    if (source) *source = VisualSource::GlobalImage;
    return l2_normalize(*scene.global_image);
  }
  if (source) *source = VisualSource::ObjectMean;
  return l2_normalize(mean_of(normalized_all(scene.objects)));
}

std::vector<double> score_prompts(const SceneBundle& scene, const PromptSet& prompts) {
  scene.validate();
  prompts.validate();
  if (scene.dim() != prompts.dim()) {
    throw Error(ErrorCode::DimMismatch, "scene dim differs from prompt dim");
  }
  return sims_against(global_visual(scene), prompts);
}

std::vector<std::size_t> select_top_k(std::span<const double> sims, std::size_t k,
                                      double threshold) {
  if (sims.empty()) throw Error(ErrorCode::EmptyInput, "select_top_k on empty scores");
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "k must be >= 1");

  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });

  std::vector<std::size_t> picked;
  for (std::size_t idx : order) {
    if (picked.size() == k) break;
    if (sims[idx] >= threshold) picked.push_back(idx);
  }
  if (picked.empty()) picked.push_back(order.front());
  return picked;
}

ProbVector predict_zero_shot(const Embedding& v, const PromptSet& prompts, double tau) {
  prompts.validate();
  if (v.dim() != prompts.dim()) throw Error(ErrorCode::DimMismatch, "visual vs prompt dim");
  return stable_softmax(sims_against(v, prompts), tau);
}

double attention_mass_on_mask(const Matrix& weights, const std::vector<bool>& mask) {
  if (mask.size() != weights.rows) {
    throw Error(ErrorCode::InvalidShape, "mask length differs from attention rows");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < weights.cols; ++j) {
    double column = 0.0;
    double on_mask = 0.0;
    for (std::size_t i = 0; i < weights.rows; ++i) {
      column += weights(i, j);
      if (mask[i]) on_mask += weights(i, j);
    }
    total += column > 0.0 ? on_mask / column : 0.0;
  }
  return total / static_cast<double>(weights.cols);
}

ReasonResult reason_scene(const SceneBundle& scene, const PromptSet& raw_prompts,
                          const ReasonConfig& cfg, const AttentionParams* attention) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  scene.validate();
  raw_prompts.validate();
  if (scene.dim() != raw_prompts.dim()) {
    throw Error(ErrorCode::DimMismatch, "scene dim differs from prompt dim");
  }

  const PromptSet prompts = normalized(raw_prompts);
  const std::vector<Embedding> objects = normalized_all(scene.objects);
  const std::size_t d = prompts.dim();

  ReasonResult result;
  result.scene_id = scene.scene_id;
  result.config = cfg;

  const Embedding v = global_visual(scene, &result.visual_source);
  result.sims = sims_against(v, prompts);
  result.selected_prompts = select_top_k(result.sims, cfg.k, cfg.threshold);

  std::vector<Embedding> selected_tokens;
  std::vector<Embedding> selected_pooled;
  for (std::size_t j : result.selected_prompts) {
    selected_pooled.push_back(prompts.pooled[j]);
    selected_tokens.insert(selected_tokens.end(), prompts.tokens[j].begin(),
                           prompts.tokens[j].end());
  }

  const AttentionParams fallback =
      attention ? AttentionParams{} : AttentionParams::calibrated(d, cfg.tau);
  const AttentionParams& att = attention ? *attention : fallback;
  const AttentionMap map = cross_attention(att, objects, selected_tokens, Exec::Serial);
  if (scene.relevance_mask) {
    result.attention_on_truth = attention_mass_on_mask(map.weights, *scene.relevance_mask);
  }

  const Embedding t_scene =
      prompts.scene_prompt ? *prompts.scene_prompt : l2_normalize(mean_of(selected_pooled));
  result.context = cfg.fusion_mode == FusionMode::Mean
                       ? aggregate_context(objects, t_scene, cfg.alpha)
                       : aggregate_context_attended(map, att, t_scene, cfg.alpha);

  if (cfg.context) {
    const Embedding conditioned = contextualize(v, result.context, cfg.beta);
    result.probs = stable_softmax(sims_against(conditioned, prompts), cfg.tau);
    const double c_norm = std::sqrt(dot(result.context.c, result.context.c));
    const double weighted = cfg.beta * c_norm;
    result.context_weight = weighted > 0.0 ? weighted / (v.norm() + weighted) : 0.0;
  } else {
    result.probs = stable_softmax(result.sims, cfg.tau);
  }

  result.ambiguity = prompts.size() >= 2 ? ambiguity_index(result.probs) : 0.0;
  result.predicted_label = prompts.labels[result.probs.argmax()];
  result.timing_us = std::chrono::duration_cast<std::chrono::microseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  return result;
}

nlohmann::ordered_json to_json(const ReasonConfig& cfg) {
  return {{"tau", cfg.tau},
          {"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"k", cfg.k},
          {"threshold", cfg.threshold},
          {"fusion_mode", to_string(cfg.fusion_mode)},
          {"context", cfg.context ? "on" : "off"},
          {"seed", cfg.seed}};
}

ReasonConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "run config must be a JSON object");
  ReasonConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "tau") {
        cfg.tau = value.get<double>();
      } else if (key == "alpha") {
        cfg.alpha = value.get<double>();
      } else if (key == "beta") {
        cfg.beta = value.get<double>();
      } else if (key == "k") {
        const auto k = value.get<std::int64_t>();
        if (k < 1) throw Error(ErrorCode::ConfigInvalid, "k must be >= 1");
        cfg.k = static_cast<std::size_t>(k);
      } else if (key == "threshold") {
        cfg.threshold = value.get<double>();
      } else if (key == "fusion_mode") {
        cfg.fusion_mode = fusion_mode_from_string(value.get<std::string>());
      } else if (key == "context") {
        if (value.is_boolean()) {
          cfg.context = value.get<bool>();
        } else {
          const auto s = value.get<std::string>();
          if (s != "on" && s != "off") {
            throw Error(ErrorCode::ConfigInvalid, "context must be \"on\" or \"off\"");
          }
          cfg.context = s == "on";
        }
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else {
        throw Error(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json to_json(const ReasonResult& result, const PromptSet& prompts) {
  nlohmann::ordered_json j;
  j["scene_id"] = result.scene_id;
  j["labels"] = prompts.labels;
  j["probs"] = result.probs.probs;
  j["predicted_label"] = result.predicted_label;
  j["selected_prompts"] = result.selected_prompts;
  j["sims"] = result.sims;
  j["context"] = {{"c", result.context.c}, {"alpha", result.context.alpha}};
  j["ambiguity"] = result.ambiguity;
  j["tau"] = result.config.tau;
  j["alpha"] = result.config.alpha;
  j["beta"] = result.config.beta;
  j["k"] = result.config.k;
  j["threshold"] = result.config.threshold;
  j["fusion_mode"] = to_string(result.config.fusion_mode);
  j["context_enabled"] = result.config.context;
  j["visual_source"] =
      result.visual_source == VisualSource::GlobalImage ? "global_image" : "object_mean";
  j["attention_on_truth"] = result.attention_on_truth
                                ? nlohmann::ordered_json(*result.attention_on_truth)
                                : nlohmann::ordered_json(nullptr);
  j["context_weight"] = result.context_weight;
  j["timing_us"] = result.timing_us;
  return j;
}

}  // namespace vlscene
