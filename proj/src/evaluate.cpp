#include "vlscene/evaluate.hpp"

#include <exception>
#include <string>

namespace vlscene {

Ablation ablation_from_string(std::string_view name) {
  if (name == "none") return Ablation::None;
  if (name == "context") return Ablation::Context;
  if (name == "alpha") return Ablation::Alpha;
  if (name == "beta") return Ablation::Beta;
  throw Error(ErrorCode::ConfigInvalid, "unknown ablation '" + std::string(name) + "'");
}

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::None: return "none";
    case Ablation::Context: return "context";
    case Ablation::Alpha: return "alpha";
    case Ablation::Beta: return "beta";
  }
  return "none";
}

ReasonConfig baseline_config(const ReasonConfig& cfg) {
  ReasonConfig base = cfg;
  base.context = false;
  base.alpha = 0.0;
  base.beta = 0.0;
  return base;
}

EvalRecord make_record(const ReasonResult& result, const SceneBundle& scene) {
  EvalRecord r;
  r.scene_id = scene.scene_id;
  r.truth_label = scene.truth_label.value_or("");
  r.probs = result.probs;
  r.sims = result.sims;
  r.attention_on_truth = result.attention_on_truth;
  r.ambiguity = result.ambiguity;
  r.context_weight = result.context_weight;
  r.novel = scene.novel;
  r.timing_us = result.timing_us;
  return r;
}

std::vector<ReasonResult> run_scenes(const Dataset& ds, const ReasonConfig& cfg, Exec exec) {
  cfg.validate();
  std::vector<ReasonResult> results(ds.scenes.size());
  const auto count = static_cast<std::ptrdiff_t>(ds.scenes.size());
  if (exec == Exec::Parallel) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        results[static_cast<std::size_t>(i)] =
            reason_scene(ds.scenes[static_cast<std::size_t>(i)], ds.prompts, cfg);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      results[static_cast<std::size_t>(i)] =
          reason_scene(ds.scenes[static_cast<std::size_t>(i)], ds.prompts, cfg);
    }
  }
  return results;
}

Report evaluate_config(const Dataset& ds, const ReasonConfig& cfg, Exec exec) {
  const auto results = run_scenes(ds, cfg, exec);
  std::vector<EvalRecord> records;
  records.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) records.push_back(make_record(results[i], ds.scenes[i]));
  return build_report(records, ds.prompts.labels);
}

Evaluation evaluate_dataset(const Dataset& ds, const ReasonConfig& cfg, Ablation ablation,
                            Exec exec) {
  Evaluation eval;
  eval.config = cfg;
  eval.ablation = ablation;
  eval.report = evaluate_config(ds, cfg, exec);

  switch (ablation) {
    case Ablation::None:
      return eval;
    case Ablation::Context:
      eval.ablation_config = baseline_config(cfg);
      break;
    case Ablation::Alpha:
      eval.ablation_config = cfg;
      eval.ablation_config->alpha = 0.0;
      break;
    case Ablation::Beta:
      eval.ablation_config = cfg;
      eval.ablation_config->beta = 0.0;
      break;
  }
  eval.ablation_report = evaluate_config(ds, *eval.ablation_config, exec);
  if (ablation == Ablation::Context) {
    eval.report.gen_gain_points = generalization_gain(eval.report, *eval.ablation_report);
  }
  return eval;
}

nlohmann::ordered_json to_json(const Evaluation& eval) {
  nlohmann::ordered_json j = to_json(eval.report);
  j["config"] = to_json(eval.config);
  if (eval.ablation_report) {
    j["ablation"] = {{"kind", to_string(eval.ablation)},
                     {"config", to_json(*eval.ablation_config)},
                     {"top1_delta_points",
                      eval.report.top1 * 100.0 - eval.ablation_report->top1 * 100.0},
                     {"report", to_json(*eval.ablation_report)}};
  } else {
    j["ablation"] = {{"kind", "none"}};
  }
  return j;
}

}  // namespace vlscene
