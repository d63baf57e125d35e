#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vlscene/metrics.hpp"
#include "vlscene/reasoner.hpp"
#include "vlscene/scenegen.hpp"

namespace vlscene {

enum class Ablation { None, Context, Alpha, Beta };

Ablation ablation_from_string(std::string_view name);
std::string_view to_string(Ablation ablation);

// The reference pipeline for the generalization gain: context off, alpha = beta = 0.
ReasonConfig baseline_config(const ReasonConfig& cfg);

EvalRecord make_record(const ReasonResult& result, const SceneBundle& scene);

// Runs reason_scene over every scene. Results are in scene order and do not
// depend on exec apart from their timing fields.
std::vector<ReasonResult> run_scenes(const Dataset& ds, const ReasonConfig& cfg,
                                     Exec exec = Exec::Parallel);

Report evaluate_config(const Dataset& ds, const ReasonConfig& cfg, Exec exec = Exec::Parallel);

struct Evaluation {
  Report report;
  ReasonConfig config;
  Ablation ablation = Ablation::None;
  std::optional<ReasonConfig> ablation_config;
  std::optional<Report> ablation_report;
};

Evaluation evaluate_dataset(const Dataset& ds, const ReasonConfig& cfg, Ablation ablation,
                            Exec exec = Exec::Parallel);

// Report fields at the top level, followed by config and ablation blocks.
nlohmann::ordered_json to_json(const Evaluation& eval);

}  // namespace vlscene
