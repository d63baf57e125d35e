#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "vlscene/embedding.hpp"

namespace vlscene {

struct EvalRecord {
  std::string scene_id;
  std::string truth_label;
  ProbVector probs;
  std::vector<double> sims;
  std::optional<double> attention_on_truth;
  double ambiguity = 0.0;
  double context_weight = 0.0;
  bool novel = false;
  std::int64_t timing_us = 0;
};

struct ReportConfig {
  std::vector<std::size_t> recall_ks{1, 5, 10};
};

struct Report {
  std::size_t scenes = 0;
  std::size_t novel_scenes = 0;
  std::string scene_set_digest;
  double top1 = 0.0;
  double top5 = 0.0;
  double map = 0.0;
  std::map<std::size_t, double> recall_at;
  std::map<std::size_t, double> precision_at;
  double mean_ambiguity = 0.0;
  double mean_margin = 0.0;
  double mean_attention_overlap = 0.0;
  double mean_truth_similarity = 0.0;
  double mean_context_weight = 0.0;
  double failure_rate_novel = 0.0;
  std::optional<double> gen_gain_points;
  double ms_per_sample = 0.0;
};

double top_k_accuracy(std::span<const EvalRecord> records, std::span<const std::string> labels,
                      std::size_t k);

// 1-based rank of the truth label by descending score, ties by ascending
// label index.
std::size_t truth_rank(std::span<const double> scores, std::size_t truth);

double mean_average_precision(std::span<const EvalRecord> records,
                              std::span<const std::string> labels);

struct RecallPrecision {
  double recall = 0.0;
  double precision = 0.0;
};

RecallPrecision recall_precision_at_k(std::span<const EvalRecord> records,
                                      std::span<const std::string> labels, std::size_t k);

// Shannon entropy over ln K, in [0, 1].
double ambiguity_index(const ProbVector& p);

double similarity_margin(const EvalRecord& record, std::span<const std::string> labels);

double attention_overlap(const EvalRecord& record);

// Top-1 difference in percentage points.
double generalization_gain(const Report& aligned, const Report& baseline);

Report build_report(std::span<const EvalRecord> records, std::span<const std::string> labels,
                    const ReportConfig& config = {});

nlohmann::ordered_json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

// Parameter/value table; every Report field appears exactly once.
std::string format_report_markdown(const Report& report);
std::string format_report_csv(const Report& report);

}  // namespace vlscene
