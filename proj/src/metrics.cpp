#include "vlscene/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace vlscene {

namespace {

std::size_t label_index(std::span<const std::string> labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorCode::UnknownLabel, "truth label '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

void check_record_shape(const EvalRecord& r, std::size_t num_labels) {
  if (r.probs.size() != num_labels || r.sims.size() != num_labels) {
    throw Error(ErrorCode::InvalidShape,
                "record '" + r.scene_id + "' scores do not match the label set size");
  }
}

void require_records(std::span<const EvalRecord> records, const char* what) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, std::string(what) + " on no records");
}

std::string scene_set_digest(std::span<const EvalRecord> records) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.scene_id);
  std::sort(ids.begin(), ids.end());
  // FNV-1a over the sorted ids, newline separated.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& id : ids) {
    for (unsigned char ch : id) h = (h ^ ch) * 0x100000001b3ULL;
    h = (h ^ '\n') * 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::size_t truth_rank(std::span<const double> scores, std::size_t truth) {
  const double t = scores[truth];
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > t || (scores[j] == t && j < truth)) ++ahead;
  }
  return ahead + 1;
}

double top_k_accuracy(std::span<const EvalRecord> records, std::span<const std::string> labels,
                      std::size_t k) {
  require_records(records, "top_k_accuracy");
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "k must be >= 1");
  std::size_t hits = 0;
  for (const auto& r : records) {
    check_record_shape(r, labels.size());
    if (truth_rank(r.probs.probs, label_index(labels, r.truth_label)) <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double mean_average_precision(std::span<const EvalRecord> records,
                              std::span<const std::string> labels) {
  require_records(records, "mean_average_precision");
  std::vector<std::size_t> truth(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    check_record_shape(records[r], labels.size());
    truth[r] = label_index(labels, records[r].truth_label);
  }

  std::vector<std::size_t> order(records.size());
  double ap_sum = 0.0;
  std::size_t classes_with_positives = 0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), c));
    if (positives == 0) continue;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return records[a].probs[c] > records[b].probs[c];
    });
    double precision_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 1; rank <= order.size(); ++rank) {
      if (truth[order[rank - 1]] != c) continue;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
    ap_sum += precision_sum / static_cast<double>(positives);
    ++classes_with_positives;
  }
  return ap_sum / static_cast<double>(classes_with_positives);
}

RecallPrecision recall_precision_at_k(std::span<const EvalRecord> records,
                                      std::span<const std::string> labels, std::size_t k) {
  const double recall = top_k_accuracy(records, labels, k);
  double precision = 0.0;
  for (const auto& r : records) {
    if (truth_rank(r.probs.probs, label_index(labels, r.truth_label)) <= k) {
      precision += 1.0 / static_cast<double>(k);
    }
  }
  return {recall, precision / static_cast<double>(records.size())};
}

double ambiguity_index(const ProbVector& p) {
  if (p.size() < 2) throw Error(ErrorCode::DegenerateK, "ambiguity needs at least 2 outcomes");
  double entropy = 0.0;
  for (double x : p.probs) {
    if (x > 0.0) entropy -= x * std::log(x);
  }
  return std::clamp(entropy / std::log(static_cast<double>(p.size())), 0.0, 1.0);
}

double similarity_margin(const EvalRecord& record, std::span<const std::string> labels) {
  if (labels.size() < 2) throw Error(ErrorCode::DegenerateK, "margin needs at least 2 labels");
  check_record_shape(record, labels.size());
  const std::size_t t = label_index(labels, record.truth_label);
  double best_other = -INFINITY;
  for (std::size_t j = 0; j < record.sims.size(); ++j) {
    if (j != t) best_other = std::max(best_other, record.sims[j]);
  }
  return record.sims[t] - best_other;
}

double attention_overlap(const EvalRecord& record) {
  if (!record.attention_on_truth) {
    throw Error(ErrorCode::MissingMask, "record '" + record.scene_id + "' has no relevance mask");
  }
  return *record.attention_on_truth;
}

double generalization_gain(const Report& aligned, const Report& baseline) {
  if (aligned.scene_set_digest != baseline.scene_set_digest || aligned.scenes != baseline.scenes) {
    throw Error(ErrorCode::DatasetMismatch, "reports cover different scene sets");
  }
  return aligned.top1 * 100.0 - baseline.top1 * 100.0;
}

Report build_report(std::span<const EvalRecord> records, std::span<const std::string> labels,
                    const ReportConfig& config) {
  require_records(records, "build_report");
  Report rep;
  rep.scenes = records.size();
  rep.scene_set_digest = scene_set_digest(records);
  rep.top1 = top_k_accuracy(records, labels, 1);
  rep.top5 = top_k_accuracy(records, labels, 5);
  rep.map = mean_average_precision(records, labels);
  for (std::size_t k : config.recall_ks) {
    const auto rp = recall_precision_at_k(records, labels, k);
    rep.recall_at[k] = rp.recall;
    rep.precision_at[k] = rp.precision;
  }

  const auto n = static_cast<double>(records.size());
  double ambiguity = 0.0, margin = 0.0, truth_sim = 0.0, ctx_weight = 0.0, overlap = 0.0;
  double timing = 0.0;
  std::size_t masked = 0, novel = 0, novel_hits = 0;
  for (const auto& r : records) {
    const std::size_t t = label_index(labels, r.truth_label);
    ambiguity += r.ambiguity;
    if (labels.size() >= 2) margin += similarity_margin(r, labels);
    truth_sim += r.sims[t];
    ctx_weight += r.context_weight;
    timing += static_cast<double>(r.timing_us);
    if (r.attention_on_truth) {
      overlap += *r.attention_on_truth;
      ++masked;
    }
    if (r.novel) {
      ++novel;
      if (truth_rank(r.probs.probs, t) == 1) ++novel_hits;
    }
  }
  rep.mean_ambiguity = ambiguity / n;
  rep.mean_margin = margin / n;
  rep.mean_truth_similarity = truth_sim / n;
  rep.mean_context_weight = ctx_weight / n;
  rep.mean_attention_overlap = masked ? overlap / static_cast<double>(masked) : 0.0;
  rep.novel_scenes = novel;
  rep.failure_rate_novel =
      novel ? 1.0 - static_cast<double>(novel_hits) / static_cast<double>(novel) : 0.0;
  rep.ms_per_sample = timing / n / 1000.0;
  return rep;
}

nlohmann::ordered_json to_json(const Report& report) {
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  nlohmann::ordered_json precision = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  for (const auto& [k, v] : report.precision_at) precision[std::to_string(k)] = v;
  nlohmann::ordered_json j;
  j["scenes"] = report.scenes;
  j["novel_scenes"] = report.novel_scenes;
  j["scene_set_digest"] = report.scene_set_digest;
  j["top1"] = report.top1;
  j["top5"] = report.top5;
  j["map"] = report.map;
  j["recall_at"] = recall;
  j["precision_at"] = precision;
  j["mean_ambiguity"] = report.mean_ambiguity;
  j["mean_margin"] = report.mean_margin;
  j["mean_attention_overlap"] = report.mean_attention_overlap;
  j["mean_truth_similarity"] = report.mean_truth_similarity;
  j["mean_context_weight"] = report.mean_context_weight;
  j["failure_rate_novel"] = report.failure_rate_novel;
  j["gen_gain_points"] = report.gen_gain_points ? nlohmann::ordered_json(*report.gen_gain_points)
                                                : nlohmann::ordered_json(nullptr);
  j["ms_per_sample"] = report.ms_per_sample;
  return j;
}

Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.scenes = j.at("scenes").get<std::size_t>();
    r.novel_scenes = j.at("novel_scenes").get<std::size_t>();
    r.scene_set_digest = j.at("scene_set_digest").get<std::string>();
    r.top1 = j.at("top1").get<double>();
    r.top5 = j.at("top5").get<double>();
    r.map = j.at("map").get<double>();
    for (const auto& [k, v] : j.at("recall_at").items()) r.recall_at[std::stoul(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("precision_at").items()) {
      r.precision_at[std::stoul(k)] = v.get<double>();
    }
    r.mean_ambiguity = j.at("mean_ambiguity").get<double>();
    r.mean_margin = j.at("mean_margin").get<double>();
    r.mean_attention_overlap = j.at("mean_attention_overlap").get<double>();
    r.mean_truth_similarity = j.at("mean_truth_similarity").get<double>();
    r.mean_context_weight = j.at("mean_context_weight").get<double>();
    r.failure_rate_novel = j.at("failure_rate_novel").get<double>();
    if (!j.at("gen_gain_points").is_null()) r.gen_gain_points = j.at("gen_gain_points").get<double>();
    r.ms_per_sample = j.at("ms_per_sample").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MetaParseError, std::string("report JSON: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::MetaParseError, std::string("report JSON: ") + e.what());
  }
}

namespace {

struct Row {
  std::string parameter;
  std::string field;
  std::string value;
};

std::string fmt(double x, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string pct(double fraction) { return fmt(fraction * 100.0, "%.2f"); }

std::vector<Row> report_rows(const Report& r) {
  std::vector<Row> rows{
      {"Scenes evaluated", "scenes", std::to_string(r.scenes)},
      {"Novel scenes", "novel_scenes", std::to_string(r.novel_scenes)},
      {"Scene set digest", "scene_set_digest", r.scene_set_digest},
      {"Top-1 Accuracy (%)", "top1", pct(r.top1)},
      {"Top-5 Accuracy (%)", "top5", pct(r.top5)},
      {"Mean Average Precision (mAP)", "map", fmt(r.map)},
  };
  for (const auto& [k, v] : r.recall_at) {
    rows.push_back({"Recall@" + std::to_string(k) + " (%)", "recall_at." + std::to_string(k), pct(v)});
  }
  for (const auto& [k, v] : r.precision_at) {
    rows.push_back(
        {"Precision@" + std::to_string(k) + " (%)", "precision_at." + std::to_string(k), pct(v)});
  }
  rows.push_back({"Scene Ambiguity Index", "mean_ambiguity", fmt(r.mean_ambiguity)});
  rows.push_back({"CLIP Similarity Margin", "mean_margin", fmt(r.mean_margin)});
  rows.push_back({"Attention Map Overlap (%)", "mean_attention_overlap", pct(r.mean_attention_overlap)});
  rows.push_back({"Cosine Similarity (V-L)", "mean_truth_similarity", fmt(r.mean_truth_similarity)});
  rows.push_back({"Contextual Attention Weight", "mean_context_weight", fmt(r.mean_context_weight)});
  rows.push_back({"Failure Rate in Novel Scenes (%)", "failure_rate_novel", pct(r.failure_rate_novel)});
  rows.push_back({"Zero-Shot Generalization Gain (points)", "gen_gain_points",
                  r.gen_gain_points ? fmt(*r.gen_gain_points, "%+.2f") : "n/a"});
  rows.push_back({"Inference Time (ms/sample)", "ms_per_sample", fmt(r.ms_per_sample, "%.3f")});
  return rows;
}

}  // namespace

std::string format_report_markdown(const Report& report) {
  std::ostringstream out;
  out << "| Parameter | Field | Value |\n|---|---|---|\n";
  for (const auto& row : report_rows(report)) {
    out << "| " << row.parameter << " | " << row.field << " | " << row.value << " |\n";
  }
  return out.str();
}

std::string format_report_csv(const Report& report) {
  std::ostringstream out;
  out << "parameter,field,value\n";
  for (const auto& row : report_rows(report)) {
    out << '"' << row.parameter << "\"," << row.field << ',' << row.value << '\n';
  }
  return out.str();
}

}  // namespace vlscene
