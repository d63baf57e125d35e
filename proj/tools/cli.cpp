#include "vlscene/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "vlscene/evaluate.hpp"
#include "vlscene/metrics.hpp"
#include "vlscene/params_io.hpp"
#include "vlscene/reasoner.hpp"
#include "vlscene/scenegen.hpp"
#include "vlscene/training.hpp"
#include "vlscene/vleb.hpp"

namespace fs = std::filesystem;

namespace vlscene {

namespace {

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MetaParseError, path.string() + ": " + e.what());
  }
}

ReasonConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return config_from_json(read_json(path));
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_text_atomic(out_path, text);
  }
}

SceneBundle load_scene(const fs::path& path) {
  const Bundle b = read_bundle(path);
  if (b.count == 0) throw Error(ErrorCode::EmptyInput, path.string() + " holds no embeddings");
  auto rows = bundle_embeddings(b);
  SceneBundle scene;
  scene.scene_id = path.stem().string();
  if (b.meta.kind == "image") {
    // Row 0 is the global image; any further rows are its objects.
    scene.global_image = rows.front();
    if (rows.size() == 1) {
      scene.objects = rows;
    } else {
      scene.objects.assign(rows.begin() + 1, rows.end());
    }
  } else if (b.meta.kind == "object") {
    scene.objects = std::move(rows);
  } else {
    throw Error(ErrorCode::MetaParseError, "scene file kind must be image or object");
  }
  const auto& extra = b.meta.extra;
  if (extra.is_object()) {
    try {
      if (extra.contains("scene_id")) scene.scene_id = extra.at("scene_id").get<std::string>();
      if (extra.contains("truth")) scene.truth_label = extra.at("truth").get<std::string>();
      if (extra.contains("mask")) scene.relevance_mask = extra.at("mask").get<std::vector<bool>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MetaParseError, std::string("scene metadata: ") + e.what());
    }
  }
  scene.validate();
  return scene;
}

PromptSet load_prompts(const fs::path& pooled_path, const std::string& tokens_path) {
  const Bundle pooled = read_bundle(pooled_path);
  if (pooled.meta.kind != "text") throw Error(ErrorCode::MetaParseError, "prompts must be kind text");
  if (!pooled.meta.labels) throw Error(ErrorCode::MetaParseError, "prompt file needs labels");
  PromptSet prompts;
  prompts.labels = *pooled.meta.labels;
  prompts.pooled = bundle_embeddings(pooled);
  if (tokens_path.empty()) {
    for (const auto& p : prompts.pooled) prompts.tokens.push_back({p});
  } else {
    const Bundle tokens = read_bundle(tokens_path);
    const auto rows = bundle_embeddings(tokens);
    std::vector<std::size_t> counts;
    try {
      counts = tokens.meta.extra.at("token_counts").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MetaParseError, std::string("token_counts: ") + e.what());
    }
    std::size_t offset = 0;
    for (auto m : counts) {
      if (offset + m > rows.size()) throw Error(ErrorCode::MetaParseError, "token_counts exceed rows");
      prompts.tokens.emplace_back(rows.begin() + offset, rows.begin() + offset + m);
      offset += m;
    }
  }
  prompts.validate();
  return prompts;
}

int run_gen_scenes(const GenConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const Dataset ds = gen_dataset(cfg);
  save_dataset(ds, out_dir);
  out << "wrote " << ds.scenes.size() << " scenes to " << out_dir << "\n";
  return kExitOk;
}

int run_reason(const std::string& scene_path, const std::string& prompts_path,
               const std::string& tokens_path, const std::string& config_path,
               const std::string& out_path, std::ostream& out) {
  const ReasonConfig cfg = load_config(config_path);
  const SceneBundle scene = load_scene(scene_path);
  const PromptSet prompts = load_prompts(prompts_path, tokens_path);
  const ReasonResult result = reason_scene(scene, prompts, cfg);
  emit(to_json(result, prompts).dump(2) + "\n", out_path, out);
  return kExitOk;
}

int run_evaluate(const std::string& dataset_dir, const std::string& config_path,
                 const std::string& ablate, const std::string& out_path, bool serial,
                 std::ostream& out) {
  const ReasonConfig cfg = load_config(config_path);
  const Dataset ds = load_dataset(dataset_dir);
  const Evaluation eval = evaluate_dataset(ds, cfg, ablation_from_string(ablate),
                                           serial ? Exec::Serial : Exec::Parallel);
  emit(to_json(eval).dump(2) + "\n", out_path, out);
  return kExitOk;
}

struct TrainArgs {
  std::string dataset;
  TrainConfig cfg;
  std::size_t dim = 32;
  std::size_t vocab = 64;
  std::string out;
  std::string trace;
};

int run_train(const TrainArgs& args, std::ostream& out) {
  const Dataset ds = load_dataset(args.dataset);
  const auto batches = training_batches(ds, args.vocab);
  const EncoderParams init = init_params(ds.config.dim, args.dim, args.vocab, args.cfg.seed);
  const double before = dataset_loss(init, batches, args.cfg.tau);
  const TrainResult trained = train_toy(init, batches, args.cfg);
  const double after = dataset_loss(trained.params, batches, args.cfg.tau);
  write_bundle(args.out, params_to_bundle(trained.params));
  if (!args.trace.empty()) write_text_atomic(args.trace, loss_trace_csv(trained.loss_trace));
  char line[160];
  std::snprintf(line, sizeof line, "batches=%zu steps=%zu loss_before=%.6f loss_after=%.6f\n",
                batches.size(), args.cfg.steps, before, after);
  out << line;
  return kExitOk;
}

int run_report(const std::string& in_path, const std::string& format, std::ostream& out) {
  const Report report = report_from_json(read_json(in_path));
  out << (format == "csv" ? format_report_csv(report) : format_report_markdown(report));
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot vision-language scene reasoning"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");

  GenConfig gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-scenes", "Generate a synthetic scene dataset");
  gen_cmd->add_option("--classes", gen.classes)->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim)->capture_default_str();
  gen_cmd->add_option("--scenes", gen.scenes)->capture_default_str();
  gen_cmd->add_option("--objects", gen.objects_per_scene)->capture_default_str();
  gen_cmd->add_option("--clutter", gen.clutter)->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise)->capture_default_str();
  gen_cmd->add_option("--novel-fraction", gen.novel_fraction)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output dataset directory")->required();

  std::string scene_path, prompts_path, tokens_path, reason_config, reason_out;
  auto* reason_cmd = app.add_subcommand("reason", "Reason about one scene");
  reason_cmd->add_option("--scene", scene_path, "Scene VLEB file")->required();
  reason_cmd->add_option("--prompts", prompts_path, "Pooled prompt VLEB file")->required();
  reason_cmd->add_option("--prompt-tokens", tokens_path, "Per-token prompt VLEB file");
  reason_cmd->add_option("--config", reason_config, "Run config JSON");
  reason_cmd->add_option("--out", reason_out, "Result JSON (stdout when omitted)");

  std::string eval_dataset, eval_config, eval_out, ablate = "none";
  bool serial = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a dataset and build a report");
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset directory")->required();
  eval_cmd->add_option("--config", eval_config, "Run config JSON");
  eval_cmd->add_option("--ablate", ablate, "context|alpha|beta|none")
      ->check(CLI::IsMember({"context", "alpha", "beta", "none"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Report JSON (stdout when omitted)");
  eval_cmd->add_flag("--serial", serial, "Evaluate scenes sequentially");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train the toy encoders contrastively");
  train_cmd->add_option("--dataset", train.dataset, "Dataset directory")->required();
  train_cmd->add_option("--steps", train.cfg.steps)->capture_default_str();
  train_cmd->add_option("--lr", train.cfg.lr)->capture_default_str();
  train_cmd->add_option("--tau", train.cfg.tau)->capture_default_str();
  train_cmd->add_option("--seed", train.cfg.seed)->capture_default_str();
  train_cmd->add_option("--dim", train.dim, "Embedding dimension d")->capture_default_str();
  train_cmd->add_option("--vocab", train.vocab)->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output params VLEB")->required();
  train_cmd->add_option("--trace", train.trace, "Loss trace CSV");

  std::string report_in, report_format = "md";
  auto* report_cmd = app.add_subcommand("report", "Print a report as a parameter/value table");
  report_cmd->add_option("--in", report_in, "Report JSON")->required();
  report_cmd->add_option("--format", report_format, "md|csv")
      ->check(CLI::IsMember({"md", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*gen_cmd) return run_gen_scenes(gen, gen_out, out);
    if (*reason_cmd) {
      return run_reason(scene_path, prompts_path, tokens_path, reason_config, reason_out, out);
    }
    if (*eval_cmd) return run_evaluate(eval_dataset, eval_config, ablate, eval_out, serial, out);
    if (*train_cmd) return run_train(train, out);
    if (*report_cmd) return run_report(report_in, report_format, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"vlscene"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace vlscene
