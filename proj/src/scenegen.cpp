#include "vlscene/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vlscene/rng.hpp"
#include "vlscene/vleb.hpp"

namespace vlscene {

namespace {

constexpr std::uint64_t kPrototypeStream = 0x50524f544f000000ULL;
constexpr std::uint64_t kTokenStream = 0x544f4b454e000000ULL;

Embedding perturbed(const Embedding& base, double noise, Rng& rng) {
  if (noise == 0.0) return base;
  std::vector<double> v(base.values().begin(), base.values().end());
  for (double& x : v) x += noise * rng.gaussian();
  return quantize(l2_normalize(Embedding(std::move(v))));
}

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MetaParseError, path.string() + ": " + e.what());
  }
}

}  // namespace

void GenConfig::validate() const {
  if (classes < 2) throw Error(ErrorCode::ConfigInvalid, "need at least 2 classes");
  if (dim < 1) throw Error(ErrorCode::ConfigInvalid, "dim must be >= 1");
  if (scenes < 1) throw Error(ErrorCode::ConfigInvalid, "scenes must be >= 1");
  if (objects_per_scene < 1) throw Error(ErrorCode::ConfigInvalid, "objects per scene must be >= 1");
  if (!(clutter >= 0.0 && clutter <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "clutter not in [0,1]");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error(ErrorCode::ConfigInvalid, "noise must be >= 0");
  if (!(novel_fraction >= 0.0 && novel_fraction <= 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "novel fraction not in [0,1]");
  }
  if (classes > 2 * dim) throw Error(ErrorCode::ConfigInvalid, "classes must not exceed 2 * dim");
}

std::size_t GenConfig::novel_classes() const {
  return std::min(classes, static_cast<std::size_t>(std::llround(double(classes) * novel_fraction)));
}

std::size_t GenConfig::target_count() const {
  const std::size_t n = objects_per_scene;
  auto t = static_cast<std::size_t>(std::llround(double(n) * (1.0 - clutter)));
  t = std::clamp<std::size_t>(t, 1, n);
  // Distractor classes may hold at most t - 1 objects each.
  while (n - t > (classes - 1) * (t - 1)) ++t;
  return t;
}

std::size_t Dataset::class_of(const SceneBundle& scene) const {
  return prompts.index_of(scene.truth_label.value_or(""));
}

bool Dataset::is_novel_class(std::size_t class_index) const {
  return class_index >= config.classes - config.novel_classes();
}

std::string class_label(std::size_t class_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%02zu", class_index);
  return buf;
}

Embedding quantize(const Embedding& e) {
  std::vector<double> v(e.values().begin(), e.values().end());
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  return Embedding(std::move(v));
}

std::uint64_t scene_seed(std::uint64_t seed, std::size_t scene_index) {
  return mix_seed(seed ^ static_cast<std::uint64_t>(scene_index));
}

std::vector<Embedding> gen_prototypes(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  if (classes < 1 || dim < 1) throw Error(ErrorCode::ConfigInvalid, "prototype shape");
  if (classes > 2 * dim) throw Error(ErrorCode::ConfigInvalid, "classes must not exceed 2 * dim");
  Rng rng(mix_seed(seed) ^ kPrototypeStream);
  std::vector<Embedding> protos;
  protos.reserve(classes);
  while (protos.size() < classes) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kPrototypeRetryCap && !placed; ++attempt) {
      std::vector<double> v(dim);
      for (double& x : v) x = rng.gaussian();
      Embedding candidate(std::move(v));
      if (candidate.norm() <= kZeroNormEps) continue;
      candidate = quantize(l2_normalize(candidate));
      placed = std::all_of(protos.begin(), protos.end(), [&](const Embedding& p) {
        return std::abs(cosine_sim(p, candidate)) < kPrototypeMaxAbsCos;
      });
      if (placed) protos.push_back(std::move(candidate));
    }
    if (!placed) {
      throw Error(ErrorCode::SeparationFailure,
                  "could not place prototype " + std::to_string(protos.size()) + " after " +
                      std::to_string(kPrototypeRetryCap) + " draws");
    }
  }
  return protos;
}

SceneBundle gen_scene(std::span<const Embedding> prototypes, std::size_t target_class,
                      const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (prototypes.size() != cfg.classes) {
    throw Error(ErrorCode::ConfigInvalid, "prototype count differs from configured classes");
  }
  if (target_class >= cfg.classes) throw Error(ErrorCode::ConfigInvalid, "target class out of range");

  Rng rng(seed);
  const std::size_t n = cfg.objects_per_scene;
  const std::size_t targets = cfg.target_count();

  // Class of every object slot: targets first, then distractors with each
  // distractor class capped below the target count.
  std::vector<std::size_t> slot_class(targets, target_class);
  std::vector<std::size_t> used(cfg.classes, 0);
  for (std::size_t i = targets; i < n; ++i) {
    std::vector<std::size_t> open;
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      if (c != target_class && used[c] + 1 < targets) open.push_back(c);
    }
    const std::size_t c = open[rng.below(open.size())];
    ++used[c];
    slot_class.push_back(c);
  }
  shuffle_in_place(slot_class, rng);

  SceneBundle scene;
  scene.truth_label = class_label(target_class);
  std::vector<bool> mask(n);
  scene.objects.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scene.objects.push_back(perturbed(prototypes[slot_class[i]], cfg.noise, rng));
    mask[i] = slot_class[i] == target_class;
  }
  scene.relevance_mask = std::move(mask);
  return scene;
}

Dataset gen_dataset(const GenConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  ds.prototypes = gen_prototypes(cfg.classes, cfg.dim, cfg.seed);

  Rng token_rng(mix_seed(cfg.seed) ^ kTokenStream);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    ds.prompts.labels.push_back(class_label(c));
    ds.prompts.pooled.push_back(ds.prototypes[c]);
    std::vector<Embedding> tokens;
    for (std::size_t t = 0; t < kTokensPerPrompt; ++t) {
      tokens.push_back(perturbed(ds.prototypes[c], kTokenNoise, token_rng));
    }
    ds.prompts.tokens.push_back(std::move(tokens));
  }

  ds.scenes.resize(cfg.scenes);
  const auto count = static_cast<std::ptrdiff_t>(cfg.scenes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::size_t target = idx % cfg.classes;
    SceneBundle scene = gen_scene(ds.prototypes, target, cfg, scene_seed(cfg.seed, idx));
    char id[32];
    std::snprintf(id, sizeof id, "scene_%05zu", idx);
    scene.scene_id = id;
    scene.novel = ds.is_novel_class(target);
    ds.scenes[idx] = std::move(scene);
  }
  return ds;
}

nlohmann::ordered_json to_json(const GenConfig& cfg) {
  return {{"classes", cfg.classes},
          {"dim", cfg.dim},
          {"scenes", cfg.scenes},
          {"objects_per_scene", cfg.objects_per_scene},
          {"clutter", cfg.clutter},
          {"noise", cfg.noise},
          {"novel_fraction", cfg.novel_fraction},
          {"seed", cfg.seed}};
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  try {
    GenConfig cfg;
    cfg.classes = j.at("classes").get<std::size_t>();
    cfg.dim = j.at("dim").get<std::size_t>();
    cfg.scenes = j.at("scenes").get<std::size_t>();
    cfg.objects_per_scene = j.at("objects_per_scene").get<std::size_t>();
    cfg.clutter = j.at("clutter").get<double>();
    cfg.noise = j.at("noise").get<double>();
    cfg.novel_fraction = j.at("novel_fraction").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MetaParseError, std::string("generator config: ") + e.what());
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  write_bundle(dir / "prototypes.vleb",
               make_bundle(ds.prototypes, {"prototype", ds.prompts.labels, nullptr}));
  write_bundle(dir / "prompts.vleb",
               make_bundle(ds.prompts.pooled, {"text", ds.prompts.labels, nullptr}));

  std::vector<Embedding> token_rows;
  std::vector<std::string> token_labels;
  std::vector<std::size_t> token_counts;
  for (std::size_t j = 0; j < ds.prompts.size(); ++j) {
    token_counts.push_back(ds.prompts.tokens[j].size());
    for (const auto& t : ds.prompts.tokens[j]) {
      token_rows.push_back(t);
      token_labels.push_back(ds.prompts.labels[j]);
    }
  }
  write_bundle(dir / "prompt_tokens.vleb",
               make_bundle(token_rows,
                           {"text", token_labels, nlohmann::json{{"token_counts", token_counts}}}));

  std::vector<Embedding> object_rows;
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : ds.scenes) {
    object_rows.insert(object_rows.end(), s.objects.begin(), s.objects.end());
    nlohmann::json entry{{"id", s.scene_id},
                         {"truth", s.truth_label.value_or("")},
                         {"objects", s.objects.size()},
                         {"novel", s.novel}};
    if (s.relevance_mask) entry["mask"] = *s.relevance_mask;
    scenes.push_back(std::move(entry));
  }
  write_bundle(dir / "scenes.vleb",
               make_bundle(object_rows, {"object", std::nullopt, nlohmann::json{{"scenes", scenes}}},
                           static_cast<std::uint32_t>(ds.config.dim)));

  nlohmann::ordered_json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["generator"] = to_json(ds.config);
  manifest["labels"] = ds.prompts.labels;
  std::vector<std::string> novel;
  for (std::size_t c = 0; c < ds.config.classes; ++c) {
    if (ds.is_novel_class(c)) novel.push_back(ds.prompts.labels[c]);
  }
  manifest["novel_classes"] = novel;
  manifest["files"] = {{"prototypes", "prototypes.vleb"},
                       {"prompts", "prompts.vleb"},
                       {"prompt_tokens", "prompt_tokens.vleb"},
                       {"scenes", "scenes.vleb"}};
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest = parse_json_file(dir / "manifest.json");
  Dataset ds;
  try {
    const auto version = manifest.at("format_version").get<std::uint32_t>();
    if (version != kDatasetFormatVersion) {
      throw Error(ErrorCode::UnsupportedVersion, "dataset format " + std::to_string(version));
    }
    ds.config = gen_config_from_json(manifest.at("generator"));

    const Bundle protos = read_bundle(dir / "prototypes.vleb");
    const Bundle pooled = read_bundle(dir / "prompts.vleb");
    const Bundle tokens = read_bundle(dir / "prompt_tokens.vleb");
    const Bundle objects = read_bundle(dir / "scenes.vleb");

    ds.prototypes = bundle_embeddings(protos);
    ds.prompts.pooled = bundle_embeddings(pooled);
    if (!pooled.meta.labels) throw Error(ErrorCode::MetaParseError, "prompts.vleb has no labels");
    ds.prompts.labels = *pooled.meta.labels;

    const auto token_rows = bundle_embeddings(tokens);
    std::size_t offset = 0;
    for (auto m : tokens.meta.extra.at("token_counts").get<std::vector<std::size_t>>()) {
      if (offset + m > token_rows.size()) {
        throw Error(ErrorCode::MetaParseError, "token_counts exceed token rows");
      }
      ds.prompts.tokens.emplace_back(token_rows.begin() + offset, token_rows.begin() + offset + m);
      offset += m;
    }
    if (offset != token_rows.size()) throw Error(ErrorCode::MetaParseError, "unused token rows");

    const auto object_rows = bundle_embeddings(objects);
    offset = 0;
    for (const auto& entry : objects.meta.extra.at("scenes")) {
      SceneBundle s;
      s.scene_id = entry.at("id").get<std::string>();
      s.truth_label = entry.at("truth").get<std::string>();
      s.novel = entry.at("novel").get<bool>();
      const auto n = entry.at("objects").get<std::size_t>();
      if (offset + n > object_rows.size()) {
        throw Error(ErrorCode::MetaParseError, "scene object counts exceed object rows");
      }
      s.objects.assign(object_rows.begin() + offset, object_rows.begin() + offset + n);
      offset += n;
      if (entry.contains("mask")) s.relevance_mask = entry.at("mask").get<std::vector<bool>>();
      s.validate();
      ds.scenes.push_back(std::move(s));
    }
    if (offset != object_rows.size()) throw Error(ErrorCode::MetaParseError, "unused object rows");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MetaParseError, dir.string() + ": " + e.what());
  }
  ds.prompts.validate();
  return ds;
}

TokenIds class_token_ids(std::size_t class_index, std::size_t vocab) {
  if (vocab == 0) throw Error(ErrorCode::InvalidShape, "vocab must be >= 1");
  return {static_cast<std::uint32_t>((2 * class_index) % vocab),
          static_cast<std::uint32_t>((2 * class_index + 1) % vocab)};
}

std::vector<Batch> training_batches(const Dataset& ds, std::size_t vocab) {
  std::vector<std::vector<const SceneBundle*>> by_class(ds.prompts.size());
  for (const auto& s : ds.scenes) {
    const std::size_t c = ds.class_of(s);
    if (!ds.is_novel_class(c)) by_class[c].push_back(&s);
  }
  std::size_t rounds = SIZE_MAX;
  std::size_t train_classes = 0;
  for (const auto& list : by_class) {
    if (list.empty()) continue;
    rounds = std::min(rounds, list.size());
    ++train_classes;
  }
  if (train_classes == 0) throw Error(ErrorCode::EmptyBatch, "dataset has no training classes");

  std::vector<Batch> batches(rounds);
  for (std::size_t b = 0; b < rounds; ++b) {
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (by_class[c].empty()) continue;
      const Embedding mean = mean_of(by_class[c][b]->objects);
      batches[b].pairs.push_back(
          {std::vector<double>(mean.values().begin(), mean.values().end()), class_token_ids(c, vocab)});
    }
  }
  return batches;
}

}  // namespace vlscene
