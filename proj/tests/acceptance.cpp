// Acceptance run: one PASS/FAIL line per criterion P1-P11.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "json.hpp"
#include "oracles.hpp"
#include "vlscene/cli.hpp"
#include "vlscene/evaluate.hpp"
#include "vlscene/fusion.hpp"
#include "vlscene/metrics.hpp"
#include "vlscene/reasoner.hpp"
#include "vlscene/scenegen.hpp"
#include "vlscene/training.hpp"
#include "vlscene/vleb.hpp"

using namespace vlscene;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, spec, args...);
  return buf;
}

Embedding random_unit(Rng& rng, std::size_t d) {
  return l2_normalize(Embedding(oracle::random_vec(rng, d)));
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "vlscene_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli_main(args, o, e);
  if (out) *out = o.str();
  if (code != kExitOk) std::fprintf(stderr, "cli: %s", e.str().c_str());
  return code;
}

// P1
Outcome probability_contract() {
  Rng rng(1001);
  double worst_sum = 0.0;
  std::size_t bad_ambiguity = 0;
  for (int call = 0; call < 1000; ++call) {
    const std::size_t d = 2 + rng.below(31);
    const std::size_t k = 1 + rng.below(10);
    PromptSet prompts;
    for (std::size_t j = 0; j < k; ++j) {
      prompts.labels.push_back("p" + std::to_string(j));
      prompts.pooled.push_back(random_unit(rng, d));
      std::vector<Embedding> toks;
      for (std::size_t t = 0, m = 1 + rng.below(3); t < m; ++t) toks.push_back(random_unit(rng, d));
      prompts.tokens.push_back(toks);
    }
    SceneBundle scene;
    for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) scene.objects.push_back(random_unit(rng, d));
    ReasonConfig cfg;
    cfg.tau = rng.uniform(0.01, 2.0);
    cfg.alpha = rng.uniform(0.0, 2.0);
    cfg.beta = rng.uniform(0.0, 2.0);
    cfg.k = 1 + rng.below(6);
    cfg.threshold = rng.uniform(-1.0, 1.0);
    cfg.fusion_mode = rng.below(2) ? FusionMode::Mean : FusionMode::Attended;
    cfg.context = rng.below(4) != 0;
    const auto r = reason_scene(scene, prompts, cfg);
    double sum = 0.0;
    for (double p : r.probs.probs) sum += p;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    if (!(r.ambiguity >= 0.0 && r.ambiguity <= 1.0)) ++bad_ambiguity;
  }
  return {worst_sum <= 1e-6 && bad_ambiguity == 0,
          fmt("max |sum-1| = %.3g, ambiguity out of range: %zu", worst_sum, bad_ambiguity)};
}

// P2
Outcome closed_form() {
  PromptSet prompts;
  prompts.labels = {"a", "b"};
  prompts.pooled = {Embedding{0.8, 0.6}, Embedding{0.6, 0.8}};
  prompts.tokens = {{prompts.pooled[0]}, {prompts.pooled[1]}};
  SceneBundle scene;
  scene.objects = {Embedding{1.0, 0.0}};
  ReasonConfig cfg;
  cfg.tau = 0.1;
  cfg.context = false;
  const auto sharp = reason_scene(scene, prompts, cfg).probs;
  const auto flat = predict_zero_shot(Embedding{1.0, 0.0}, prompts, 100.0);
  const double e1 = std::max(std::abs(sharp[0] - 0.88079708), std::abs(sharp[1] - 0.11920292));
  const double e2 = std::max(std::abs(flat[0] - 0.5005), std::abs(flat[1] - 0.4995));
  return {e1 <= 1e-6 && e2 <= 1e-4,
          fmt("tau=0.1 [%.8f, %.8f] err %.2g; tau=100 [%.5f, %.5f] err %.2g", sharp[0], sharp[1], e1,
              flat[0], flat[1], e2)};
}

// P3
Outcome gradient_fidelity() {
  const double h = 1e-5;
  double worst_rel = 0.0;
  std::size_t violations = 0, compared = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 104729);
    const auto params = init_params(8, 8, 16, seed);
    Batch batch;
    std::vector<oracle::Vec> features;
    std::vector<std::vector<std::uint32_t>> texts;
    for (int i = 0; i < 3; ++i) {
      TrainPair pair{oracle::random_vec(rng, 8), {}};
      for (std::size_t t = 0, m = 1 + rng.below(3); t < m; ++t) {
        pair.tokens.push_back(static_cast<std::uint32_t>(rng.below(16)));
      }
      features.push_back(pair.features);
      texts.push_back(pair.tokens);
      batch.pairs.push_back(pair);
    }
    const double tau = 0.5;
    const auto g = loss_gradients(params, batch, tau);
    auto sweep = [&](Matrix EncoderParams::*block, const Matrix& analytic) {
      for (std::size_t i = 0; i < analytic.data.size(); ++i) {
        auto plus = params, minus = params;
        (plus.*block).data[i] += h;
        (minus.*block).data[i] -= h;
        const double numeric = (oracle::info_nce_literal(plus, features, texts, tau) -
                                oracle::info_nce_literal(minus, features, texts, tau)) /
                               (2 * h);
        const double abs_err = std::abs(analytic.data[i] - numeric);
        const double scale = std::max(std::abs(analytic.data[i]), std::abs(numeric));
        const double rel = scale > 0.0 ? abs_err / scale : 0.0;
        if (scale > 1e-6) {
          worst_rel = std::max(worst_rel, rel);
          ++compared;
        }
        if (!(rel < 1e-4 || abs_err < 1e-7)) ++violations;
      }
    };
    sweep(&EncoderParams::w_vision, g.w_vision);
    sweep(&EncoderParams::token_table, g.token_table);
    sweep(&EncoderParams::w_text, g.w_text);
  }
  return {violations == 0 && compared > 1000,
          fmt("max relative error %.3g over %zu nonzero entries, violations %zu", worst_rel, compared,
              violations)};
}

// P4
Outcome loss_anchors() {
  const auto params = init_params(8, 8, 16, 4);
  Rng rng(4);
  const auto x = oracle::random_vec(rng, 8);
  Batch one{{TrainPair{x, {1, 2}}}};
  const double l1 = contrastive_loss(params, one, 0.07);
  double worst = 0.0;
  for (std::size_t b = 2; b <= 4; ++b) {
    Batch batch;
    for (std::size_t i = 0; i < b; ++i) batch.pairs.push_back({x, {1, 2}});
    worst = std::max(worst, std::abs(contrastive_loss(params, batch, 0.07) - std::log(double(b))));
  }
  return {l1 == 0.0 && worst <= 1e-9, fmt("B=1 loss %.17g; max |loss - ln B| %.3g", l1, worst)};
}

// P5
Outcome training_progress() {
  const auto ds = gen_dataset(GenConfig{});
  const auto batches = training_batches(ds, 64);
  const auto init = init_params(ds.config.dim, ds.config.dim, 64, 0);
  const TrainConfig cfg{200, 0.05, 0.07, 0};
  const double before = dataset_loss(init, batches, cfg.tau);
  const auto trained = train_toy(init, batches, cfg);
  const double after = dataset_loss(trained.params, batches, cfg.tau);
  return {after < 0.5 * before,
          fmt("loss %.4f -> %.4f (ratio %.4f) over %zu batches", before, after, after / before,
              batches.size())};
}

// P6
Outcome metric_oracles() {
  Rng rng(606);
  std::size_t map_mismatch = 0, recall_breaks = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t k = 1 + rng.below(5);
    const std::size_t n = 1 + rng.below(20);
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < k; ++c) labels.push_back("c" + std::to_string(c));
    std::vector<EvalRecord> recs;
    for (std::size_t i = 0; i < n; ++i) {
      auto scores = oracle::random_vec(rng, k, -1.0, 1.0);
      if (k > 1 && rng.below(4) == 0) scores[1] = scores[0];
      EvalRecord r;
      r.scene_id = "s" + std::to_string(i);
      r.truth_label = labels[rng.below(k)];
      r.probs = ProbVector{oracle::naive_softmax(scores, 0.3)};
      if (i > 0 && rng.below(5) == 0) r.probs = recs[rng.below(recs.size())].probs;
      r.sims = scores;
      recs.push_back(r);
    }
    const double got = mean_average_precision(recs, labels);
    const double want = oracle::map_brute_force(recs, labels);
    if (std::bit_cast<std::uint64_t>(got) != std::bit_cast<std::uint64_t>(want)) ++map_mismatch;
    double prev = 0.0;
    for (std::size_t kk = 1; kk <= k + 1; ++kk) {
      const double r = recall_precision_at_k(recs, labels, kk).recall;
      if (r < prev) ++recall_breaks;
      prev = r;
    }
    if (prev != 1.0) ++recall_breaks;
  }
  const double u = ambiguity_index(ProbVector{{0.25, 0.25, 0.25, 0.25}});
  const double o = ambiguity_index(ProbVector{{0.0, 1.0, 0.0}});
  const double h = ambiguity_index(ProbVector{{0.5, 0.5, 0.0, 0.0}});
  const bool anchors = std::abs(u - 1.0) <= 1e-9 && std::abs(o) <= 1e-9 && std::abs(h - 0.5) <= 1e-9;
  return {map_mismatch == 0 && recall_breaks == 0 && anchors,
          fmt("mAP bitwise mismatches %zu/50, recall monotonicity breaks %zu, anchors %.12f/%.12f/%.12f",
              map_mismatch, recall_breaks, u, o, h)};
}

// P7
Outcome by_construction() {
  const auto dir = (work_dir() / "p7").string();
  if (cli({"gen-scenes", "--noise", "0", "--out", dir}) != kExitOk) return {false, "gen-scenes failed"};
  std::string out;
  if (cli({"evaluate", "--dataset", dir}, &out) != kExitOk) return {false, "evaluate failed"};
  const auto rep = nlohmann::json::parse(out);
  const double top1 = rep.at("top1").get<double>();
  const double fail = rep.at("failure_rate_novel").get<double>();

  // Every per-scene margin, from the same dataset file.
  const auto ds = load_dataset(dir);
  const auto results = run_scenes(ds, ReasonConfig{});
  double min_margin = INFINITY;
  for (std::size_t i = 0; i < results.size(); ++i) {
    min_margin = std::min(min_margin, similarity_margin(make_record(results[i], ds.scenes[i]),
                                                        ds.prompts.labels));
  }
  return {top1 == 1.0 && fail == 0.0 && min_margin > 0.0,
          fmt("top1 %.4f, failure_rate_novel %.4f, min margin %.4f over %zu scenes", top1, fail,
              min_margin, results.size())};
}

// P8
Outcome context_gain() {
  std::string per_seed;
  double total = 0.0;
  int positive = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GenConfig g;
    g.classes = 8;
    g.dim = 32;
    g.objects_per_scene = 6;
    g.clutter = 0.5;
    g.noise = 0.3;
    g.scenes = 500;
    g.seed = seed;
    const auto eval = evaluate_dataset(gen_dataset(g), ReasonConfig{}, Ablation::Context);
    const double gain = eval.report.gen_gain_points.value();
    total += gain;
    positive += gain > 0.0;
    per_seed += fmt("%s%+.2f", seed == 1 ? "" : ", ", gain);
  }
  const double mean = total / 5.0;
  return {mean >= 0.0 && positive >= 3,
          fmt("mean gain %+.2f points, positive on %d/5 seeds [%s]", mean, positive, per_seed.c_str())};
}

// P9
Outcome attention_contract() {
  Rng rng(909);
  double worst = 0.0;
  for (int call = 0; call < 1000; ++call) {
    const std::size_t d = 1 + rng.below(16), dk = 1 + rng.below(16);
    AttentionParams p{Matrix(d, dk), Matrix(d, dk), Matrix(d, dk)};
    for (Matrix* m : {&p.w_q, &p.w_k, &p.w_v}) {
      for (double& x : m->data) x = rng.uniform(-2.0, 2.0);
    }
    std::vector<Embedding> objects, tokens;
    for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) objects.push_back(random_unit(rng, d));
    for (std::size_t j = 0, m = 1 + rng.below(8); j < m; ++j) tokens.push_back(random_unit(rng, d));
    const auto map = cross_attention(p, objects, tokens);
    for (std::size_t i = 0; i < map.weights.rows; ++i) {
      double s = 0.0;
      for (double w : map.weights.row(i)) s += w;
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  const std::vector<Embedding> objects{{1.0, 0.0}, {0.0, 1.0}, {0.6, 0.8}};
  const std::vector<Embedding> one_token{Embedding{0.6, -0.8}};
  const auto single = cross_attention(AttentionParams::identity(2), objects, one_token);
  bool ones = true;
  for (double w : single.weights.data) ones = ones && w == 1.0;
  const std::vector<Embedding> same(4, Embedding{0.6, -0.8});
  const auto uni = cross_attention(AttentionParams::identity(2), objects, same);
  double uni_err = 0.0;
  for (double w : uni.weights.data) uni_err = std::max(uni_err, std::abs(w - 0.25));
  return {worst <= 1e-6 && ones && uni_err <= 1e-9,
          fmt("max |row sum - 1| %.3g, m=1 all ones %s, identical-token max dev %.3g", worst,
              ones ? "yes" : "no", uni_err)};
}

// P10
Outcome format_conformance() {
  Rng rng(1010);
  static const char* kinds[] = {"image", "text", "object", "prototype", "params"};
  std::size_t round_trip_failures = 0, signed_zeros = 0, subnormals = 0;
  for (int i = 0; i < 10000; ++i) {
    Bundle b;
    b.dim = static_cast<std::uint32_t>(rng.below(9));
    b.count = static_cast<std::uint32_t>(rng.below(6));
    b.meta.kind = kinds[rng.below(5)];
    if (rng.below(2)) {
      std::vector<std::string> labels;
      for (std::uint32_t r = 0; r < b.count; ++r) labels.push_back("l" + std::to_string(rng.below(50)));
      b.meta.labels = labels;
    }
    if (rng.below(3) == 0) b.meta.extra = nlohmann::json{{"i", i}};
    for (std::size_t v = 0; v < std::size_t{b.count} * b.dim; ++v) {
      std::uint32_t bits;
      switch (rng.below(6)) {
        case 0: bits = rng.below(2) ? 0x80000000u : 0u; break;
        case 1: bits = (rng.below(2) ? 0x80000000u : 0u) |
                       static_cast<std::uint32_t>(1 + rng.below((1u << 23) - 1));
                break;
        default:
          do {
            bits = static_cast<std::uint32_t>(rng.below(std::uint64_t{1} << 32));
          } while ((bits & 0x7f800000u) == 0x7f800000u);
      }
      const float x = std::bit_cast<float>(bits);
      signed_zeros += x == 0.0f && std::signbit(x);
      subnormals += std::fpclassify(x) == FP_SUBNORMAL;
      b.payload.push_back(x);
    }
    const auto bytes = serialize_bundle(b);
    if (!bitwise_equal(parse_bundle(bytes), b)) ++round_trip_failures;
  }

  const std::vector<std::uint8_t> golden{
      'V',  'L',  'E',  'B',  0x01, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00,
      0x00, 0x0f, 0x00, 0x00, 0x00, '{',  '"',  'k',  'i',  'n',  'd',  '"',  ':',  '"',  't',
      'e',  'x',  't',  '"',  '}',  0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x3f};
  const bool golden_ok =
      serialize_bundle(Bundle{2, 1, {"text", std::nullopt, nullptr}, {1.0f, 0.5f}}) == golden;

  auto code_of = [](std::vector<std::uint8_t> bytes) {
    try {
      parse_bundle(bytes);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  auto with = [&](auto edit) {
    auto b = golden;
    edit(b);
    return b;
  };
  const bool corrupt_ok =
      code_of(with([](auto& b) { b[0] = 'X'; })) == ErrorCode::BadMagic &&
      code_of(with([](auto& b) { b.resize(b.size() - 3); })) == ErrorCode::TruncatedFile &&
      code_of(with([](auto& b) { b.resize(12); })) == ErrorCode::TruncatedFile &&
      code_of(with([](auto& b) { b[4] = 9; })) == ErrorCode::UnsupportedVersion &&
      code_of(with([](auto& b) { b[22] = 'K'; })) == ErrorCode::MetaParseError &&
      code_of(with([](auto& b) { b.push_back(0); })) == ErrorCode::TrailingData;

  return {round_trip_failures == 0 && golden_ok && corrupt_ok && signed_zeros > 0 && subnormals > 0,
          fmt("round-trip failures %zu/10000 (signed zeros %zu, subnormals %zu), golden %s, corrupt "
              "cases %s",
              round_trip_failures, signed_zeros, subnormals, golden_ok ? "match" : "MISMATCH",
              corrupt_ok ? "ok" : "WRONG")};
}

void strip_timing(nlohmann::json& j) {
  if (j.is_object()) {
    j.erase("ms_per_sample");
    j.erase("timing_us");
    for (auto& [k, v] : j.items()) strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timing(v);
  }
}

// P11
Outcome determinism() {
  const auto dir = (work_dir() / "p11").string();
  if (cli({"gen-scenes", "--clutter", "0.5", "--noise", "0.3", "--scenes", "300", "--seed", "11", "--out",
           dir}) != kExitOk) {
    return {false, "gen-scenes failed"};
  }
  std::string a, b, c;
  const std::vector<std::string> base{"evaluate", "--dataset", dir, "--ablate", "context"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = extra;
    args.insert(args.end(), base.begin(), base.end());
    return args;
  };
  if (cli(with({"--threads", "4"}), &a) != kExitOk || cli(with({"--threads", "4"}), &b) != kExitOk) {
    return {false, "evaluate failed"};
  }
  auto serial = base;
  serial.push_back("--serial");
  if (cli(serial, &c) != kExitOk) return {false, "serial evaluate failed"};
  auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b), jc = nlohmann::json::parse(c);
  strip_timing(ja);
  strip_timing(jb);
  strip_timing(jc);
  const bool repeat = ja.dump() == jb.dump();
  const bool par_vs_ser = ja.dump() == jc.dump();
  return {repeat && par_vs_ser,
          fmt("repeat runs identical: %s, parallel(4 threads) vs serial identical: %s",
              repeat ? "yes" : "no", par_vs_ser ? "yes" : "no")};
}

struct Criterion {
  const char* id;
  const char* name;
  std::function<Outcome()> run;
  double limit_s;  // 0 = no runtime bound
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"P1", "probability contract", probability_contract, 10.0},
      {"P2", "closed-form softmax", closed_form, 0.0},
      {"P3", "gradient fidelity", gradient_fidelity, 60.0},
      {"P4", "loss anchors", loss_anchors, 0.0},
      {"P5", "training progress", training_progress, 60.0},
      {"P6", "metric oracles", metric_oracles, 0.0},
      {"P7", "noise-free perfection", by_construction, 0.0},
      {"P8", "directional context gain", context_gain, 120.0},
      {"P9", "attention contract", attention_contract, 0.0},
      {"P10", "format conformance", format_conformance, 0.0},
      {"P11", "determinism", determinism, 0.0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass;
    std::string timing = fmt("%.2fs", secs);
    if (c.limit_s > 0.0) {
      timing += fmt(" (limit %.0fs)", c.limit_s);
      if (secs >= c.limit_s) pass = false;
    }
    failures += !pass;
    std::printf("%-4s %s  %s: %s [%s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
