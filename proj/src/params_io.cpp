#include "vlscene/params_io.hpp"

#include <cstdio>

namespace vlscene {

Bundle params_to_bundle(const EncoderParams& params) {
  params.validate();
  Bundle b;
  b.dim = static_cast<std::uint32_t>(params.embed_dim);
  b.count = static_cast<std::uint32_t>(params.feature_dim + params.vocab + params.embed_dim);
  b.meta.kind = "params";
  b.meta.extra = {{"feature_dim", params.feature_dim},
                  {"embed_dim", params.embed_dim},
                  {"vocab", params.vocab},
                  {"seed", params.seed},
                  {"layout", {"w_vision", "token_table", "w_text"}}};
  b.payload.reserve(std::size_t{b.count} * b.dim);
  for (const Matrix* m : {&params.w_vision, &params.token_table, &params.w_text}) {
    for (double x : m->data) b.payload.push_back(static_cast<float>(x));
  }
  return b;
}

EncoderParams params_from_bundle(const Bundle& bundle) {
  if (bundle.meta.kind != "params") {
    throw Error(ErrorCode::MetaParseError, "bundle kind is '" + bundle.meta.kind + "', not params");
  }
  EncoderParams p;
  try {
    p.feature_dim = bundle.meta.extra.at("feature_dim").get<std::size_t>();
    p.embed_dim = bundle.meta.extra.at("embed_dim").get<std::size_t>();
    p.vocab = bundle.meta.extra.at("vocab").get<std::size_t>();
    p.seed = bundle.meta.extra.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MetaParseError, std::string("params metadata: ") + e.what());
  }
  if (bundle.dim != p.embed_dim || bundle.count != p.feature_dim + p.vocab + p.embed_dim) {
    throw Error(ErrorCode::InvalidShape, "params bundle shape does not match its metadata");
  }
  std::size_t offset = 0;
  auto take = [&](std::size_t rows) {
    Matrix m(rows, p.embed_dim);
    for (double& x : m.data) x = bundle.payload[offset++];
    return m;
  };
  p.w_vision = take(p.feature_dim);
  p.token_table = take(p.vocab);
  p.w_text = take(p.embed_dim);
  p.validate();
  return p;
}

std::string loss_trace_csv(std::span<const double> trace) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, trace[i]);
    out += buf;
  }
  return out;
}

}  // namespace vlscene
