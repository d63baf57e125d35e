#pragma once

// Test-only reference computations. Written as straight-line loops over raw
// vectors so they share no code path with the library routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vlscene/encoders.hpp"
#include "vlscene/metrics.hpp"
#include "vlscene/rng.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double cosine(const Vec& a, const Vec& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

inline Vec unit(Vec v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

inline Vec to_vec(const vlscene::Embedding& e) { return {e.values().begin(), e.values().end()}; }

inline Vec random_vec(vlscene::Rng& rng, std::size_t d, double lo = -1.0, double hi = 1.0) {
  Vec v(d);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Plain softmax without max subtraction; only for moderate inputs.
inline Vec naive_softmax(const Vec& scores, double tau) {
  Vec out(scores.size());
  double total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += (out[i] = std::exp(scores[i] / tau));
  for (double& x : out) x /= total;
  return out;
}

// x (length r) times row-major matrix data (r x c).
inline Vec matvec(const Vec& x, const std::vector<double>& data, std::size_t cols) {
  Vec out(cols, 0.0);
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += x[r] * data[r * cols + c];
  }
  return out;
}

inline Vec image_embedding(const vlscene::EncoderParams& p, const Vec& x) {
  return unit(matvec(x, p.w_vision.data, p.embed_dim));
}

inline Vec pooled_text(const vlscene::EncoderParams& p, const std::vector<std::uint32_t>& ids) {
  Vec sum(p.embed_dim, 0.0);
  for (auto id : ids) {
    Vec e(p.token_table.data.begin() + id * p.embed_dim,
          p.token_table.data.begin() + (id + 1) * p.embed_dim);
    Vec proj = matvec(e, p.w_text.data, p.embed_dim);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += proj[c];
  }
  return unit(sum);
}

// InfoNCE written literally: mean_i -log(exp(s_ii/tau) / sum_j exp(s_ij/tau)).
inline double info_nce_literal(const vlscene::EncoderParams& p,
                               const std::vector<Vec>& features,
                               const std::vector<std::vector<std::uint32_t>>& texts, double tau) {
  const std::size_t b = features.size();
  std::vector<Vec> v(b), t(b);
  for (std::size_t i = 0; i < b; ++i) {
    v[i] = image_embedding(p, features[i]);
    t[i] = pooled_text(p, texts[i]);
  }
  double total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    double denom = 0;
    for (std::size_t j = 0; j < b; ++j) {
      double s = 0;
      for (std::size_t c = 0; c < v[i].size(); ++c) s += v[i][c] * t[j][c];
      denom += std::exp(s / tau);
    }
    double sii = 0;
    for (std::size_t c = 0; c < v[i].size(); ++c) sii += v[i][c] * t[i][c];
    total += -std::log(std::exp(sii / tau) / denom);
  }
  return total / static_cast<double>(b);
}

// Exhaustive O(K * N^2) average precision. Each positive's rank is counted
// directly; precision terms are summed in rank order.
inline double map_brute_force(const std::vector<vlscene::EvalRecord>& records,
                              const std::vector<std::string>& labels) {
  double ap_sum = 0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    std::vector<std::pair<std::size_t, double>> terms;  // (rank, precision)
    std::size_t positives = 0;
    for (std::size_t r = 0; r < records.size(); ++r) positives += records[r].truth_label == labels[c];
    if (positives == 0) continue;
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (records[r].truth_label != labels[c]) continue;
      const double s = records[r].probs.probs[c];
      std::size_t rank = 1;
      for (std::size_t q = 0; q < records.size(); ++q) {
        const double sq = records[q].probs.probs[c];
        if (sq > s || (sq == s && q < r)) ++rank;
      }
      std::size_t hits = 0;
      for (std::size_t q = 0; q < records.size(); ++q) {
        if (records[q].truth_label != labels[c]) continue;
        const double sq = records[q].probs.probs[c];
        std::size_t rank_q = 1;
        for (std::size_t u = 0; u < records.size(); ++u) {
          const double su = records[u].probs.probs[c];
          if (su > sq || (su == sq && u < q)) ++rank_q;
        }
        if (rank_q <= rank) ++hits;
      }
      terms.emplace_back(rank, static_cast<double>(hits) / static_cast<double>(rank));
    }
    std::sort(terms.begin(), terms.end());
    double sum = 0;
    for (const auto& [rank, prec] : terms) sum += prec;
    ap_sum += sum / static_cast<double>(positives);
    ++classes;
  }
  return ap_sum / static_cast<double>(classes);
}

}  // namespace oracle
