#include "vlscene/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vlscene {

namespace {

void check_finite(std::span<const double> values) {
  for (double x : values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "embedding contains NaN or Inf");
  }
}

double checked_norm(const Embedding& e, const char* what) {
  const double n = e.norm();
  if (n <= kZeroNormEps) throw Error(ErrorCode::ZeroVector, std::string(what) + " has zero norm");
  return n;
}

}  // namespace

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  check_finite(values_);
}

Embedding::Embedding(std::initializer_list<double> values) : values_(values) {
  check_finite(values_);
}

double Embedding::norm() const { return std::sqrt(dot(values_, values_)); }

bool Embedding::is_unit(double tol) const { return std::abs(norm() - 1.0) <= tol; }

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::size_t ProbVector::argmax() const {
  // First maximum wins, so ties resolve to the lowest index.
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<double> vec_mat(std::span<const double> x, const Matrix& m) {
  if (x.size() != m.rows) {
    throw Error(ErrorCode::DimMismatch, "vector length " + std::to_string(x.size()) +
                                            " vs matrix rows " + std::to_string(m.rows));
  }
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += xr * row[c];
  }
  return out;
}

void require_same_dim(std::span<const Embedding> items, std::size_t dim, const char* what) {
  for (const auto& e : items) {
    if (e.dim() != dim) {
      throw Error(ErrorCode::DimMismatch, std::string(what) + ": expected dim " +
                                              std::to_string(dim) + ", got " +
                                              std::to_string(e.dim()));
    }
  }
}

Embedding l2_normalize(const Embedding& e) {
  const double n = checked_norm(e, "embedding");
  std::vector<double> out(e.values().begin(), e.values().end());
  for (double& x : out) x /= n;
  return Embedding(std::move(out));
}

Embedding mean_of(std::span<const Embedding> items) {
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "mean of empty embedding list");
  const std::size_t d = items.front().dim();
  require_same_dim(items, d, "mean_of");
  std::vector<double> acc(d, 0.0);
  for (const auto& e : items) {
    for (std::size_t i = 0; i < d; ++i) acc[i] += e[i];
  }
  const double inv = 1.0 / static_cast<double>(items.size());
  for (double& x : acc) x *= inv;
  return Embedding(std::move(acc));
}

double cosine_sim(const Embedding& v, const Embedding& t) {
  if (v.dim() != t.dim()) {
    throw Error(ErrorCode::DimMismatch,
                "cosine_sim dims " + std::to_string(v.dim()) + " vs " + std::to_string(t.dim()));
  }
  const double nv = checked_norm(v, "left operand");
  const double nt = checked_norm(t, "right operand");
  return dot(v.values(), t.values()) / (nv * nt);
}

SimMatrix pairwise_sim(std::span<const Embedding> left, std::span<const Embedding> right,
                       Exec exec) {
  if (left.empty() || right.empty()) throw Error(ErrorCode::EmptyInput, "pairwise_sim");
  const std::size_t d = left.front().dim();
  require_same_dim(left, d, "pairwise_sim left");
  require_same_dim(right, d, "pairwise_sim right");

  std::vector<double> left_norm(left.size());
  std::vector<double> right_norm(right.size());
  for (std::size_t i = 0; i < left.size(); ++i) left_norm[i] = checked_norm(left[i], "left row");
  for (std::size_t j = 0; j < right.size(); ++j) right_norm[j] = checked_norm(right[j], "right row");

  SimMatrix out(left.size(), right.size());
  const auto rows = static_cast<std::ptrdiff_t>(left.size());
  const std::size_t cols = right.size();
  auto fill_row = [&](std::ptrdiff_t i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < cols; ++j) {
      out(ui, j) = dot(left[ui].values(), right[j].values()) / (left_norm[ui] * right_norm[j]);
    }
  };

  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) fill_row(i);
  } else {
    for (std::ptrdiff_t i = 0; i < rows; ++i) fill_row(i);
  }
  return out;
}

ProbVector stable_softmax(std::span<const double> scores, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidTau, "temperature must be positive, got " + std::to_string(tau));
  }
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "softmax of empty score vector");
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, "softmax score is not finite");
  }

  const double max_score = *std::max_element(scores.begin(), scores.end());
  ProbVector out{std::vector<double>(scores.size())};
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.probs[i] = std::exp((scores[i] - max_score) / tau);
    total += out.probs[i];
  }
  for (double& p : out.probs) p /= total;
  return out;
}

}  // namespace vlscene
