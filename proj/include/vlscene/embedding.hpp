#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vlscene/error.hpp"

namespace vlscene {

// Selects between the OpenMP kernels and the serial reference loops. Both
// produce bit-identical results: every output entry is computed by the same
// fixed-order inner loop regardless of how rows are distributed.
enum class Exec { Serial, Parallel };

// A real vector of dimension d with finite entries. Zero vectors are
// representable (they are what l2_normalize rejects).
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values);
  Embedding(std::initializer_list<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const;
  bool is_unit(double tol = 1e-6) const;

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using SimMatrix = Matrix;

// Probability vector: nonnegative entries summing to one within 1e-6.
struct ProbVector {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  std::size_t argmax() const;
};

inline constexpr double kZeroNormEps = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);

// Row vector times matrix: out[c] = sum_r x[r] * m(r, c).
std::vector<double> vec_mat(std::span<const double> x, const Matrix& m);

Embedding l2_normalize(const Embedding& e);
Embedding mean_of(std::span<const Embedding> items);

double cosine_sim(const Embedding& v, const Embedding& t);

SimMatrix pairwise_sim(std::span<const Embedding> left, std::span<const Embedding> right,
                       Exec exec = Exec::Parallel);

ProbVector stable_softmax(std::span<const double> scores, double tau);

void require_same_dim(std::span<const Embedding> items, std::size_t dim, const char* what);

}  // namespace vlscene
