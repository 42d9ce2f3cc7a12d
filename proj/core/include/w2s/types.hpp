#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "w2s/matrix.hpp"

namespace w2s {

/// Softmax temperature; always strictly positive.
class Temperature {
 public:
  static constexpr double kDefault = 2.0;

  constexpr Temperature() = default;
  explicit Temperature(double value);

  constexpr double value() const noexcept { return value_; }

 private:
  double value_ = kDefault;
};

/// Frozen feature vectors, one row per sample. Entries finite, n >= 1, d >= 1.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(Matrix data);

  const Matrix& matrix() const noexcept { return data_; }
  std::size_t samples() const noexcept { return data_.rows(); }
  std::size_t dim() const noexcept { return data_.cols(); }
  std::span<const double> row(std::size_t i) const { return data_.row(i); }

  EmbeddingMatrix gather(std::span<const std::size_t> indices) const;

 private:
  Matrix data_;
};

/// Learnable class prototypes, one row per class. k >= 2 and every row has
/// strictly positive norm.
class PrototypeMatrix {
 public:
  explicit PrototypeMatrix(Matrix data);

  const Matrix& matrix() const noexcept { return data_; }
  std::size_t classes() const noexcept { return data_.rows(); }
  std::size_t dim() const noexcept { return data_.cols(); }
  std::span<const double> row(std::size_t j) const { return data_.row(j); }

  /// Replaces the parameters, re-checking the invariants.
  void assign(Matrix data);

  friend bool operator==(const PrototypeMatrix&, const PrototypeMatrix&) = default;

 private:
  static void validate(const Matrix& data);

  Matrix data_;
};

enum class LogitSource { kWeak, kStrong };

struct LogitMatrix {
  Matrix data;
  LogitSource source = LogitSource::kWeak;

  std::size_t samples() const noexcept { return data.rows(); }
  std::size_t classes() const noexcept { return data.cols(); }
};

struct ProbMatrix {
  Matrix data;
  Temperature temperature;
};

/// Affine classifier: logits = weights * r + bias.
struct LinearProbe {
  Matrix weights;            // k x d
  std::vector<double> bias;  // k

  LinearProbe() = default;
  LinearProbe(Matrix w, std::vector<double> b);

  /// Zero weights and bias.
  static LinearProbe zeros(std::size_t classes, std::size_t dim);

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }

  friend bool operator==(const LinearProbe&, const LinearProbe&) = default;
};

}  // namespace w2s
