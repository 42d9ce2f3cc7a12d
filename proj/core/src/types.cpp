#include "w2s/types.hpp"

#include <cmath>
#include <string>

#include "w2s/error.hpp"

namespace w2s {

Temperature::Temperature(double value) : value_(value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError("temperature must be finite and > 0, got " +
                      std::to_string(value));
  }
}

EmbeddingMatrix::EmbeddingMatrix(Matrix data) : data_(std::move(data)) {
  if (data_.rows() == 0 || data_.cols() == 0) {
    throw DomainError("embedding matrix must have n >= 1 and d >= 1");
  }
  for (std::size_t i = 0; i < data_.rows(); ++i) {
    for (double v : data_.row(i)) {
      if (!std::isfinite(v)) {
        throw DomainError("non-finite embedding entry in row " + std::to_string(i), i);
      }
    }
  }
}

EmbeddingMatrix EmbeddingMatrix::gather(std::span<const std::size_t> indices) const {
  return EmbeddingMatrix(data_.gather_rows(indices));
}

PrototypeMatrix::PrototypeMatrix(Matrix data) : data_(std::move(data)) {
  validate(data_);
}

void PrototypeMatrix::assign(Matrix data) {
  if (data.rows() != data_.rows() || data.cols() != data_.cols()) {
    throw ShapeError("prototype reassignment changes shape");
  }
  validate(data);
  data_ = std::move(data);
}

void PrototypeMatrix::validate(const Matrix& data) {
  if (data.rows() < 2) {
    throw DomainError("prototype matrix needs k >= 2 classes, got " +
                      std::to_string(data.rows()));
  }
  if (data.cols() == 0) throw DomainError("prototype matrix needs d >= 1");
  for (std::size_t j = 0; j < data.rows(); ++j) {
    const double n = norm(data.row(j));
    if (!std::isfinite(n)) {
      throw DomainError("non-finite prototype row " + std::to_string(j), j);
    }
    if (!(n > 0.0)) {
      throw DomainError("zero-norm prototype row " + std::to_string(j), j);
    }
  }
}

LinearProbe::LinearProbe(Matrix w, std::vector<double> b)
    : weights(std::move(w)), bias(std::move(b)) {
  if (bias.size() != weights.rows()) {
    throw ShapeError("probe bias has " + std::to_string(bias.size()) +
                     " entries for " + std::to_string(weights.rows()) + " classes");
  }
  if (!weights.all_finite()) throw DomainError("non-finite probe weight");
  for (double v : bias) {
    if (!std::isfinite(v)) throw DomainError("non-finite probe bias");
  }
}

LinearProbe LinearProbe::zeros(std::size_t classes, std::size_t dim) {
  return LinearProbe(Matrix(classes, dim), std::vector<double>(classes, 0.0));
}

}  // namespace w2s
