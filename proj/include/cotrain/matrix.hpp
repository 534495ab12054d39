#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cotrain {

// Dense row-major matrix of doubles. Used for feature views, probability
// tables and model weights alike.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

enum class MatrixFormat { csv, bin_f32 };

// Throws std::runtime_error naming the offending (row, col) on malformed
// input, dimension mismatch or non-finite entries.
Matrix load_view_matrix(const std::string& path, MatrixFormat format);
void save_view_matrix(const Matrix& matrix, const std::string& path, MatrixFormat format);

// Finiteness + non-empty shape check shared by the loaders.
void validate_view_matrix(const Matrix& matrix, const std::string& context);

}  // namespace cotrain
