#include "urbanfuse/matrix.hpp"

#include <algorithm>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::shape, "matrix data size " + std::to_string(data_.size()) +
                                      " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw Error(ErrorCode::shape, "row index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix hconcat(std::span<const Matrix* const> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  for (const Matrix* m : parts) {
    if (m->rows() != rows) throw Error(ErrorCode::shape, "hconcat row count mismatch");
    cols += m->cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r).begin();
    for (const Matrix* m : parts) {
      auto src = m->row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

}  // namespace urbanfuse
