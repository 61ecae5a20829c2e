#pragma once

#include <cstddef>
#include <vector>

namespace neuracodec {

// Square matrix of non-negative finite costs; entry (i, j) is the cost of
// assigning row i to column j.
class CostMatrix {
 public:
  explicit CostMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  CostMatrix(std::size_t n, std::vector<double> data);

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double cost = 0.0;
};

// Exact minimum-cost perfect matching (Kuhn-Munkres with potentials). Among
// optimal matchings the lexicographically smallest column_of_row is returned.
// Throws DataError on non-finite or negative entries.
Assignment hungarian_assign(const CostMatrix& cost);

}  // namespace neuracodec
