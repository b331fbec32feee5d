// Block-sparse symmetric storage for the reduced camera system S and the
// block-Jacobi preconditioner D(S)^-1.
//
// Both triangles are stored explicitly in block-row compressed form with
// columns sorted per row, which fixes the floating-point accumulation order
// of all products.
#pragma once

#include <map>
#include <utility>
#include <vector>

#include "mcgba/parallel.hpp"
#include "mcgba/partition.hpp"
#include "mcgba/types.hpp"

namespace mcgba {

class SchurMatrix {
 public:
  SchurMatrix() = default;

  // Builds from per-row upper-triangle blocks (col >= row); the lower
  // triangle is mirrored so that S_{jm} = S_{mj}^T holds exactly.
  static SchurMatrix from_upper_rows(
      std::vector<std::map<int, Mat9>> upper_rows) {
    const int n = static_cast<int>(upper_rows.size());
    std::vector<std::map<int, const Mat9*>> pattern(n);
    for (int m = 0; m < n; ++m)
      for (const auto& [j, block] : upper_rows[m]) {
        pattern[m].emplace(j, &block);
        if (j != m) pattern[j].emplace(m, nullptr);  // transpose slot
      }
    SchurMatrix s;
    s.num_blocks_ = n;
    s.row_ptr_.assign(n + 1, 0);
    for (int m = 0; m < n; ++m)
      s.row_ptr_[m + 1] = s.row_ptr_[m] + static_cast<int>(pattern[m].size());
    s.col_idx_.resize(s.row_ptr_[n]);
    s.blocks_.resize(s.row_ptr_[n]);
    for (int m = 0; m < n; ++m) {
      int at = s.row_ptr_[m];
      for (const auto& [j, block] : pattern[m]) {
        s.col_idx_[at] = j;
        s.blocks_[at] = block ? *block : upper_rows[j].at(m).transpose();
        ++at;
      }
    }
    return s;
  }

  int num_blocks() const { return num_blocks_; }
  int dim() const { return kPoseDim * num_blocks_; }

  int row_begin(int m) const { return row_ptr_[m]; }
  int row_end(int m) const { return row_ptr_[m + 1]; }
  int col(int idx) const { return col_idx_[idx]; }
  const Mat9& block_at(int idx) const { return blocks_[idx]; }

  const Mat9* find_block(int m, int j) const {
    for (int idx = row_ptr_[m]; idx < row_ptr_[m + 1]; ++idx)
      if (col_idx_[idx] == j) return &blocks_[idx];
    return nullptr;
  }

  const Mat9& diagonal_block(int m) const {
    const Mat9* b = find_block(m, m);
    if (!b) throw NumericalFailure("missing diagonal block");
    return *b;
  }

  // y = S v, block row by block row.
  VecX multiply(const VecX& v, int num_threads = 1) const {
    VecX y = VecX::Zero(dim());
    parallel_for_range(num_blocks_, num_threads,
                       [&](std::int64_t begin, std::int64_t end) {
                         for (std::int64_t m = begin; m < end; ++m) {
                           Vec9 acc = Vec9::Zero();
                           for (int idx = row_ptr_[m]; idx < row_ptr_[m + 1];
                                ++idx)
                             acc += blocks_[idx] *
                                    v.segment<kPoseDim>(kPoseDim *
                                                        col_idx_[idx]);
                           y.segment<kPoseDim>(kPoseDim * m) = acc;
                         }
                       });
    return y;
  }

  // S * Z for a tall matrix whose column p is nonzero only on the block rows
  // of subset p. Each stored block touches exactly one column of Z, so the
  // cost is proportional to the number of nonzero blocks, like multiply().
  MatX multiply_structured(const MatX& z, const Partition& partition,
                           int num_threads = 1) const {
    MatX y = MatX::Zero(dim(), z.cols());
    parallel_for_range(
        num_blocks_, num_threads, [&](std::int64_t begin, std::int64_t end) {
          for (std::int64_t m = begin; m < end; ++m) {
            for (int idx = row_ptr_[m]; idx < row_ptr_[m + 1]; ++idx) {
              const int j = col_idx_[idx];
              const int p = partition.subset_of[j];
              y.block<kPoseDim, 1>(kPoseDim * m, p) +=
                  blocks_[idx] * z.block<kPoseDim, 1>(kPoseDim * j, p);
            }
          }
        });
    return y;
  }

  // Fraction of present blocks (diagonal included) out of num_blocks^2.
  double density() const {
    return static_cast<double>(blocks_.size()) /
           (static_cast<double>(num_blocks_) * num_blocks_);
  }

  MatX to_dense() const {
    MatX d = MatX::Zero(dim(), dim());
    for (int m = 0; m < num_blocks_; ++m)
      for (int idx = row_ptr_[m]; idx < row_ptr_[m + 1]; ++idx)
        d.block<kPoseDim, kPoseDim>(kPoseDim * m, kPoseDim * col_idx_[idx]) =
            blocks_[idx];
    return d;
  }

 private:
  int num_blocks_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<Mat9> blocks_;
};

// Inverted diagonal blocks of S; applying it is num_blocks independent 9x9
// solves.
class BlockJacobiPreconditioner {
 public:
  BlockJacobiPreconditioner() = default;

  explicit BlockJacobiPreconditioner(std::vector<Mat9> inverse_blocks)
      : inv_blocks_(std::move(inverse_blocks)) {}

  int num_blocks() const { return static_cast<int>(inv_blocks_.size()); }
  const Mat9& inverse_block(int m) const { return inv_blocks_[m]; }

  VecX apply(const VecX& r, int num_threads = 1) const {
    VecX z(r.size());
    parallel_for_range(num_blocks(), num_threads,
                       [&](std::int64_t begin, std::int64_t end) {
                         for (std::int64_t m = begin; m < end; ++m)
                           z.segment<kPoseDim>(kPoseDim * m) =
                               inv_blocks_[m] *
                               r.segment<kPoseDim>(kPoseDim * m);
                       });
    return z;
  }

 private:
  std::vector<Mat9> inv_blocks_;
};

// Inverts the diagonal blocks of S. Throws NumericalFailure when a block is
// not SPD (broken damping).
inline BlockJacobiPreconditioner block_jacobi(const SchurMatrix& s) {
  std::vector<Mat9> inv(s.num_blocks());
  for (int m = 0; m < s.num_blocks(); ++m) {
    const Eigen::LLT<Mat9> llt(s.diagonal_block(m));
    if (llt.info() != Eigen::Success)
      throw NumericalFailure("diagonal block " + std::to_string(m) +
                             " of S is not positive definite");
    inv[m] = llt.solve(Mat9::Identity());
  }
  return BlockJacobiPreconditioner(std::move(inv));
}

}  // namespace mcgba
