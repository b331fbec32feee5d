// Pose partitions for the multidirectional solver: N contiguous subsets,
// the first N-1 of equal size and the last holding the remaining poses.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mcgba/types.hpp"

namespace mcgba {

struct Partition {
  int num_subsets = 0;
  std::vector<int> subset_of;     // pose index -> subset index
  std::vector<int> subset_sizes;  // l_1 .. l_N

  int num_poses() const { return static_cast<int>(subset_of.size()); }
};

// Contiguous pose-index ranges; the first N-1 subsets get
// floor(num_poses / (N-1)) poses each and the last subset the remainder.
// When the division is exact the last of the equal subsets cedes one pose so
// that subset N is never empty. N = 1 yields the single full subset.
inline Partition make_partition(int num_poses, int num_subsets) {
  if (num_poses < 1) throw std::invalid_argument("need at least one pose");
  if (num_subsets < 1 || num_subsets > num_poses)
    throw std::invalid_argument("number of subsets must be in [1, " +
                                std::to_string(num_poses) + "], got " +
                                std::to_string(num_subsets));
  Partition p;
  p.num_subsets = num_subsets;
  if (num_subsets == 1) {
    p.subset_sizes = {num_poses};
  } else {
    const int base = num_poses / (num_subsets - 1);
    int remainder = num_poses - base * (num_subsets - 1);
    p.subset_sizes.assign(num_subsets, base);
    if (remainder == 0) {
      p.subset_sizes[num_subsets - 2] = base - 1;
      remainder = 1;
    }
    p.subset_sizes[num_subsets - 1] = remainder;
  }
  p.subset_of.resize(num_poses);
  int pose = 0;
  for (int s = 0; s < num_subsets; ++s)
    for (int k = 0; k < p.subset_sizes[s]; ++k) p.subset_of[pose++] = s;
  return p;
}

// Spreads the preconditioned residual D(S)^-1 r into an n x N matrix whose
// column p holds the block rows of subset p. The columns have disjoint
// support and sum to the input exactly.
inline MatX expand_residual(const VecX& preconditioned_residual,
                            const Partition& partition) {
  const int n_p = partition.num_poses();
  if (preconditioned_residual.size() != kPoseDim * n_p)
    throw std::invalid_argument("residual length does not match partition");
  MatX z = MatX::Zero(preconditioned_residual.size(), partition.num_subsets);
  for (int pose = 0; pose < n_p; ++pose)
    z.block<kPoseDim, 1>(kPoseDim * pose, partition.subset_of[pose]) =
        preconditioned_residual.segment<kPoseDim>(kPoseDim * pose);
  return z;
}

}  // namespace mcgba
