#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dpre/lattice.hpp"

namespace dpre::walk {

// S_0, ..., S_n of a nearest-neighbour path.
class WalkPath {
 public:
  WalkPath() = default;
  explicit WalkPath(std::vector<LatticePoint> positions);

  int length() const { return static_cast<int>(positions_.size()) - 1; }
  int dim() const { return positions_.front().d; }
  const LatticePoint& operator[](int i) const { return positions_[static_cast<std::size_t>(i)]; }
  const LatticePoint& start() const { return positions_.front(); }
  const LatticePoint& end() const { return positions_.back(); }
  const std::vector<LatticePoint>& positions() const { return positions_; }

 private:
  std::vector<LatticePoint> positions_;
};

struct KernelOptions {
  // Memory cap for the stored table.
  std::size_t max_bytes = std::size_t{1} << 30;
  // When set, slices are cut at l-infinity radius ceil(c * sqrt(n log n)).
  bool truncate = false;
  double truncation_c = 6.0;
};

// p_j(0, y) for 1 <= j <= n. Entries are stored for the nonnegative orthant
// only; sign-flip symmetry recovers the rest.
class KernelTable {
 public:
  KernelTable() = default;

  int dim() const { return d_; }
  int horizon() const { return n_; }
  int radius(int j) const { return radius_[static_cast<std::size_t>(j)]; }

  // p_j(0, delta); exact zero outside the support.
  double prob(int j, const LatticePoint& delta) const;
  // p_j(x, y) by translation invariance.
  double prob(int j, const LatticePoint& x, const LatticePoint& y) const { return prob(j, y - x); }

  // Mass lost to truncation at time j (0 for an untruncated table).
  double truncated_mass(int j) const { return lost_[static_cast<std::size_t>(j)]; }
  double slice_sum(int j) const;

  std::size_t bytes() const;

  void save(const std::string& path) const;
  static KernelTable load(const std::string& path);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  friend KernelTable build_kernel(int d, int n, const KernelOptions& opts);

  std::size_t slice_index(int j, const LatticePoint& a) const;

  int d_ = 0;
  int n_ = 0;
  std::vector<int> radius_;
  std::vector<std::vector<double>> slices_;
  std::vector<double> lost_;
};

KernelTable build_kernel(int d, int n, const KernelOptions& opts = {});

// Uses $DPRE_KERNEL_CACHE/kernel_d<d>_n<n>_v<version>.bin when the variable
// is set, building and storing the table on a miss.
KernelTable build_kernel_cached(int d, int n, const KernelOptions& opts = {});

// r_i = P(S_{2i} = 0).
double return_probability(int d, long i);

// r_0, ..., r_imax with r_0 = 1.
std::vector<double> return_probabilities(int d, int imax);

WalkPath sample_path(int d, int n, std::uint64_t seed);
WalkPath sample_path(const LatticePoint& start, int n, std::uint64_t seed);

// #{1 <= i <= n : a_i = b_i}.
long overlap_count(const WalkPath& a, const WalkPath& b);

// P^x(S_N in B_z^N), summed exactly over the block.
double box_hit_prob(const KernelTable& kernel, const LatticePoint& x, const BoxSpec& spec,
                    const LatticePoint& z);

}  // namespace dpre::walk
