#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dpre/env.hpp"
#include "dpre/lattice.hpp"
#include "dpre/walk.hpp"

namespace dpre::partition {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// H_n(S) = sum_{i=1}^n eta(i, S_i).
double hamiltonian(const env::EnvironmentField& field, const walk::WalkPath& path);

// log W_{n,y}: point-to-site weights normalized by exp(n lambda(beta)).
// Unreachable sites hold -inf.
struct LogWeightField {
  int n = 0;
  LatticePoint start;
  Box box;
  std::vector<double> log_w;
  double log_total = 0.0;

  double at(const LatticePoint& y) const {
    return box.contains(y) ? log_w[box.offset(y)] : kNegInf;
  }

  // Debug slice format: "DPRELWF\0", u32 version, i32 d, i32 n, box lo/hi
  // (3 x i32 each), f64 log_total, then box.count() f64 values.
  void dump(const std::string& path) const;
  static LogWeightField load(const std::string& path);

  static constexpr unsigned kFormatVersion = 1;
};

struct PartitionResult {
  double log_w = 0.0;
  LogWeightField weights;
};

// W_n = P_S[exp(beta H_n - n lambda(beta))] by forward transfer matrix.
PartitionResult log_partition(const env::EnvironmentField& field, double beta, int n,
                              const LatticePoint& start);

// log W_1, ..., log W_n from a single sweep (index 0 holds log W_0 = 0).
std::vector<double> log_partition_profile(const env::EnvironmentField& field, double beta, int n,
                                          const LatticePoint& start);

// mu_n(y) = W_{n,y} / W_n over weights.box (row-major).
std::vector<double> gibbs_measure(const LogWeightField& weights);

inline LatticePoint box_of(const BoxSpec& spec, const LatticePoint& x) { return spec.block_of(x); }
inline Box box_range(const BoxSpec& spec, const LatticePoint& z) { return spec.range(z); }

// Z = (z_1, ..., z_n) block indices visited at times N, 2N, ..., nN.
struct BlockPath {
  std::vector<LatticePoint> blocks;

  BlockPath() = default;
  explicit BlockPath(std::vector<LatticePoint> b);
  int size() const { return static_cast<int>(blocks.size()); }
};

// Necessary condition: each block lies within N l1-steps of the previous
// one (of the start point for z_1).
bool is_feasible(const BoxSpec& spec, const LatticePoint& start, const BlockPath& z);

// All block paths of length n_blocks passing is_feasible, in lexicographic
// order.
std::vector<BlockPath> enumerate_block_paths(const BoxSpec& spec, const LatticePoint& start,
                                             int n_blocks);

struct CoarseResult {
  double log_w = kNegInf;
  bool feasible = false;
};

// log of W-hat_Z: the transfer matrix with the walk forced into B_{z_j} at
// time jN. Infeasible Z gives -inf with feasible = false.
CoarseResult coarse_partition(const env::EnvironmentField& field, double beta, const BoxSpec& spec,
                              const BlockPath& z, const LatticePoint& start);

}  // namespace dpre::partition
