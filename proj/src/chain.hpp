#pragma once

#include <vector>

namespace dpre::detail {

// sum over 1 <= j_1 < ... < j_q <= N of first(j_1) prod_i gate(j_i, j_{i+1}) / (j_{i+1} - j_i),
// as the chain a_1(j) = first(j), a_k(j) = sum_{j'<j} a_{k-1}(j') / (j - j') [gate].
// Both dnq and the L statistic run through this loop, so a gate that always
// passes reproduces dnq bit for bit and any gate gives a value <= it.
template <class First, class Gate>
double gated_chain(int N, int q, First&& first, Gate&& gate) {
  std::vector<double> inv(static_cast<std::size_t>(N) + 1, 0.0);
  for (int g = 1; g <= N; ++g) inv[static_cast<std::size_t>(g)] = 1.0 / g;
  std::vector<double> prev(static_cast<std::size_t>(N) + 1, 0.0), cur(static_cast<std::size_t>(N) + 1, 0.0);
  for (int j = 1; j <= N; ++j) prev[static_cast<std::size_t>(j)] = first(j) ? 1.0 : 0.0;
  for (int k = 2; k <= q; ++k) {
    for (int j = 0; j <= N; ++j) {
      double s = 0.0;
      for (int jp = 1; jp < j; ++jp)
        if (gate(jp, j)) s += prev[static_cast<std::size_t>(jp)] * inv[static_cast<std::size_t>(j - jp)];
      cur[static_cast<std::size_t>(j)] = s;
    }
    prev.swap(cur);
  }
  double total = 0.0;
  for (int j = 1; j <= N; ++j) total += prev[static_cast<std::size_t>(j)];
  return total;
}

}  // namespace dpre::detail
