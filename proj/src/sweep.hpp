#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

#include "dpre/lattice.hpp"

namespace dpre::detail {

// Dense storage over a box with one extra layer on each side, so a
// neighbour gather from any site of the box stays in bounds.
class Frame {
 public:
  Frame(const Box& box) : inner_(box), outer_(box.expanded(1)) {
    std::ptrdiff_t s = 1;
    for (int k = outer_.d - 1; k >= 0; --k) {
      stride_[k] = s;
      s *= outer_.extent(k);
    }
    size_ = static_cast<std::size_t>(s);
  }

  int dim() const { return outer_.d; }
  std::size_t size() const { return size_; }
  const Box& inner() const { return inner_; }
  std::ptrdiff_t stride(int k) const { return stride_[k]; }
  std::ptrdiff_t index(const LatticePoint& p) const {
    std::ptrdiff_t off = 0;
    for (int k = 0; k < outer_.d; ++k) off += (p.x[k] - outer_.lo[k]) * stride_[k];
    return off;
  }

 private:
  Box inner_;
  Box outer_;
  std::array<std::ptrdiff_t, kMaxDim> stride_{};
  std::size_t size_ = 0;
};

// Sites y with sum_k dist(y_k, [core.lo_k, core.hi_k]) <= radius, each
// coordinate distance <= cap, and (optionally) sum_k y_k == parity mod 2.
struct Region {
  Box core;
  int radius = 0;
  int cap = 0;
  bool parity_filter = false;
  int parity = 0;
};

inline int mod2(int v) { return v & 1; }

// fn(row_start, count, step) for every row (last coordinate fastest).
template <class Fn>
void for_each_row(const Region& r, Fn&& fn) {
  const int d = r.core.d;
  LatticePoint p(d);
  auto last = [&](int used, int partial_sum) {
    const int t = std::min(r.cap, r.radius - used);
    int lo = r.core.lo[d - 1] - t;
    const int hi = r.core.hi[d - 1] + t;
    int step = 1;
    if (r.parity_filter) {
      if (mod2(partial_sum + lo) != r.parity) ++lo;
      step = 2;
    }
    if (lo > hi) return;
    p.x[d - 1] = lo;
    fn(p, (hi - lo) / step + 1, step);
  };
  auto dist = [&](int k, int v) {
    if (v < r.core.lo[k]) return r.core.lo[k] - v;
    if (v > r.core.hi[k]) return v - r.core.hi[k];
    return 0;
  };
  if (d == 1) {
    last(0, 0);
    return;
  }
  const int t0 = std::min(r.cap, r.radius);
  for (int a = r.core.lo[0] - t0; a <= r.core.hi[0] + t0; ++a) {
    const int u0 = dist(0, a);
    p.x[0] = a;
    if (d == 2) {
      last(u0, a);
      continue;
    }
    const int t1 = std::min(r.cap, r.radius - u0);
    for (int b = r.core.lo[1] - t1; b <= r.core.hi[1] + t1; ++b) {
      p.x[1] = b;
      last(u0 + dist(1, b), a + b);
    }
  }
}

// Sum of the 2d nearest neighbours of flat index i.
template <int D>
inline double neighbour_sum(const double* a, std::ptrdiff_t i, const std::array<std::ptrdiff_t, kMaxDim>& s) {
  double g = a[i - s[0]] + a[i + s[0]];
  if constexpr (D >= 2) g += a[i - s[1]] + a[i + s[1]];
  if constexpr (D >= 3) g += a[i - s[2]] + a[i + s[2]];
  return g;
}

inline std::array<std::ptrdiff_t, kMaxDim> strides_of(const Frame& f) {
  std::array<std::ptrdiff_t, kMaxDim> s{};
  for (int k = 0; k < f.dim(); ++k) s[k] = f.stride(k);
  return s;
}

}  // namespace dpre::detail
