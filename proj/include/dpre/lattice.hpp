#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <string>

#include "dpre/error.hpp"

namespace dpre {

inline constexpr int kMaxDim = 3;

// A point of Z^d, d in {1, 2, 3}. Unused trailing coordinates stay zero.
struct LatticePoint {
  int d = 2;
  std::array<int, kMaxDim> x{};

  LatticePoint() = default;
  explicit LatticePoint(int dim) : d(dim) {
    if (dim < 1 || dim > kMaxDim) throw PreconditionError("lattice dimension must be 1, 2 or 3");
  }
  LatticePoint(std::initializer_list<int> coords) : d(static_cast<int>(coords.size())) {
    if (d < 1 || d > kMaxDim) throw PreconditionError("lattice dimension must be 1, 2 or 3");
    int k = 0;
    for (int c : coords) x[k++] = c;
  }

  static LatticePoint origin(int dim) { return LatticePoint(dim); }

  int operator[](int k) const { return x[k]; }
  int& operator[](int k) { return x[k]; }

  friend bool operator==(const LatticePoint& a, const LatticePoint& b) {
    return a.d == b.d && a.x == b.x;
  }
  friend LatticePoint operator+(LatticePoint a, const LatticePoint& b) {
    for (int k = 0; k < a.d; ++k) a.x[k] += b.x[k];
    return a;
  }
  friend LatticePoint operator-(LatticePoint a, const LatticePoint& b) {
    for (int k = 0; k < a.d; ++k) a.x[k] -= b.x[k];
    return a;
  }

  std::string str() const;
};

// l1 norm.
inline int l1_norm(const LatticePoint& p) {
  int s = 0;
  for (int k = 0; k < p.d; ++k) s += std::abs(p.x[k]);
  return s;
}

inline int l1_distance(const LatticePoint& a, const LatticePoint& b) { return l1_norm(a - b); }

inline int coord_sum(const LatticePoint& p) {
  int s = 0;
  for (int k = 0; k < p.d; ++k) s += p.x[k];
  return s;
}

// Closed axis-aligned integer box.
struct Box {
  int d = 2;
  std::array<int, kMaxDim> lo{};
  std::array<int, kMaxDim> hi{};

  static Box around(const LatticePoint& c, int radius) {
    Box b;
    b.d = c.d;
    for (int k = 0; k < c.d; ++k) {
      b.lo[k] = c.x[k] - radius;
      b.hi[k] = c.x[k] + radius;
    }
    return b;
  }

  bool contains(const LatticePoint& p) const {
    if (p.d != d) return false;
    for (int k = 0; k < d; ++k)
      if (p.x[k] < lo[k] || p.x[k] > hi[k]) return false;
    return true;
  }
  bool contains(const Box& o) const {
    if (o.d != d) return false;
    for (int k = 0; k < d; ++k)
      if (o.lo[k] < lo[k] || o.hi[k] > hi[k]) return false;
    return true;
  }
  int extent(int k) const { return hi[k] - lo[k] + 1; }
  std::size_t count() const {
    std::size_t n = 1;
    for (int k = 0; k < d; ++k) n *= static_cast<std::size_t>(extent(k));
    return n;
  }
  Box expanded(int r) const {
    Box b = *this;
    for (int k = 0; k < d; ++k) {
      b.lo[k] -= r;
      b.hi[k] += r;
    }
    return b;
  }
  LatticePoint lower() const {
    LatticePoint p(d);
    for (int k = 0; k < d; ++k) p.x[k] = lo[k];
    return p;
  }
  // Row-major position (last coordinate fastest).
  std::size_t offset(const LatticePoint& p) const {
    std::size_t off = 0;
    for (int k = 0; k < d; ++k) off = off * static_cast<std::size_t>(extent(k)) + (p.x[k] - lo[k]);
    return off;
  }
  LatticePoint point(std::size_t off) const {
    LatticePoint p(d);
    for (int k = d - 1; k >= 0; --k) {
      const auto e = static_cast<std::size_t>(extent(k));
      p.x[k] = lo[k] + static_cast<int>(off % e);
      off /= e;
    }
    return p;
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    const std::size_t n = count();
    for (std::size_t i = 0; i < n; ++i) fn(point(i));
  }

  std::string str() const;
};

// l1 distance between two boxes (0 when they intersect).
inline int l1_distance(const Box& a, const Box& b) {
  int s = 0;
  for (int k = 0; k < a.d; ++k) {
    if (b.lo[k] > a.hi[k]) s += b.lo[k] - a.hi[k];
    else if (a.lo[k] > b.hi[k]) s += a.lo[k] - b.hi[k];
  }
  return s;
}

// Coarse-graining blocks of side 2*floor(sqrt(N))+1:
//   B_z = prod_k [(2 z_k - 1) m + z_k, (2 z_k + 1) m + z_k],  m = floor(sqrt(N)).
// Consecutive blocks are adjacent and together they tile Z^d.
class BoxSpec {
 public:
  BoxSpec(int N, int d = 2);

  int N() const { return N_; }
  int m() const { return m_; }
  int d() const { return d_; }
  int width() const { return 2 * m_ + 1; }

  Box range(const LatticePoint& z) const;
  LatticePoint block_of(const LatticePoint& x) const;

 private:
  int N_;
  int m_;
  int d_;
};

}  // namespace dpre
