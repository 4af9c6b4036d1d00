#include "dpre/lattice.hpp"

#include <cmath>

namespace dpre {

std::string LatticePoint::str() const {
  std::string s = "(";
  for (int k = 0; k < d; ++k) {
    if (k) s += ",";
    s += std::to_string(x[k]);
  }
  return s + ")";
}

std::string Box::str() const {
  std::string s;
  for (int k = 0; k < d; ++k) {
    if (k) s += "x";
    s += "[" + std::to_string(lo[k]) + "," + std::to_string(hi[k]) + "]";
  }
  return s;
}

BoxSpec::BoxSpec(int N, int d) : N_(N), d_(d) {
  if (N < 1) throw PreconditionError("block length N must be >= 1");
  if (d < 1 || d > kMaxDim) throw PreconditionError("lattice dimension must be 1, 2 or 3");
  int m = static_cast<int>(std::sqrt(static_cast<double>(N)));
  while (m * m > N) --m;
  while ((m + 1) * (m + 1) <= N) ++m;
  m_ = m;
}

Box BoxSpec::range(const LatticePoint& z) const {
  if (z.d != d_) throw PreconditionError("block index dimension differs from the BoxSpec");
  Box b;
  b.d = d_;
  for (int k = 0; k < d_; ++k) {
    b.lo[k] = (2 * z.x[k] - 1) * m_ + z.x[k];
    b.hi[k] = (2 * z.x[k] + 1) * m_ + z.x[k];
  }
  return b;
}

LatticePoint BoxSpec::block_of(const LatticePoint& x) const {
  if (x.d != d_) throw PreconditionError("point dimension differs from the BoxSpec");
  LatticePoint z(d_);
  const int w = width();
  for (int k = 0; k < d_; ++k) {
    const int v = x.x[k] + m_;
    z.x[k] = v >= 0 ? v / w : -((-v + w - 1) / w);
  }
  return z;
}

}  // namespace dpre
