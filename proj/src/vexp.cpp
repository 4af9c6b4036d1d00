#include "vexp.hpp"

#include <algorithm>
#include <cmath>

#include "dpre/rng.hpp"

namespace dpre::detail {
namespace {

constexpr int kBlock = 16;

__attribute__((noinline)) void gaussian_block(const std::uint64_t* __restrict h, double* __restrict out) {
  for (int k = 0; k < kBlock; ++k) {
    const std::uint64_t h2 = rng::mix64(h[k] ^ 0x5851f42d4c957f2dULL);
    const double u1 = (static_cast<double>(h[k] >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    out[k] = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
}

}  // namespace

void exp_affine(const double* __restrict in, double* __restrict out, int n, double a, double b) {
  for (int k = 0; k < n; ++k) out[k] = std::exp(a * in[k] + b);
}

void hash_row(std::uint64_t key, std::int64_t x0, int step, int n, std::uint64_t* __restrict out) {
  for (int k = 0; k < n; ++k)
    out[k] = rng::mix64(key + rng::kGolden * static_cast<std::uint64_t>(x0 + static_cast<std::int64_t>(k) * step));
}

void gaussian_from_hash(const std::uint64_t* h, int n, double* out) {
  int k = 0;
  for (; k + kBlock <= n; k += kBlock) gaussian_block(h + k, out + k);
  if (k < n) {
    std::uint64_t hb[kBlock] = {};
    double ob[kBlock];
    std::copy(h + k, h + n, hb);
    gaussian_block(hb, ob);
    std::copy(ob, ob + (n - k), out + k);
  }
}

}  // namespace dpre::detail
