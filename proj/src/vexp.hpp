#pragma once

#include <cstdint>

namespace dpre::detail {

// out[k] = exp(a * in[k] + b), vectorized.
void exp_affine(const double* in, double* out, int n, double a, double b);

// out[k] = mix64(key + kGolden * (x0 + k * step)).
void hash_row(std::uint64_t key, std::int64_t x0, int step, int n, std::uint64_t* out);

// Standard normal variates by Box-Muller from one site hash each. Every
// element goes through the same fixed-width vector path, so a single value
// recomputed alone is bit-identical to the same value inside a long row.
void gaussian_from_hash(const std::uint64_t* h, int n, double* out);

}  // namespace dpre::detail
