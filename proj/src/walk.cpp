#include "dpre/walk.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "dpre/error.hpp"
#include "dpre/rng.hpp"

namespace dpre::walk {
namespace {

void check_dim(int d) {
  if (d < 1 || d > kMaxDim) throw PreconditionError("lattice dimension must be 1, 2 or 3");
}

double log_central_binomial_ratio(long i) {
  // log(C(2i, i) 4^{-i})
  const double x = static_cast<double>(i);
  return std::lgamma(2 * x + 1) - 2 * std::lgamma(x + 1) - 2 * x * std::log(2.0);
}

// P(S_{2i} = 0) in d = 3 as C(2i,i) 4^{-i} * sum_{a+b+c=i} (i!/(a!b!c!))^2 9^{-i}.
double return_probability_3d(long i) {
  const double x = static_cast<double>(i);
  const double lfi = std::lgamma(x + 1);
  const double base = log_central_binomial_ratio(i) - 2 * x * std::log(3.0);
  double shift = -INFINITY;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>((i + 1) * (i + 2) / 2));
  for (long a = 0; a <= i; ++a)
    for (long b = 0; a + b <= i; ++b) {
      const long c = i - a - b;
      const double t = 2 * (lfi - std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(c + 1.0));
      terms.push_back(t);
      shift = std::max(shift, t);
    }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - shift);
  return std::exp(base + shift + std::log(s));
}

const char kMagic[8] = {'D', 'P', 'R', 'E', 'K', 'R', 'N', '\0'};

}  // namespace

WalkPath::WalkPath(std::vector<LatticePoint> positions) : positions_(std::move(positions)) {
  if (positions_.empty()) throw PreconditionError("a walk path needs at least S_0");
  const int d = positions_.front().d;
  for (std::size_t i = 1; i < positions_.size(); ++i) {
    if (positions_[i].d != d) throw PreconditionError("walk path mixes dimensions");
    if (l1_distance(positions_[i], positions_[i - 1]) != 1)
      throw PreconditionError("walk path step " + std::to_string(i) + " is not a unit step");
  }
}

std::size_t KernelTable::slice_index(int j, const LatticePoint& a) const {
  const std::size_t e = static_cast<std::size_t>(radius(j)) + 1;
  std::size_t off = 0;
  for (int k = 0; k < d_; ++k) off = off * e + static_cast<std::size_t>(a.x[k]);
  return off;
}

double KernelTable::prob(int j, const LatticePoint& delta) const {
  if (j < 0 || j > n_) throw PreconditionError("kernel time " + std::to_string(j) + " outside [0, " +
                                               std::to_string(n_) + "]");
  if (delta.d != d_) throw PreconditionError("kernel query dimension mismatch");
  if (j == 0) return l1_norm(delta) == 0 ? 1.0 : 0.0;
  LatticePoint a(d_);
  const int r = radius(j);
  for (int k = 0; k < d_; ++k) {
    a.x[k] = std::abs(delta.x[k]);
    if (a.x[k] > r) return 0.0;
  }
  return slices_[static_cast<std::size_t>(j)][slice_index(j, a)];
}

double KernelTable::slice_sum(int j) const {
  if (j == 0) return 1.0;
  const auto& s = slices_[static_cast<std::size_t>(j)];
  const int e = radius(j) + 1;
  double total = 0.0;
  for (std::size_t off = 0; off < s.size(); ++off) {
    std::size_t rest = off;
    int mult = 1;
    for (int k = 0; k < d_; ++k) {
      if (rest % static_cast<std::size_t>(e) != 0) mult *= 2;
      rest /= static_cast<std::size_t>(e);
    }
    total += mult * s[off];
  }
  return total;
}

std::size_t KernelTable::bytes() const {
  std::size_t b = 0;
  for (const auto& s : slices_) b += s.size() * sizeof(double);
  return b;
}

void KernelTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write kernel cache " + path);
  const std::uint32_t version = kFormatVersion;
  const std::int32_t header[2] = {d_, n_};
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(radius_.data()), static_cast<std::streamsize>(radius_.size() * sizeof(int)));
  out.write(reinterpret_cast<const char*>(lost_.data()), static_cast<std::streamsize>(lost_.size() * sizeof(double)));
  for (const auto& s : slices_)
    out.write(reinterpret_cast<const char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(double)));
  if (!out) throw Error("failed writing kernel cache " + path);
}

KernelTable KernelTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read kernel cache " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::int32_t header[2] = {0, 0};
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kFormatVersion)
    throw Error("kernel cache " + path + " has an unknown format");
  KernelTable t;
  t.d_ = header[0];
  t.n_ = header[1];
  check_dim(t.d_);
  if (t.n_ < 1) throw Error("kernel cache " + path + " has an invalid horizon");
  t.radius_.resize(static_cast<std::size_t>(t.n_) + 1);
  t.lost_.resize(static_cast<std::size_t>(t.n_) + 1);
  in.read(reinterpret_cast<char*>(t.radius_.data()), static_cast<std::streamsize>(t.radius_.size() * sizeof(int)));
  in.read(reinterpret_cast<char*>(t.lost_.data()), static_cast<std::streamsize>(t.lost_.size() * sizeof(double)));
  t.slices_.resize(static_cast<std::size_t>(t.n_) + 1);
  for (int j = 1; j <= t.n_; ++j) {
    std::size_t count = 1;
    for (int k = 0; k < t.d_; ++k) count *= static_cast<std::size_t>(t.radius_[j]) + 1;
    auto& s = t.slices_[static_cast<std::size_t>(j)];
    s.resize(count);
    in.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(count * sizeof(double)));
  }
  if (!in) throw Error("kernel cache " + path + " is truncated");
  return t;
}

KernelTable build_kernel(int d, int n, const KernelOptions& opts) {
  check_dim(d);
  if (n < 1) throw PreconditionError("kernel horizon must be >= 1");
  KernelTable t;
  t.d_ = d;
  t.n_ = n;
  t.radius_.assign(static_cast<std::size_t>(n) + 1, 0);
  t.lost_.assign(static_cast<std::size_t>(n) + 1, 0.0);
  std::size_t total = 0;
  for (int j = 1; j <= n; ++j) {
    int r = j;
    if (opts.truncate && j >= 2) {
      const double rho = std::ceil(opts.truncation_c * std::sqrt(j * std::log(static_cast<double>(j))));
      r = std::min(j, static_cast<int>(rho));
    }
    t.radius_[static_cast<std::size_t>(j)] = r;
    std::size_t count = 1;
    for (int k = 0; k < d; ++k) count *= static_cast<std::size_t>(r) + 1;
    total += count * sizeof(double);
  }
  if (total > opts.max_bytes) {
    throw ResourceError("kernel table for d=" + std::to_string(d) + ", n=" + std::to_string(n) + " needs " +
                        std::to_string(total) + " bytes, cap is " + std::to_string(opts.max_bytes));
  }
  t.slices_.resize(static_cast<std::size_t>(n) + 1);
  const double inv = 1.0 / (2 * d);
  // Slice 0 is the point mass at the origin; orthant coordinates reflect
  // through zero, so the neighbour at -1 of coordinate 0 is +1.
  std::vector<double> prev{1.0};
  int prev_r = 0;
  for (int j = 1; j <= n; ++j) {
    const int r = t.radius_[static_cast<std::size_t>(j)];
    const std::size_t e = static_cast<std::size_t>(r) + 1;
    const std::size_t pe = static_cast<std::size_t>(prev_r) + 1;
    std::size_t count = 1;
    for (int k = 0; k < d; ++k) count *= e;
    std::vector<double> cur(count, 0.0);
    auto get = [&](std::array<int, kMaxDim> a) {
      std::size_t off = 0;
      for (int k = 0; k < d; ++k) {
        const int v = std::abs(a[k]);
        if (v > prev_r) return 0.0;
        off = off * pe + static_cast<std::size_t>(v);
      }
      return prev[off];
    };
    for (std::size_t off = 0; off < count; ++off) {
      std::array<int, kMaxDim> a{};
      std::size_t rest = off;
      for (int k = d - 1; k >= 0; --k) {
        a[k] = static_cast<int>(rest % e);
        rest /= e;
      }
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        auto b = a;
        b[k] = a[k] - 1;
        s += get(b);
        b[k] = a[k] + 1;
        s += get(b);
      }
      cur[off] = s * inv;
    }
    t.slices_[static_cast<std::size_t>(j)] = std::move(cur);
    if (opts.truncate) t.lost_[static_cast<std::size_t>(j)] = std::max(0.0, 1.0 - t.slice_sum(j));
    prev = t.slices_[static_cast<std::size_t>(j)];
    prev_r = r;
  }
  return t;
}

KernelTable build_kernel_cached(int d, int n, const KernelOptions& opts) {
  const char* dir = std::getenv("DPRE_KERNEL_CACHE");
  if (!dir || !*dir) return build_kernel(d, n, opts);
  std::string path = std::string(dir) + "/kernel_d" + std::to_string(d) + "_n" + std::to_string(n);
  if (opts.truncate) path += "_c" + std::to_string(opts.truncation_c);
  path += "_v" + std::to_string(KernelTable::kFormatVersion) + ".bin";
  if (std::ifstream probe(path, std::ios::binary); probe) {
    try {
      return KernelTable::load(path);
    } catch (const Error&) {
      // Stale or foreign file: rebuild and overwrite.
    }
  }
  KernelTable t = build_kernel(d, n, opts);
  try {
    t.save(path);
  } catch (const Error&) {
  }
  return t;
}

double return_probability(int d, long i) {
  check_dim(d);
  if (i < 0) throw PreconditionError("return probability index must be >= 0");
  if (i == 0) return 1.0;
  switch (d) {
    case 1: return std::exp(log_central_binomial_ratio(i));
    case 2: return std::exp(2 * log_central_binomial_ratio(i));
    default: return return_probability_3d(i);
  }
}

std::vector<double> return_probabilities(int d, int imax) {
  check_dim(d);
  if (imax < 0) throw PreconditionError("return probability index must be >= 0");
  std::vector<double> r(static_cast<std::size_t>(imax) + 1);
  r[0] = 1.0;
  if (d == 3) {
    for (int i = 1; i <= imax; ++i) r[static_cast<std::size_t>(i)] = return_probability_3d(i);
    return r;
  }
  // C(2i,i) 4^{-i} = prod_{k<=i} (2k-1)/(2k)
  double c = 1.0;
  for (int i = 1; i <= imax; ++i) {
    c *= (2.0 * i - 1.0) / (2.0 * i);
    r[static_cast<std::size_t>(i)] = d == 1 ? c : c * c;
  }
  return r;
}

WalkPath sample_path(const LatticePoint& start, int n, std::uint64_t seed) {
  if (n < 0) throw PreconditionError("walk length must be >= 0");
  const int d = start.d;
  const std::uint64_t key = rng::stream_key(seed, rng::Stream::walk);
  std::vector<LatticePoint> pos;
  pos.reserve(static_cast<std::size_t>(n) + 1);
  pos.push_back(start);
  for (int i = 1; i <= n; ++i) {
    const std::uint64_t h = rng::combine(key, static_cast<std::uint64_t>(i));
    const auto dir = static_cast<int>(((h >> 32) * static_cast<std::uint64_t>(2 * d)) >> 32);
    LatticePoint p = pos.back();
    p.x[dir >> 1] += (dir & 1) ? 1 : -1;
    pos.push_back(p);
  }
  return WalkPath(std::move(pos));
}

WalkPath sample_path(int d, int n, std::uint64_t seed) {
  return sample_path(LatticePoint::origin(d), n, seed);
}

long overlap_count(const WalkPath& a, const WalkPath& b) {
  if (a.length() != b.length())
    throw PreconditionError("overlap_count: path lengths differ (" + std::to_string(a.length()) + " vs " +
                            std::to_string(b.length()) + ")");
  long c = 0;
  for (int i = 1; i <= a.length(); ++i) c += a[i] == b[i];
  return c;
}

double box_hit_prob(const KernelTable& kernel, const LatticePoint& x, const BoxSpec& spec,
                    const LatticePoint& z) {
  if (kernel.horizon() < spec.N())
    throw PreconditionError("box_hit_prob: kernel horizon " + std::to_string(kernel.horizon()) +
                            " is shorter than N = " + std::to_string(spec.N()));
  const Box b = spec.range(z);
  double s = 0.0;
  b.for_each([&](const LatticePoint& y) { s += kernel.prob(spec.N(), y - x); });
  return s;
}

}  // namespace dpre::walk
