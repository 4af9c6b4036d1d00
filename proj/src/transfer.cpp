#include "transfer.hpp"

#include <cmath>
#include <limits>

#include "vexp.hpp"

namespace dpre::detail {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <int D>
TransferOutput sweep(const env::EnvironmentField& field, double beta, const TransferRun& run, bool keep_final) {
  const Box reach = run.core.expanded(run.n);
  field.require(run.t0 + 1, run.t0 + run.n, reach);
  const Frame frame(reach);
  const auto s = strides_of(frame);
  std::vector<double> a(frame.size(), 0.0), b(frame.size(), 0.0);
  const bool point_start = run.core.count() == 1;
  const int parity0 = mod2(coord_sum(run.core.lower()));
  run.core.for_each([&](const LatticePoint& p) { a[static_cast<std::size_t>(frame.index(p))] = 1.0; });

  TransferOutput out;
  out.log_total.assign(static_cast<std::size_t>(run.n) + 1, kNegInf);
  double total = static_cast<double>(run.core.count());
  double off = 0.0;
  out.log_total[0] = std::log(total);

  const double lam = env::cumulant(field.model(), beta);
  const std::size_t row_max = static_cast<std::size_t>(reach.extent(D - 1)) + 2;
  std::vector<double> eta(row_max), ew(row_max);
  std::size_t next_mask = 0;

  for (int i = 1; i <= run.n; ++i) {
    Region region{run.core, i, i, point_start, mod2(parity0 + i)};
    const double scale = 1.0 / (2 * D * total);
    double sum = 0.0;
    const double* src = a.data();
    double* dst = b.data();
    for_each_row(region, [&](const LatticePoint& rs, int count, int step) {
      field.fill_row(run.t0 + i, rs, count, step, eta.data());
      exp_affine(eta.data(), ew.data(), count, beta, -lam);
      const std::ptrdiff_t base = frame.index(rs);
      const std::ptrdiff_t ds = step * s[D - 1];
      double rsum = 0.0;
      for (int k = 0; k < count; ++k) {
        const std::ptrdiff_t idx = base + k * ds;
        const double v = neighbour_sum<D>(src, idx, s) * ew[static_cast<std::size_t>(k)] * scale;
        dst[idx] = v;
        rsum += v;
      }
      sum += rsum;
    });
    while (next_mask < run.masks.size() && run.masks[next_mask].first < i) ++next_mask;
    if (next_mask < run.masks.size() && run.masks[next_mask].first == i) {
      const Box& keep = run.masks[next_mask].second;
      sum = 0.0;
      for_each_row(region, [&](const LatticePoint& rs, int count, int step) {
        LatticePoint p = rs;
        const std::ptrdiff_t base = frame.index(rs);
        const std::ptrdiff_t ds = step * s[D - 1];
        for (int k = 0; k < count; ++k, p.x[D - 1] += step) {
          const std::ptrdiff_t idx = base + k * ds;
          if (keep.contains(p)) sum += dst[idx];
          else dst[idx] = 0.0;
        }
      });
    }
    off += std::log(total);
    if (!(sum > 0.0)) {
      // Everything masked away (or underflowed): the slice carries no mass.
      if (keep_final) {
        out.box = reach;
        out.final_values.assign(reach.count(), 0.0);
        out.final_offset = kNegInf;
      }
      return out;
    }
    total = sum;
    out.log_total[static_cast<std::size_t>(i)] = off + std::log(total);
    std::swap(a, b);
  }

  if (keep_final) {
    out.box = reach;
    out.final_values.resize(reach.count());
    std::size_t j = 0;
    reach.for_each([&](const LatticePoint& p) { out.final_values[j++] = a[static_cast<std::size_t>(frame.index(p))]; });
    out.final_offset = off;
  }
  return out;
}

}  // namespace

TransferOutput run_transfer(const env::EnvironmentField& field, double beta, const TransferRun& run,
                            bool keep_final) {
  if (run.n < 0) throw PreconditionError("transfer horizon must be >= 0");
  if (run.core.d != field.dim()) throw PreconditionError("start dimension differs from the field");
  switch (field.dim()) {
    case 1: return sweep<1>(field, beta, run, keep_final);
    case 2: return sweep<2>(field, beta, run, keep_final);
    default: return sweep<3>(field, beta, run, keep_final);
  }
}

}  // namespace dpre::detail
