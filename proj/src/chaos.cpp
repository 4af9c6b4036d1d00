#include "dpre/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chain.hpp"
#include "dpre/partition.hpp"
#include "dpre/moments.hpp"
#include "sweep.hpp"
#include "transfer.hpp"
#include "vexp.hpp"

namespace dpre::chaos {
namespace {

using detail::Frame;
using detail::Region;

int mark_cap(const ChaosParams& p, int j) {
  if (p.truncation_c <= 0.0) return j;
  return std::min(j, static_cast<int>(std::ceil(p.truncation_c * std::sqrt(static_cast<double>(j)))) + 1);
}

Box chaos_box(const ChaosParams& p) { return BoxSpec(p.N, p.d).range(p.block); }

Box reach_box(const ChaosParams& p) { return chaos_box(p).expanded(mark_cap(p, p.N)); }

template <int D>
ChaosValue chaos_sweep(const env::EnvironmentField& field, const ChaosParams& p, int ell) {
  const int N = p.N;
  const int L = p.q + 1;
  const Box B = chaos_box(p);
  const Box reach = reach_box(p);
  field.require(ell * N + 1, (ell + 1) * N, reach);
  const Frame frame(reach);
  auto s = detail::strides_of(frame);
  std::array<std::ptrdiff_t, kMaxDim> sl{};
  for (int k = 0; k < D; ++k) sl[k] = s[k] * L;
  std::vector<double> a(frame.size() * L, 0.0), b(frame.size() * L, 0.0);
  B.for_each([&](const LatticePoint& y) { a[static_cast<std::size_t>(frame.index(y) * L)] = 1.0; });

  const double gN = p.gamma_N();
  const double lam = env::cumulant(field.model(), gN);
  const double inv = 1.0 / (2 * D);
  const std::size_t row_max = static_cast<std::size_t>(reach.extent(D - 1)) + 2;
  std::vector<double> eta(row_max), ew(row_max);
  for (int j = 1; j <= N; ++j) {
    const Region region{B, j, mark_cap(p, j), false, 0};
    const double* src = a.data();
    double* dst = b.data();
    detail::for_each_row(region, [&](const LatticePoint& rs, int count, int step) {
      if (gN == 0.0) {
        std::fill(ew.begin(), ew.begin() + count, 1.0);
      } else {
        field.fill_row(ell * N + j, rs, count, step, eta.data());
        detail::exp_affine(eta.data(), ew.data(), count, gN, -lam);
      }
      const std::ptrdiff_t base = frame.index(rs);
      for (int k = 0; k < count; ++k) {
        const std::ptrdiff_t at = (base + static_cast<std::ptrdiff_t>(k) * step * s[D - 1]) * L;
        const double mark = ew[static_cast<std::size_t>(k)] - 1.0;
        double lower = 0.0;
        for (int o = 0; o < L; ++o) {
          const double avg = detail::neighbour_sum<D>(src, at + o, sl) * inv;
          dst[at + o] = avg + mark * lower;
          lower = avg;
        }
      }
    });
    std::swap(a, b);
  }
  std::vector<double> sums(static_cast<std::size_t>(L), 0.0);
  const Region last{B, N, mark_cap(p, N), false, 0};
  detail::for_each_row(last, [&](const LatticePoint& rs, int count, int step) {
    const std::ptrdiff_t base = frame.index(rs);
    for (int k = 0; k < count; ++k) {
      const std::ptrdiff_t at = (base + static_cast<std::ptrdiff_t>(k) * step * s[D - 1]) * L;
      for (int o = 0; o < L; ++o) sums[static_cast<std::size_t>(o)] += a[static_cast<std::size_t>(at + o)];
    }
  });
  ChaosValue v;
  const double pre = std::sqrt(std::log(static_cast<double>(N))) / N;
  v.by_order.resize(static_cast<std::size_t>(L));
  for (int o = 0; o < L; ++o) v.by_order[static_cast<std::size_t>(o)] = pre * sums[static_cast<std::size_t>(o)];
  if (gN == 0.0)
    for (int o = 1; o < L; ++o) v.by_order[static_cast<std::size_t>(o)] = 0.0;
  const double nb = static_cast<double>(B.count());
  v.lost_mass = std::max(0.0, (nb - sums[0]) / nb);
  return v;
}

// Sum over S' of P^{core}(S') prod_i (w if S'_i = S_i else 1), i <= n.
template <int D>
double overlap_mass(const Box& core, const walk::WalkPath& path, double w, int n) {
  const Box reach = core.expanded(n);
  const Frame frame(reach);
  const auto s = detail::strides_of(frame);
  std::vector<double> a(frame.size(), 0.0), b(frame.size(), 0.0);
  core.for_each([&](const LatticePoint& y) { a[static_cast<std::size_t>(frame.index(y))] = 1.0; });
  const bool point = core.count() == 1;
  const int parity0 = detail::mod2(coord_sum(core.lower()));
  const double inv = 1.0 / (2 * D);
  double total = 0.0;
  for (int i = 1; i <= n; ++i) {
    const Region region{core, i, i, point, detail::mod2(parity0 + i)};
    const double* src = a.data();
    double* dst = b.data();
    detail::for_each_row(region, [&](const LatticePoint& rs, int count, int step) {
      const std::ptrdiff_t base = frame.index(rs);
      for (int k = 0; k < count; ++k) {
        const std::ptrdiff_t at = base + static_cast<std::ptrdiff_t>(k) * step * s[D - 1];
        dst[at] = detail::neighbour_sum<D>(src, at, s) * inv;
      }
    });
    if (reach.contains(path[i])) b[static_cast<std::size_t>(frame.index(path[i]))] *= w;
    std::swap(a, b);
    if (i == n) {
      detail::for_each_row(region, [&](const LatticePoint& rs, int count, int step) {
        const std::ptrdiff_t base = frame.index(rs);
        for (int k = 0; k < count; ++k) total += a[static_cast<std::size_t>(base + static_cast<std::ptrdiff_t>(k) * step * s[D - 1])];
      });
    }
  }
  if (n == 0) total = static_cast<double>(core.count());
  return total;
}

double overlap_mass_dispatch(const Box& core, const walk::WalkPath& path, double w, int n) {
  switch (core.d) {
    case 1: return overlap_mass<1>(core, path, w, n);
    case 2: return overlap_mass<2>(core, path, w, n);
    default: return overlap_mass<3>(core, path, w, n);
  }
}

double overlap_weight(const env::EnvironmentModel& model, double beta_hat, double gamma_hat, int N) {
  const double ln = std::sqrt(std::log(static_cast<double>(N)));
  const double g = gamma_hat / ln;
  const double b = beta_hat / ln;
  return std::exp(env::cumulant(model, g + b) - env::cumulant(model, g) - env::cumulant(model, b));
}

void check_v_args(double, int N, int d) {
  if (N < 2) throw PreconditionError("V statistic needs N >= 2");
  if (d < 1 || d > kMaxDim) throw PreconditionError("lattice dimension must be 1, 2 or 3");
}

EstimateRecord record(const std::string& quantity, const SampleSummary& s, std::uint64_t seed,
                      const env::EnvironmentModel& model, const ChaosParams& p) {
  EstimateRecord r;
  r.quantity = quantity;
  r.mean = s.mean;
  r.se = s.se;
  r.samples = s.n;
  r.seed = seed;
  r.params = {{"model", model.to_json()}, {"q", p.q},   {"gamma_hat", p.gamma_hat}, {"N", p.N},
              {"d", p.d},                 {"K", p.K},   {"theta", p.theta},         {"truncation_c", p.truncation_c}};
  return r;
}

std::vector<double> untilted_samples(const env::EnvironmentModel& model, const ChaosParams& p, int M,
                                     std::uint64_t seed, int workers) {
  p.validate();
  if (M < 1) throw PreconditionError("Monte Carlo sample size must be >= 1");
  const env::Window window = chaos_window(p, 0);
  return parallel_map<double>(static_cast<std::size_t>(M), workers, [&](std::size_t i) {
    const env::EnvironmentField field(model, rng::task_seed(seed, i), window);
    return chaos_statistic(field, p, 0);
  });
}

std::vector<double> tilted_samples(const env::EnvironmentModel& model, const ChaosParams& p, double beta,
                                   const walk::WalkPath& path, int M, std::uint64_t seed, int workers) {
  p.validate();
  if (M < 1) throw PreconditionError("Monte Carlo sample size must be >= 1");
  if (path.length() < p.N) throw PreconditionError("tilt path must have length >= N");
  const env::Window window = chaos_window(p, 0);
  return parallel_map<double>(static_cast<std::size_t>(M), workers, [&](std::size_t i) {
    const env::EnvironmentField field =
        env::EnvironmentField(model, rng::task_seed(seed, i), window).with_tilt(path, beta);
    return chaos_statistic(field, p, 0);
  });
}

double log_binomial(const std::vector<double>& lf, int n, int k) {
  return lf[static_cast<std::size_t>(n)] - lf[static_cast<std::size_t>(k)] - lf[static_cast<std::size_t>(n - k)];
}

}  // namespace

double ChaosParams::gamma_N() const { return gamma_hat / std::sqrt(std::log(static_cast<double>(N))); }

void ChaosParams::validate() const {
  if (q < 1 || q > kMaxOrder) throw PreconditionError("chaos order q must be in [1, 5] (got " + std::to_string(q) + ")");
  if (N < 2) throw PreconditionError("block length N must be >= 2 (got " + std::to_string(N) + ")");
  if (d < 1 || d > kMaxDim) throw PreconditionError("lattice dimension must be 1, 2 or 3");
  if (block.d != d) throw PreconditionError("block index dimension differs from d");
  if (!std::isfinite(gamma_hat)) throw PreconditionError("gamma_hat must be finite");
  if (!(K > 0.0)) throw PreconditionError("penalty level K must be > 0");
  if (!(theta > 0.0 && theta < 1.0)) throw PreconditionError("theta must lie in (0, 1)");
  if (!(C1 > 0.0)) throw PreconditionError("C1 must be > 0");
  if (!(C2 >= 0.0)) throw PreconditionError("C2 must be >= 0");
}

ChaosConstants chaos_constants(const env::EnvironmentModel& model, double g, double b) {
  ChaosConstants c;
  const double lg = env::cumulant(model, g);
  const double lb = env::cumulant(model, b);
  c.lambda2_pair = std::expm1(env::cumulant(model, 2 * g + b) - 2 * lg - lb);
  c.lambda3_cross = std::expm1(env::cumulant(model, g + b) - lg - lb);
  c.m_on = c.lambda3_cross;
  c.ehat2_on = (1.0 + c.lambda2_pair) - (1.0 + c.m_on) * (1.0 + c.m_on);
  c.ehat2_off = moments::lambda1(model, g);
  return c;
}

env::Window chaos_window(const ChaosParams& params, int ell) {
  params.validate();
  if (ell < 0) throw PreconditionError("block epoch must be >= 0");
  return env::Window{(ell + 1) * params.N, reach_box(params)};
}

ChaosValue chaos_orders(const env::EnvironmentField& field, const ChaosParams& params, int ell) {
  params.validate();
  if (field.dim() != params.d) throw PreconditionError("field dimension differs from params.d");
  switch (params.d) {
    case 1: return chaos_sweep<1>(field, params, ell);
    case 2: return chaos_sweep<2>(field, params, ell);
    default: return chaos_sweep<3>(field, params, ell);
  }
}

double chaos_statistic(const env::EnvironmentField& field, const ChaosParams& params, int ell) {
  return chaos_orders(field, params, ell).value();
}

EstimateRecord chaos_mean_mc(const env::EnvironmentModel& model, const ChaosParams& params, int M, std::uint64_t seed,
                             int workers) {
  const auto a = untilted_samples(model, params, M, seed, workers);
  return record("Q[A]", summarize(a), seed, model, params);
}

EstimateRecord chaos_second_moment_mc(const env::EnvironmentModel& model, const ChaosParams& params, int M,
                                      std::uint64_t seed, int workers) {
  auto a = untilted_samples(model, params, M, seed, workers);
  for (double& v : a) v *= v;
  return record("Q[A^2]", summarize(a), seed, model, params);
}

ChaosMoments chaos_moments_mc(const env::EnvironmentModel& model, const ChaosParams& params, int M,
                              std::uint64_t seed, int workers) {
  auto a = untilted_samples(model, params, M, seed, workers);
  ChaosMoments out;
  out.mean = record("Q[A]", summarize(a), seed, model, params);
  for (double& v : a) v *= v;
  out.second = record("Q[A^2]", summarize(a), seed, model, params);
  return out;
}

double penalty(double x, double K) {
  if (!(K > 0.0)) throw PreconditionError("penalty level K must be > 0");
  return x > std::exp(K * K) ? -K : 0.0;
}

double g_product(std::span<const double> values, double K) {
  double s = 0.0;
  for (double v : values) s += penalty(v, K);
  return std::exp(s);
}

double penalty_cost_from_fraction(double exceed_fraction, double K, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw PreconditionError("theta must lie in (0, 1)");
  return 1.0 + std::expm1(theta * K / (1.0 - theta)) * exceed_fraction;
}

PenaltyCost penalty_cost_factor(const env::EnvironmentModel& model, const ChaosParams& params, int M,
                                std::uint64_t seed, int workers) {
  const auto a = untilted_samples(model, params, M, seed, workers);
  std::vector<double> f(a.size());
  std::size_t exceed = 0;
  const double c = params.theta / (1.0 - params.theta);
  for (std::size_t i = 0; i < a.size(); ++i) {
    f[i] = std::exp(-c * penalty(a[i], params.K));
    exceed += a[i] > std::exp(params.K * params.K);
  }
  PenaltyCost out;
  out.factor = record("Q[exp(-theta/(1-theta) f_K(A))]", summarize(f), seed, model, params);
  out.exceed_fraction = static_cast<double>(exceed) / static_cast<double>(a.size());
  out.within_bound = out.factor.mean <= 2.0;
  return out;
}

double x_statistic(const walk::WalkPath& path, int q, int N, const walk::KernelTable& kernel, XReading reading) {
  if (q < 1 || q > kMaxOrder) throw PreconditionError("chaos order q must be in [1, 5]");
  if (N < 1) throw PreconditionError("X statistic needs N >= 1");
  if (kernel.horizon() < N)
    throw PreconditionError("x_statistic: kernel horizon " + std::to_string(kernel.horizon()) + " < N = " +
                            std::to_string(N));
  if (path.length() < N) throw PreconditionError("x_statistic: path shorter than N");
  if (kernel.dim() != path.dim()) throw PreconditionError("x_statistic: kernel and path dimensions differ");
  const Box B = BoxSpec(N, path.dim()).range(LatticePoint::origin(path.dim()));
  std::vector<double> prev(static_cast<std::size_t>(N) + 1, 0.0), cur(static_cast<std::size_t>(N) + 1, 0.0);
  for (int j = 1; j <= N; ++j) {
    double s = 0.0;
    if (reading == XReading::box_anchored)
      B.for_each([&](const LatticePoint& y) { s += kernel.prob(j, y, path[j]); });
    else
      s = static_cast<double>(B.count()) * kernel.prob(j, path[0], path[j]);
    prev[static_cast<std::size_t>(j)] = s;
  }
  for (int k = 2; k <= q; ++k) {
    for (int j = 0; j <= N; ++j) {
      double s = 0.0;
      for (int jp = 1; jp < j; ++jp) {
        const double a = prev[static_cast<std::size_t>(jp)];
        if (a != 0.0) s += a * kernel.prob(j - jp, path[jp], path[j]);
      }
      cur[static_cast<std::size_t>(j)] = s;
    }
    prev.swap(cur);
  }
  double total = 0.0;
  for (int j = 1; j <= N; ++j) total += prev[static_cast<std::size_t>(j)];
  return total / N;
}

double l_statistic(const walk::WalkPath& path, int q, int N, double C2) {
  if (q < 1 || q > kMaxOrder) throw PreconditionError("chaos order q must be in [1, 5]");
  if (N < q) throw PreconditionError("L statistic needs N >= q");
  if (!(C2 >= 0.0)) throw PreconditionError("C2 must be >= 0");
  if (path.length() < N) throw PreconditionError("l_statistic: path shorter than N");
  // |x|^2 < C2^2 gap in the Euclidean norm; C2 = inf opens every gate.
  const double c2sq = C2 * C2;
  auto within = [&](const LatticePoint& a, const LatticePoint& b, int gap) {
    const LatticePoint v = a - b;
    long r2 = 0;
    for (int k = 0; k < v.d; ++k) r2 += static_cast<long>(v[k]) * v[k];
    return static_cast<double>(r2) < c2sq * gap;
  };
  auto first = [&](int j) { return within(path[j], path[0], j); };
  auto gate = [&](int jp, int j) { return within(path[j], path[jp], j - jp); };
  return detail::gated_chain(N, q, first, gate) / N;
}

C2Calibration calibrate_c2(int q, int N, int walks, std::uint64_t seed, int d, std::vector<double> grid,
                           double target) {
  if (walks < 1) throw PreconditionError("calibrate_c2 needs at least one walk");
  if (grid.empty()) throw PreconditionError("calibrate_c2 needs a nonempty C2 grid");
  std::sort(grid.begin(), grid.end());
  const double D = moments::dnq(N, q);
  std::vector<walk::WalkPath> paths;
  paths.reserve(static_cast<std::size_t>(walks));
  for (int i = 0; i < walks; ++i) paths.push_back(walk::sample_path(d, N, rng::task_seed(seed, static_cast<std::uint64_t>(i))));
  C2Calibration out;
  for (double c : grid) {
    int hits = 0;
    for (const auto& p : paths) hits += l_statistic(p, q, N, c) >= D / 2;
    const double prob = static_cast<double>(hits) / walks;
    out.scanned.emplace_back(c, prob);
    if (!out.achieved && prob >= target) {
      out.achieved = true;
      out.C2 = c;
      out.probability = prob;
    }
  }
  if (!out.achieved) {
    out.C2 = out.scanned.back().first;
    out.probability = out.scanned.back().second;
  }
  return out;
}

double tilted_chaos_mean_formula(const env::EnvironmentModel& model, const ChaosParams& params, double beta,
                                 const walk::WalkPath& path, const walk::KernelTable& kernel) {
  params.validate();
  const double lam3 = chaos_constants(model, params.gamma_N(), beta).lambda3_cross;
  if (lam3 == 0.0) return 0.0;
  const double X = x_statistic(path, params.q, params.N, kernel, XReading::box_anchored);
  return std::sqrt(std::log(static_cast<double>(params.N))) * std::pow(lam3, params.q) * X;
}

EstimateRecord tilted_chaos_mean_mc(const env::EnvironmentModel& model, const ChaosParams& params, double beta,
                                    const walk::WalkPath& path, int M, std::uint64_t seed, int workers) {
  const auto a = tilted_samples(model, params, beta, path, M, seed, workers);
  auto r = record("Q_S[A]", summarize(a), seed, model, params);
  r.params["beta"] = beta;
  return r;
}

EstimateRecord tilted_chaos_variance_mc(const env::EnvironmentModel& model, const ChaosParams& params, double beta,
                                        const walk::WalkPath& path, int M, std::uint64_t seed, int workers) {
  if (M < 2) throw PreconditionError("variance estimate needs M >= 2");
  const auto a = tilted_samples(model, params, beta, path, M, seed, workers);
  const auto s = summarize(a);
  EstimateRecord r = record("Var_Q_S[A]", s, seed, model, params);
  r.mean = s.variance;
  r.se = variance_se(a);
  r.params["beta"] = beta;
  return r;
}

double v_statistic(const env::EnvironmentField& field, double gamma_hat, int N, VMethod method) {
  check_v_args(gamma_hat, N, field.dim());
  if (gamma_hat == 0.0) return 0.0;
  const int d = field.dim();
  const Box B = BoxSpec(N, d).range(LatticePoint::origin(d));
  const double ln = std::log(static_cast<double>(N));
  const double g = gamma_hat / std::sqrt(ln);
  const double pre = std::sqrt(ln) / N;
  if (method == VMethod::adjoint) {
    detail::TransferRun run;
    run.core = B;
    run.n = N;
    const auto t = detail::run_transfer(field, g, run, false);
    return pre * (std::exp(t.log_total.back()) - static_cast<double>(B.count()));
  }
  field.require(1, N, B.expanded(N));
  double s = 0.0;
  B.for_each([&](const LatticePoint& y) { s += std::expm1(partition::log_partition(field, g, N, y).log_w); });
  return pre * s;
}

double v_second_moment_exact(const env::EnvironmentModel& model, double gamma_hat, int N, int d) {
  check_v_args(gamma_hat, N, d);
  const double ln = std::log(static_cast<double>(N));
  const double Lam = moments::lambda1(model, gamma_hat / std::sqrt(ln));
  if (Lam == 0.0) return 0.0;
  const BoxSpec spec(N, d);
  const int m = spec.m();
  const int w = spec.width();
  const int R = N + m + 2;
  Box frame_box;
  frame_box.d = d;
  for (int k = 0; k < d; ++k) {
    frame_box.lo[k] = -R;
    frame_box.hi[k] = R;
  }
  const double cells = std::pow(2.0 * R + 1, d);
  if (cells > 2.0e8) throw ResourceError("v_second_moment_exact: lattice of " + std::to_string(cells) + " cells is over the cap");
  std::array<std::ptrdiff_t, kMaxDim> stride{};
  std::ptrdiff_t st = 1;
  for (int k = d - 1; k >= 0; --k) {
    stride[k] = st;
    st *= 2 * R + 1;
  }
  auto flat = [&](const LatticePoint& p) {
    std::ptrdiff_t off = 0;
    for (int k = 0; k < d; ++k) off += (p.x[k] + R) * stride[k];
    return off;
  };
  // Difference-walk steps e_a - e_b.
  struct Step {
    LatticePoint v;
    std::ptrdiff_t off;
    double p;
  };
  std::vector<Step> steps;
  const double u = 1.0 / (2.0 * d);
  auto add_step = [&](LatticePoint v, double p) {
    for (auto& s : steps)
      if (s.v == v) {
        s.p += p;
        return;
      }
    steps.push_back({v, 0, p});
  };
  for (int a = 0; a < 2 * d; ++a)
    for (int b = 0; b < 2 * d; ++b) {
      LatticePoint v(d);
      v.x[a / 2] += a % 2 ? 1 : -1;
      v.x[b / 2] -= b % 2 ? 1 : -1;
      add_step(v, u * u);
    }
  const std::ptrdiff_t zero = flat(LatticePoint::origin(d));
  for (auto& s : steps) s.off = flat(s.v) - zero;
  const std::size_t size = static_cast<std::size_t>(st);
  std::vector<double> H(size, 0.0), G(size, 0.0);
  const LatticePoint o = LatticePoint::origin(d);
  auto region_at = [&](int j) {
    return Region{Box::around(o, 0), 2 * (N - j), std::min(2 * m + 2 * j, 2 * (N - j)), true, 0};
  };
  std::array<Region, 2> written{Region{Box::around(o, 0), -1, -1, true, 0}, Region{Box::around(o, 0), -1, -1, true, 0}};
  int slot = 0;
  // H holds h(j+1, .) - 1; G receives h(j, .) - 1.
  for (int j = N - 1; j >= 0; --j) {
    if (written[static_cast<std::size_t>(slot)].radius >= 0)
      detail::for_each_row(written[static_cast<std::size_t>(slot)], [&](const LatticePoint& rs, int count, int step) {
        const std::ptrdiff_t base = flat(rs);
        for (int k = 0; k < count; ++k) G[static_cast<std::size_t>(base + static_cast<std::ptrdiff_t>(k) * step * stride[d - 1])] = 0.0;
      });
    const Region region = region_at(j);
    const double hit = Lam * (1.0 + H[static_cast<std::size_t>(zero)]);
    detail::for_each_row(region, [&](const LatticePoint& rs, int count, int step) {
      const std::ptrdiff_t base = flat(rs);
      for (int k = 0; k < count; ++k) {
        const std::ptrdiff_t at = base + static_cast<std::ptrdiff_t>(k) * step * stride[d - 1];
        double v = 0.0;
        for (const auto& s : steps) v += s.p * H[static_cast<std::size_t>(at + s.off)];
        G[static_cast<std::size_t>(at)] = v;
      }
    });
    for (const auto& s : steps) {
      const LatticePoint delta = o - s.v;
      if (l1_norm(delta) <= region.radius) G[static_cast<std::size_t>(zero - s.off)] += s.p * hit;
    }
    written[static_cast<std::size_t>(slot)] = region;
    slot ^= 1;
    std::swap(H, G);
  }
  double total = 0.0;
  Box::around(o, w - 1).for_each([&](const LatticePoint& delta) {
    double mult = 1.0;
    for (int k = 0; k < d; ++k) mult *= w - std::abs(delta.x[k]);
    total += mult * H[static_cast<std::size_t>(flat(delta))];
  });
  return ln / (static_cast<double>(N) * N) * total;
}

double v_second_moment_renewal(const env::EnvironmentModel& model, double gamma_hat, int N, int d) {
  check_v_args(gamma_hat, N, d);
  if (d == 3) throw PreconditionError("v_second_moment_renewal has closed-form kernels for d = 1, 2 only");
  const double ln = std::log(static_cast<double>(N));
  const double Lam = moments::lambda1(model, gamma_hat / std::sqrt(ln));
  if (Lam == 0.0) return 0.0;
  const BoxSpec spec(N, d);
  const int w = spec.width();
  std::vector<double> lf(static_cast<std::size_t>(2 * N) + 1);
  for (std::size_t k = 0; k < lf.size(); ++k) lf[k] = std::lgamma(static_cast<double>(k) + 1.0);
  const auto Y = moments::overlap_generating_sums(Lam, N, d);
  double total = 0.0;
  for (int i = 1; i <= N; ++i) {
    const int n = 2 * i;
    double g = 0.0;
    const double l2 = std::log(2.0);
    for (int a = -(w - 1); a <= w - 1; ++a) {
      if (d == 1) {
        if (std::abs(a) > n || (n + a) % 2) continue;
        g += (w - std::abs(a)) * std::exp(log_binomial(lf, n, (n + a) / 2) - n * l2);
        continue;
      }
      for (int b = -(w - 1); b <= w - 1; ++b) {
        if (std::abs(a) + std::abs(b) > n || (n + a + b) % 2) continue;
        const double lp = log_binomial(lf, n, (n + a + b) / 2) + log_binomial(lf, n, (n + a - b) / 2) - 2 * n * l2;
        g += static_cast<double>(w - std::abs(a)) * (w - std::abs(b)) * std::exp(lp);
      }
    }
    total += g * Y[static_cast<std::size_t>(N - i)];
  }
  return ln / (static_cast<double>(N) * N) * Lam * total;
}

double v_tilted_mean(const env::EnvironmentModel& model, double beta_hat, double gamma_hat, int N,
                     const walk::WalkPath& path) {
  check_v_args(gamma_hat, N, path.dim());
  if (path.length() < N) throw PreconditionError("v_tilted_mean: path shorter than N");
  const double w = overlap_weight(model, beta_hat, gamma_hat, N);
  const double ln = std::log(static_cast<double>(N));
  if (w == 1.0) return 0.0;
  const double E = overlap_mass_dispatch(Box::around(path[0], 0), path, w, N);
  return ln / N * (E - 1.0);
}

double v_tilted_mean_full(const env::EnvironmentModel& model, double beta_hat, double gamma_hat, int N,
                          const walk::WalkPath& path) {
  check_v_args(gamma_hat, N, path.dim());
  if (path.length() < N) throw PreconditionError("v_tilted_mean_full: path shorter than N");
  const double w = overlap_weight(model, beta_hat, gamma_hat, N);
  if (w == 1.0) return 0.0;
  const Box B = BoxSpec(N, path.dim()).range(LatticePoint::origin(path.dim()));
  const double E = overlap_mass_dispatch(B, path, w, N);
  return std::sqrt(std::log(static_cast<double>(N))) / N * (E - static_cast<double>(B.count()));
}

}  // namespace dpre::chaos
