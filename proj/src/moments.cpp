#include "dpre/moments.hpp"

#include <cmath>
#include <numbers>

#include "chain.hpp"
#include "dpre/partition.hpp"
#include "dpre/walk.hpp"

namespace dpre::moments {

double lambda1(const env::EnvironmentModel& model, double beta) {
  return std::expm1(env::cumulant(model, 2 * beta) - 2 * env::cumulant(model, beta));
}

std::vector<double> overlap_generating_sums(double big_lambda, int N, int d) {
  if (N < 0) throw PreconditionError("horizon must be >= 0");
  const auto r = walk::return_probabilities(d, N);
  std::vector<double> z(static_cast<std::size_t>(N) + 1, 0.0), Y(static_cast<std::size_t>(N) + 1, 0.0);
  z[0] = 1.0;
  CompensatedSum total;
  total.add(1.0);
  Y[0] = 1.0;
  for (int n = 1; n <= N; ++n) {
    CompensatedSum s;
    if (big_lambda != 0.0)
      for (int m = 0; m < n; ++m) s.add(z[static_cast<std::size_t>(m)] * r[static_cast<std::size_t>(n - m)]);
    z[static_cast<std::size_t>(n)] = big_lambda * s.value();
    total.add(z[static_cast<std::size_t>(n)]);
    Y[static_cast<std::size_t>(n)] = total.value();
  }
  return Y;
}

double second_moment_exact(const env::EnvironmentModel& model, double beta, int N, int d, const MomentOptions& opts) {
  if (N < 1) throw PreconditionError("second_moment_exact needs N >= 1");
  if (N > opts.max_N)
    throw ResourceError("second_moment_exact: N = " + std::to_string(N) + " exceeds the cap " +
                        std::to_string(opts.max_N));
  const double L = lambda1(model, beta);
  if (L == 0.0) return 1.0;
  return overlap_generating_sums(L, N, d).back();
}

double second_moment_bruteforce(const env::EnvironmentModel& model, double beta, int N, int d) {
  if (N < 1 || N > 6) throw PreconditionError("second_moment_bruteforce enumerates only 1 <= N <= 6");
  if (d < 1 || d > kMaxDim) throw PreconditionError("lattice dimension must be 1, 2 or 3");
  const double pairs = std::pow(2.0 * d, 2.0 * N);
  if (pairs > 2147483648.0) throw ResourceError("second_moment_bruteforce: too many path pairs");
  // All (2d)^N paths as position lists.
  std::vector<std::vector<LatticePoint>> paths;
  const long count = std::lround(std::pow(2.0 * d, N));
  for (long code = 0; code < count; ++code) {
    std::vector<LatticePoint> pos;
    LatticePoint p(d);
    long c = code;
    for (int i = 0; i < N; ++i) {
      const int dir = static_cast<int>(c % (2 * d));
      c /= 2 * d;
      p.x[dir / 2] += dir % 2 ? 1 : -1;
      pos.push_back(p);
    }
    paths.push_back(std::move(pos));
  }
  const double a = env::cumulant(model, 2 * beta) - 2 * env::cumulant(model, beta);
  std::vector<long> by_overlap(static_cast<std::size_t>(N) + 1, 0);
  for (const auto& s : paths)
    for (const auto& t : paths) {
      int I = 0;
      for (int i = 0; i < N; ++i) I += s[static_cast<std::size_t>(i)] == t[static_cast<std::size_t>(i)];
      ++by_overlap[static_cast<std::size_t>(I)];
    }
  double sum = 0.0;
  for (int I = 0; I <= N; ++I) sum += static_cast<double>(by_overlap[static_cast<std::size_t>(I)]) * std::exp(a * I);
  return sum / pairs;
}

MomentScan intermediate_scan(const env::EnvironmentModel& model, double beta_hat, const std::vector<int>& N_grid,
                             int d, const MomentOptions& opts, int workers) {
  if (!(beta_hat > 0.0)) throw PreconditionError("intermediate_scan needs beta_hat > 0");
  if (N_grid.empty()) throw PreconditionError("intermediate_scan needs a nonempty N grid");
  for (int N : N_grid) {
    if (N < 3) throw PreconditionError("intermediate_scan needs every N >= 3 (got " + std::to_string(N) + ")");
    if (N > opts.max_N)
      throw ResourceError("intermediate_scan: N = " + std::to_string(N) + " exceeds the cap " +
                          std::to_string(opts.max_N));
  }
  MomentScan scan;
  scan.records = parallel_map<MomentScanRecord>(N_grid.size(), workers, [&](std::size_t k) {
    MomentScanRecord r;
    r.d = d;
    r.family = model.name();
    r.beta_hat = beta_hat;
    r.N = N_grid[k];
    r.beta_N = beta_hat / std::sqrt(std::log(static_cast<double>(r.N)));
    r.lambda1 = lambda1(model, r.beta_N);
    r.second_moment = second_moment_exact(model, r.beta_N, r.N, d, opts);
    return r;
  });
  scan.threshold = std::sqrt(std::numbers::pi / env::lambda_pp0(model));
  const double rel = beta_hat / scan.threshold - 1.0;
  if (std::abs(rel) < kNearThresholdBand) scan.verdict = "near-threshold";
  else scan.verdict = rel < 0 ? "bounded" : "diverging";
  // Least-squares slope of log(Q[W^2] - 1) against log N.
  if (scan.records.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& r : scan.records) {
      if (!(r.second_moment > 1.0)) continue;
      const double x = std::log(static_cast<double>(r.N));
      const double y = std::log(r.second_moment - 1.0);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    const double den = n * sxx - sx * sx;
    if (n >= 2 && den > 0) scan.loglog_slope = (n * sxy - sx * sy) / den;
  }
  return scan;
}

double dnq(int N, int q) {
  if (q < 1 || q > 5) throw PreconditionError("dnq: order q must be in [1, 5]");
  if (N < q) throw PreconditionError("dnq: need N >= q");
  if (q == 1) return 1.0;
  return detail::gated_chain(N, q, [](int) { return true; }, [](int, int) { return true; }) / N;
}

FractionalMomentEstimate fractional_moment_mc(const env::EnvironmentModel& model, double beta, double theta, int n,
                                              int M, std::uint64_t seed, int d, int workers) {
  if (!(theta > 0.0 && theta < 1.0)) throw PreconditionError("theta must lie in (0, 1)");
  if (M < 2) throw PreconditionError("fractional_moment_mc needs M >= 2");
  if (n < 1) throw PreconditionError("fractional_moment_mc needs n >= 1");
  const LatticePoint o = LatticePoint::origin(d);
  const env::Window window{n, Box::around(o, n)};
  const auto log_w = parallel_map<double>(static_cast<std::size_t>(M), workers, [&](std::size_t i) {
    const env::EnvironmentField field(model, rng::task_seed(seed, i), window);
    return partition::log_partition_profile(field, beta, n, o)[static_cast<std::size_t>(n)];
  });
  FractionalMomentEstimate out;
  std::vector<double> w(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(theta * log_w[i]);
  const auto s = summarize(w);
  out.w_theta.quantity = "Q[W_n^theta]";
  out.w_theta.mean = s.mean;
  out.w_theta.se = s.se;
  out.w_theta.samples = s.n;
  out.w_theta.seed = seed;
  out.w_theta.params = {{"model", model.to_json()}, {"beta", beta}, {"theta", theta}, {"n", n}, {"d", d}};
  std::vector<double> scaled(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) scaled[i] = theta * log_w[i];
  out.certificate = log_mean_exp(scaled) / (n * theta);
  out.mean_log_w_over_n = pairwise_sum(log_w) / static_cast<double>(log_w.size()) / n;
  out.jensen_slack = check_jensen(log_w, n, theta);
  return out;
}

}  // namespace dpre::moments
