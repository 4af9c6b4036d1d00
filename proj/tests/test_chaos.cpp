#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "dpre/chaos.hpp"
#include "dpre/env.hpp"
#include "dpre/error.hpp"
#include "dpre/estimator.hpp"
#include "dpre/lattice.hpp"
#include "dpre/moments.hpp"
#include "dpre/rng.hpp"
#include "dpre/walk.hpp"
#include "oracles.hpp"

using namespace dpre;
using chaos::ChaosParams;
using env::EnvironmentField;
using env::EnvironmentModel;

namespace {

using Kmaps = std::vector<std::map<LatticePoint, double, oracle::PointLess>>;

ChaosParams params(int q, int N, double gamma_hat = 1.0) {
  ChaosParams p;
  p.q = q;
  p.N = N;
  p.gamma_hat = gamma_hat;
  return p;
}

Box box0(int N, int d = 2) { return BoxSpec(N, d).range(LatticePoint::origin(d)); }

double gamma_N(double gamma_hat, int N) { return gamma_hat / std::sqrt(std::log(static_cast<double>(N))); }

// A^{q,N} for q = 1, 2 as explicit nested sums over times and sites.
double chaos_nested(const EnvironmentField& f, int q, int N, double gamma_hat, const Kmaps& k) {
  const auto& m = f.model();
  const double g = gamma_N(gamma_hat, N);
  auto mark = [&](int j, const LatticePoint& x) { return env::e_weight(m, g, f.eta_at(j, x)) - 1.0; };
  double s = 0.0;
  box0(N).for_each([&](const LatticePoint& y) {
    for (int j1 = 1; j1 <= N; ++j1)
      for (const auto& [d1, p1] : k[static_cast<std::size_t>(j1)]) {
        const LatticePoint x1 = y + d1;
        const double a1 = p1 * mark(j1, x1);
        if (q == 1) {
          s += a1;
          continue;
        }
        for (int j2 = j1 + 1; j2 <= N; ++j2)
          for (const auto& [d2, p2] : k[static_cast<std::size_t>(j2 - j1)]) s += a1 * p2 * mark(j2, x1 + d2);
      }
  });
  return std::sqrt(std::log(static_cast<double>(N))) / N * s;
}

// X by direct nested sums, q = 1, 2.
double x_nested(const walk::WalkPath& S, int q, int N, const Kmaps& k) {
  double s = 0.0;
  box0(N).for_each([&](const LatticePoint& y) {
    for (int j1 = 1; j1 <= N; ++j1) {
      const double a = oracle::kernel_at(k, j1, S[j1] - y);
      if (q == 1) {
        s += a;
        continue;
      }
      for (int j2 = j1 + 1; j2 <= N; ++j2) s += a * oracle::kernel_at(k, j2 - j1, S[j2] - S[j1]);
    }
  });
  return s / N;
}

bool inside(const LatticePoint& v, double C2, int gap) {
  double r2 = 0.0;
  for (int k = 0; k < v.d; ++k) r2 += double(v[k]) * v[k];
  return std::sqrt(r2) < C2 * std::sqrt(static_cast<double>(gap));
}

// L for q = 2 by the double sum.
double l_nested(const walk::WalkPath& S, int N, double C2) {
  double s = 0.0;
  for (int a = 1; a <= N; ++a)
    for (int b = a + 1; b <= N; ++b)
      if (inside(S[a] - S[0], C2, a) && inside(S[b] - S[a], C2, b - a)) s += 1.0 / (b - a);
  return s / N;
}

}  // namespace

TEST_CASE("penalty and g product") {
  const double K = 2.0;
  CHECK(chaos::penalty(std::exp(4.0) * 1.01, K) == -2.0);
  CHECK(chaos::penalty(std::exp(4.0), K) == 0.0);
  CHECK(chaos::penalty(-1e300, K) == 0.0);
  const std::vector<double> v = {1e9, 0.0, 1e9};
  CHECK(chaos::g_product(v, K) == doctest::Approx(std::exp(-2.0 * K)).epsilon(1e-15));
  CHECK(chaos::g_product(std::vector<double>{}, K) == 1.0);
  CHECK_THROWS_AS(chaos::penalty(1.0, 0.0), PreconditionError);
}

TEST_CASE("chaos statistic against nested sums") {
  const auto g = EnvironmentModel::gaussian_unit();
  const auto k = oracle::kernel_maps(2, 8);
  for (int q : {1, 2})
    for (int N : {4, 8}) {
      auto p = params(q, N, 1.3);
      p.truncation_c = 0.0;
      for (std::uint64_t s : {1, 2, 3}) {
        const EnvironmentField f(g, s, chaos::chaos_window(p));
        const double ref = chaos_nested(f, q, N, 1.3, k);
        CHECK(chaos::chaos_statistic(f, p) == doctest::Approx(ref).epsilon(1e-12));
      }
    }
  // Order 0 is the walk mass sqrt(log N)/N |B|.
  auto p = params(2, 16);
  const EnvironmentField f(g, 4, chaos::chaos_window(p));
  const auto v = chaos::chaos_orders(f, p);
  CHECK(v.by_order[0] == doctest::Approx(std::sqrt(std::log(16.0)) / 16.0 * 81.0).epsilon(1e-13));
  CHECK(v.lost_mass == doctest::Approx(0.0).epsilon(1e-15));
  // Rademacher field, q = 1.
  const auto r = EnvironmentModel::rademacher();
  auto pr = params(1, 6, 0.9);
  pr.truncation_c = 0.0;
  const EnvironmentField fr(r, 12, chaos::chaos_window(pr));
  CHECK(chaos::chaos_statistic(fr, pr) == doctest::Approx(chaos_nested(fr, 1, 6, 0.9, k)).epsilon(1e-12));
}

TEST_CASE("chaos truncation is negligible at c = 6") {
  const auto g = EnvironmentModel::gaussian_unit();
  auto exact = params(2, 64);
  exact.truncation_c = 0.0;
  const auto cut = params(2, 64);
  const EnvironmentField f(g, 8, chaos::chaos_window(exact));
  const double a = chaos::chaos_statistic(f, exact);
  const auto b = chaos::chaos_orders(f, cut);
  CHECK(std::abs(a - b.value()) <= 1e-9 * (1.0 + std::abs(a)));
  CHECK(b.lost_mass <= 1e-12);
}

TEST_CASE("gamma_hat = 0 gives a zero chaos") {
  const auto g = EnvironmentModel::gaussian_unit();
  const auto p = params(2, 32, 0.0);
  const EnvironmentField f(g, 3, chaos::chaos_window(p));
  CHECK(chaos::chaos_statistic(f, p) == 0.0);
  const auto m = chaos::chaos_mean_mc(g, p, 5, 1);
  CHECK(m.mean == 0.0);
  CHECK(m.se == 0.0);
}

TEST_CASE("chaos has mean zero under Q") {
  const auto g = EnvironmentModel::gaussian_unit();
  for (int q : {1, 2, 3})
    for (int N : {16, 64}) {
      const auto r = chaos::chaos_mean_mc(g, params(q, N), 400, 100 + q);
      CHECK(r.se > 0.0);
      CHECK(std::abs(r.mean) <= 4.0 * r.se);
    }
  // Mean and second moment come from the same fields.
  const auto p = params(2, 16);
  const auto both = chaos::chaos_moments_mc(g, p, 50, 9);
  CHECK(both.mean.mean == chaos::chaos_mean_mc(g, p, 50, 9).mean);
  CHECK(both.second.mean == chaos::chaos_second_moment_mc(g, p, 50, 9).mean);
  CHECK(chaos::chaos_mean_mc(g, p, 50, 9, 3).mean == both.mean.mean);
}

TEST_CASE("chaos second moment against the pairing formula") {
  // q = 2: only identical space-time pairs survive, so
  // Q[A^2] = (log N / N^2) L1^2 sum_j sum_x h_j(x)^2 sum_{g <= N-j} r_g, h_j(x) = sum_{y in B} p_j(y, x).
  const auto g = EnvironmentModel::gaussian_unit();
  for (int N : {8, 16}) {
    const auto k = oracle::kernel_maps(2, N);
    std::map<LatticePoint, double, oracle::PointLess> h;
    double tot = 0.0;
    for (int j = 1; j <= N; ++j) {
      h.clear();
      box0(N).for_each([&](const LatticePoint& y) {
        for (const auto& [dx, p] : k[static_cast<std::size_t>(j)]) h[y + dx] += p;
      });
      double H = 0.0, R = 0.0;
      for (const auto& [x, v] : h) H += v * v;
      for (int gap = 1; gap <= N - j; ++gap) R += oracle::return_prob_closed(2, gap);
      tot += H * R;
    }
    const double L1 = moments::lambda1(g, gamma_N(1.0, N));
    const double exact = std::log(static_cast<double>(N)) / (double(N) * N) * L1 * L1 * tot;
    const auto mc = chaos::chaos_second_moment_mc(g, params(2, N), 4000, 200 + N);
    CHECK(std::abs(mc.mean - exact) <= 4.0 * mc.se);
  }
}

TEST_CASE("X statistic") {
  // q = 1, N = 1, S_1 = (1, 0): three box sites neighbour (1, 0).
  const auto k1 = walk::build_kernel(2, 1);
  const walk::WalkPath one({LatticePoint{0, 0}, LatticePoint{1, 0}});
  CHECK(chaos::x_statistic(one, 1, 1, k1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(chaos::x_statistic(one, 1, 1, k1, chaos::XReading::verbatim) == doctest::Approx(9 * 0.25).epsilon(1e-15));

  const auto km = oracle::kernel_maps(2, 12);
  const auto kt = walk::build_kernel(2, 12);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto S = walk::sample_path(2, 12, rng::task_seed(3, s));
    for (int q : {1, 2}) CHECK(chaos::x_statistic(S, q, 12, kt) == doctest::Approx(x_nested(S, q, 12, km)).epsilon(1e-13));
  }

  const int N = 256;
  const auto k = walk::build_kernel(2, N);
  std::vector<double> xs;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const double x = chaos::x_statistic(walk::sample_path(2, N, rng::task_seed(4, s)), 2, N, k);
    CHECK(x >= 0.0);
    xs.push_back(x);
  }
  std::nth_element(xs.begin(), xs.begin() + 100, xs.end());
  CHECK(xs[100] >= 0.2 * std::log(static_cast<double>(N)));
}

TEST_CASE("L statistic") {
  const int N = 40;
  const double D = moments::dnq(N, 2);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto S = walk::sample_path(2, N, rng::task_seed(6, s));
    CHECK(chaos::l_statistic(S, 2, N, 0.0) == 0.0);
    CHECK(chaos::l_statistic(S, 2, N, std::numeric_limits<double>::infinity()) == doctest::Approx(D).epsilon(1e-14));
    for (double c : {0.5, 1.0, 2.0}) {
      const double L = chaos::l_statistic(S, 2, N, c);
      CHECK(L >= 0.0);
      CHECK(L <= D + 1e-14);
      CHECK(L == doctest::Approx(l_nested(S, N, c)).epsilon(1e-13));
    }
  }
  // The gate is strict: a first step of length exactly C2 sqrt(1) is excluded.
  std::vector<LatticePoint> line;
  for (int i = 0; i <= 2; ++i) line.push_back(LatticePoint{i, 0});
  CHECK(chaos::l_statistic(walk::WalkPath(line), 1, 2, 1.0) == 0.0);
  CHECK(chaos::l_statistic(walk::WalkPath(line), 1, 2, 1.0001) > 0.0);

  const auto cal = chaos::calibrate_c2(2, 256, 500, 5);
  CHECK(cal.achieved);
  CHECK(cal.C2 == 2.0);
  CHECK(cal.probability >= 0.9);
}

TEST_CASE("tilt constants") {
  const auto g = EnvironmentModel::gaussian_unit();
  for (double gN : {0.2, 0.5})
    for (double beta : {0.0, 0.7, 1.5}) {
      const auto c = chaos::chaos_constants(g, gN, beta);
      CHECK(c.lambda3_cross == doctest::Approx(std::expm1(gN * beta)).epsilon(1e-14));
      CHECK(c.lambda2_pair == doctest::Approx(std::expm1(gN * gN + 2 * gN * beta)).epsilon(1e-14));
      CHECK(c.ehat2_off == doctest::Approx(std::expm1(gN * gN)).epsilon(1e-14));
      CHECK(c.ehat2_on >= 0.0);
    }
  const auto r = EnvironmentModel::rademacher();
  const auto c = chaos::chaos_constants(r, 0.4, 0.9);
  const double direct = std::cosh(1.3) / (std::cosh(0.4) * std::cosh(0.9)) - 1.0;
  CHECK(c.lambda3_cross == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("tilted mean: formula against Monte Carlo") {
  const auto g = EnvironmentModel::gaussian_unit();
  struct Case {
    int q, N;
  };
  for (const Case cs : {Case{1, 16}, Case{2, 16}, Case{2, 32}}) {
    const auto p = params(cs.q, cs.N);
    const auto S = walk::sample_path(2, cs.N, 21);
    const auto k = walk::build_kernel(2, cs.N);
    const double beta = estimator::beta_of_N(2.0, 2, cs.N);
    const double f = chaos::tilted_chaos_mean_formula(g, p, beta, S, k);
    const auto mc = chaos::tilted_chaos_mean_mc(g, p, beta, S, 1500, 33);
    CHECK(f > 0.0);
    CHECK(std::abs(mc.mean - f) <= 4.0 * mc.se);
  }
  // No tilt: back to mean zero.
  const auto p = params(2, 32);
  const auto S = walk::sample_path(2, 32, 22);
  const auto k = walk::build_kernel(2, 32);
  CHECK(chaos::tilted_chaos_mean_formula(g, p, 0.0, S, k) == 0.0);
  const auto zero = chaos::tilted_chaos_mean_mc(g, p, 0.0, S, 800, 34);
  CHECK(std::abs(zero.mean) <= 4.0 * zero.se);
  // The tilted mean grows with C1.
  double prev = -INFINITY, prev_f = -INFINITY;
  for (double C1 : {1.0, 2.0, 4.0}) {
    const double beta = estimator::beta_of_N(C1, 2, 32);
    const auto mc = chaos::tilted_chaos_mean_mc(g, p, beta, S, 400, 35);
    const double f = chaos::tilted_chaos_mean_formula(g, p, beta, S, k);
    CHECK(mc.mean > prev);
    CHECK(f > prev_f);
    CHECK(std::abs(mc.mean - f) <= 4.0 * mc.se);
    prev = mc.mean;
    prev_f = f;
  }
}

TEST_CASE("tilted variance") {
  const auto g = EnvironmentModel::gaussian_unit();
  const auto S = walk::sample_path(2, 64, 23);
  const double beta = estimator::beta_of_N(2.0, 2, 64);
  const auto v = chaos::tilted_chaos_variance_mc(g, params(2, 64), beta, S, 200, 36);
  CHECK(v.mean >= 0.0);
  CHECK(v.se > 0.0);
  const auto z = chaos::tilted_chaos_variance_mc(g, params(2, 64, 0.0), beta, S, 20, 36);
  CHECK(z.mean == 0.0);
  CHECK_THROWS_AS(chaos::tilted_chaos_variance_mc(g, params(2, 64), beta, S, 1, 36), PreconditionError);
}

TEST_CASE("V statistic") {
  const auto g = EnvironmentModel::gaussian_unit();
  // N = 2: sum over the 3 x 3 box of (W_2^y - 1) by path enumeration.
  for (std::uint64_t s : {1, 2}) {
    const EnvironmentField f(g, s, {2, box0(2).expanded(2)});
    const double gN = gamma_N(1.0, 2);
    double tot = 0.0;
    box0(2).for_each([&](const LatticePoint& y) {
      double w = 0.0;
      const auto paths = oracle::all_paths(2, 2, y);
      for (const auto& P : paths) w += env::e_weight(g, gN, f.eta_at(1, P[1])) * env::e_weight(g, gN, f.eta_at(2, P[2]));
      tot += w / static_cast<double>(paths.size()) - 1.0;
    });
    const double ref = std::sqrt(std::log(2.0)) / 2.0 * tot;
    CHECK(chaos::v_statistic(f, 1.0, 2) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(chaos::v_statistic(f, 1.0, 2, chaos::VMethod::per_start) == doctest::Approx(ref).epsilon(1e-12));
  }
  const EnvironmentField f(g, 5, {16, box0(16).expanded(16)});
  CHECK(chaos::v_statistic(f, 1.0, 16) == doctest::Approx(chaos::v_statistic(f, 1.0, 16, chaos::VMethod::per_start)).epsilon(1e-10));
  CHECK(chaos::v_statistic(f, 0.0, 16) == 0.0);

  std::vector<double> v;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const EnvironmentField h(g, rng::task_seed(40, s), {16, box0(16).expanded(16)});
    v.push_back(chaos::v_statistic(h, 1.0, 16));
  }
  CHECK(std::abs(oracle::mean(v)) <= 4.0 * oracle::std_error(v));
}

TEST_CASE("V second moment") {
  const auto g = EnvironmentModel::gaussian_unit();
  // N = 2: Q[W^y W^y'] = E[(1 + L1)^I] over pairs of walks started at y, y'.
  const double L1 = moments::lambda1(g, gamma_N(1.0, 2));
  double tot = 0.0;
  box0(2).for_each([&](const LatticePoint& y) {
    const auto A = oracle::all_paths(2, 2, y);
    box0(2).for_each([&](const LatticePoint& yp) {
      const auto B = oracle::all_paths(2, 2, yp);
      double s = 0.0;
      for (const auto& a : A)
        for (const auto& b : B) s += std::pow(1.0 + L1, (a[1] == b[1]) + (a[2] == b[2]));
      tot += s / static_cast<double>(A.size() * B.size()) - 1.0;
    });
  });
  const double ref = std::log(2.0) / 4.0 * tot;
  CHECK(chaos::v_second_moment_exact(g, 1.0, 2) == doctest::Approx(ref).epsilon(1e-12));
  CHECK(chaos::v_second_moment_renewal(g, 1.0, 2) == doctest::Approx(ref).epsilon(1e-12));
  for (int N : {8, 32, 128})
    CHECK(chaos::v_second_moment_exact(g, 1.0, N) == doctest::Approx(chaos::v_second_moment_renewal(g, 1.0, N)).epsilon(1e-10));
  CHECK(chaos::v_second_moment_exact(g, 0.0, 32) == 0.0);

  // Monte Carlo at N = 8.
  std::vector<double> v2;
  for (std::uint64_t s = 0; s < 20000; ++s) {
    const EnvironmentField h(g, rng::task_seed(41, s), {8, box0(8).expanded(8)});
    const double v = chaos::v_statistic(h, 1.0, 8);
    v2.push_back(v * v);
  }
  CHECK(std::abs(oracle::mean(v2) - chaos::v_second_moment_exact(g, 1.0, 8)) <= 4.0 * oracle::std_error(v2));
}

TEST_CASE("tilted V mean") {
  const auto g = EnvironmentModel::gaussian_unit();
  const int N = 2;
  const double ln = std::log(2.0);
  const double gN = gamma_N(1.2, N), bN = gamma_N(1.6, N);
  const double w = std::exp(env::cumulant(g, gN + bN) - env::cumulant(g, gN) - env::cumulant(g, bN));
  const walk::WalkPath S({LatticePoint{0, 0}, LatticePoint{1, 0}, LatticePoint{1, 1}});
  auto expect = [&](const LatticePoint& y) {
    const auto P = oracle::all_paths(2, N, y);
    double s = 0.0;
    for (const auto& a : P) s += std::pow(w, (a[1] == S[1]) + (a[2] == S[2]));
    return s / static_cast<double>(P.size());
  };
  CHECK(chaos::v_tilted_mean(g, 1.6, 1.2, N, S) == doctest::Approx(ln / N * (expect(S[0]) - 1.0)).epsilon(1e-13));
  double full = 0.0;
  box0(N).for_each([&](const LatticePoint& y) { full += expect(y) - 1.0; });
  CHECK(chaos::v_tilted_mean_full(g, 1.6, 1.2, N, S) == doctest::Approx(std::sqrt(ln) / N * full).epsilon(1e-13));
  CHECK(chaos::v_tilted_mean(g, 1.6, 0.0, N, S) == 0.0);
  CHECK(chaos::v_tilted_mean(g, 0.0, 1.2, N, S) == 0.0);
  CHECK(chaos::v_tilted_mean(g, 1.6, 1.2, 64, walk::sample_path(2, 64, 3)) > 0.0);
}

TEST_CASE("penalty cost factor") {
  const auto g = EnvironmentModel::gaussian_unit();
  auto p = params(2, 64);
  p.K = 10.0;
  const auto big = chaos::penalty_cost_factor(g, p, 100, 7);
  CHECK(big.factor.mean == 1.0);
  CHECK(big.exceed_fraction == 0.0);
  CHECK(big.within_bound);
  auto z = params(2, 64, 0.0);
  z.K = 0.1;
  CHECK(chaos::penalty_cost_factor(g, z, 50, 7).factor.mean == 1.0);
  p.K = 1.0;
  const auto small = chaos::penalty_cost_factor(g, p, 200, 7);
  CHECK(small.factor.mean >= 1.0);
  CHECK(std::isfinite(small.factor.mean));
  CHECK(small.factor.mean == doctest::Approx(chaos::penalty_cost_from_fraction(small.exceed_fraction, 1.0, 0.5)).epsilon(1e-12));
  CHECK(chaos::penalty_cost_from_fraction(0.5, 2.0, 0.5) == doctest::Approx(1.0 + 0.5 * std::expm1(2.0)).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
  const auto g = EnvironmentModel::gaussian_unit();
  auto p = params(6, 64);
  CHECK_THROWS_AS(p.validate(), PreconditionError);
  p = params(2, 1);
  CHECK_THROWS_AS(p.validate(), PreconditionError);
  p = params(2, 64);
  p.theta = 1.0;
  CHECK_THROWS_AS(p.validate(), PreconditionError);
  const EnvironmentField small(g, 1, {8, box0(8)});
  CHECK_THROWS_AS(chaos::chaos_statistic(small, params(2, 64)), WindowViolation);
}
