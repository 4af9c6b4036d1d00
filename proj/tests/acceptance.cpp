// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "dpre/chaos.hpp"
#include "dpre/cli.hpp"
#include "dpre/env.hpp"
#include "dpre/estimator.hpp"
#include "dpre/moments.hpp"
#include "dpre/partition.hpp"
#include "dpre/rng.hpp"
#include "dpre/stats.hpp"
#include "dpre/walk.hpp"

using namespace dpre;
using env::EnvironmentField;
using env::EnvironmentModel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += "; runtime over budget";
  }
  if (!o.pass) ++failures;
  char rt[64];
  if (budget_s > 0)
    std::snprintf(rt, sizeof rt, "%.1f s / %.0f s", secs, budget_s);
  else
    std::snprintf(rt, sizeof rt, "%.1f s", secs);
  std::printf("%s %2d %s: %s [%s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), rt);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double lse(const std::vector<double>& v) {
  double m = -INFINITY;
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DPRE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

const std::vector<int> kScanGrid = {256, 1024, 4096, 16384, 32768};

}  // namespace

int main() {
  const auto g = EnvironmentModel::gaussian_unit();
  const auto rad = EnvironmentModel::rademacher();

  criterion(1, "second moment: exact recursion vs brute force", 30, [&] {
    double worst = 0.0;
    for (const auto& m : {g, rad})
      for (int d : {1, 2})
        for (int N = 1; N <= 5; ++N)
          for (double beta : {0.3, 0.8}) {
            const double a = moments::second_moment_exact(m, beta, N, d);
            const double b = moments::second_moment_bruteforce(m, beta, N, d);
            worst = std::max(worst, std::abs(a - b) / std::abs(b));
          }
    return Outcome{worst <= 1e-10, "max rel err " + fmt("%.3g", worst) + " (tol 1e-10)"};
  });

  criterion(2, "second moment bounded below threshold (beta_hat = 1)", 120, [&] {
    const auto scan = moments::intermediate_scan(g, 1.0, kScanGrid);
    bool increasing = true, in_range = true;
    std::string vals;
    for (std::size_t k = 0; k < scan.records.size(); ++k) {
      const double v = scan.records[k].second_moment;
      vals += (k ? ", " : "") + fmt("%.6f", v);
      in_range = in_range && v > 1.0 && v <= 2.2;
      if (k && !(v > scan.records[k - 1].second_moment)) increasing = false;
    }
    return Outcome{increasing && in_range, "values [" + vals + "]; in (1, 2.2]: " + (in_range ? "yes" : "no") +
                                               "; strictly increasing: " + (increasing ? "yes" : "no")};
  });

  criterion(3, "second moment diverges above threshold (beta_hat = 2)", 120, [&] {
    const auto scan = moments::intermediate_scan(g, 2.0, kScanGrid);
    bool increasing = true;
    for (std::size_t k = 1; k < scan.records.size(); ++k)
      if (!(scan.records[k].second_moment > scan.records[k - 1].second_moment)) increasing = false;
    const double ratio = scan.records.back().second_moment / scan.records.front().second_moment;
    return Outcome{increasing && ratio >= 5.0, "final/first " + fmt("%.4g", ratio) + " (need >= 5); strictly increasing: " +
                                                   (increasing ? "yes" : "no")};
  });

  criterion(4, "martingale normalization Q[W_32] = 1", 60, [&] {
    const int M = 20000;
    std::vector<double> w(M);
    const env::Window win{32, Box::around(LatticePoint{0, 0}, 32)};
    for (int s = 0; s < M; ++s) {
      const EnvironmentField f(g, rng::task_seed(2024, static_cast<std::uint64_t>(s)), win);
      w[static_cast<std::size_t>(s)] = std::exp(partition::log_partition(f, 0.5, 32, LatticePoint{0, 0}).log_w);
    }
    const auto s = summarize(w);
    const double z = std::abs(s.mean - 1.0) / s.se;
    return Outcome{z <= 4.0, "mean " + fmt("%.5f", s.mean) + ", |mean - 1| / SE = " + fmt("%.3g", z) + " (tol 4)"};
  });

  criterion(5, "coarse-graining decomposition", 60, [&] {
    const int N = 16, n = 2;
    const BoxSpec spec(N, 2);
    const LatticePoint o{0, 0};
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const EnvironmentField f(g, rng::task_seed(555, s), {n * N, Box::around(o, n * N)});
      std::vector<double> parts;
      for (const auto& z : partition::enumerate_block_paths(spec, o, n))
        parts.push_back(partition::coarse_partition(f, 1.0, spec, z, o).log_w);
      const double lw = partition::log_partition(f, 1.0, n * N, o).log_w;
      worst = std::max(worst, std::abs(lse(parts) - lw) / std::max(1.0, std::abs(lw)));
    }
    return Outcome{worst <= 1e-9, "max log-domain rel err " + fmt("%.3g", worst) + " (tol 1e-9)"};
  });

  criterion(7, "chaos mean zero, bounded second moment", 300, [&] {
    bool ok = true;
    std::string det;
    std::vector<std::pair<double, double>> second;
    for (int N : {64, 128, 256}) {
      chaos::ChaosParams p;
      p.q = 2;
      p.gamma_hat = 1.0;
      p.N = N;
      const auto m = chaos::chaos_moments_mc(g, p, 2000, rng::task_seed(7, static_cast<std::uint64_t>(N)));
      const double z = std::abs(m.mean.mean) / m.mean.se;
      ok = ok && z <= 4.0;
      second.emplace_back(m.second.mean, m.second.se);
      det += "N=" + std::to_string(N) + " |mean|/SE " + fmt("%.2f", z) + " Q[A^2] " + fmt("%.4f", m.second.mean) + "+-" +
             fmt("%.4f", m.second.se) + "; ";
    }
    bool overlap = true;
    for (std::size_t a = 0; a < second.size(); ++a)
      for (std::size_t b = a + 1; b < second.size(); ++b) {
        const double lo = std::max(second[a].first - 2 * second[a].second, second[b].first - 2 * second[b].second);
        const double hi = std::min(second[a].first + 2 * second[a].second, second[b].first + 2 * second[b].second);
        overlap = overlap && lo <= hi;
      }
    det += std::string("2-SE intervals overlap pairwise: ") + (overlap ? "yes" : "no");
    return Outcome{ok && overlap, det};
  });

  criterion(8, "tilted mean identity", 300, [&] {
    chaos::ChaosParams p;
    p.q = 2;
    p.gamma_hat = 1.0;
    p.N = 64;
    const double beta = estimator::beta_of_N(2.0, 2, 64);
    const auto S = walk::sample_path(2, 64, 808);
    const auto k = walk::build_kernel(2, 64);
    const double f = chaos::tilted_chaos_mean_formula(g, p, beta, S, k);
    const auto mc = chaos::tilted_chaos_mean_mc(g, p, beta, S, 2000, 809);
    const double z = std::abs(mc.mean - f) / mc.se;
    return Outcome{z <= 4.0, "formula " + fmt("%.5f", f) + ", MC " + fmt("%.5f", mc.mean) + " (SE " + fmt("%.2g", mc.se) +
                                 "), |diff|/SE " + fmt("%.2f", z) + " (tol 4)"};
  });

  criterion(9, "D_N^q, C2 calibration, L bounds", 180, [&] {
    double rmin = 1e9, rmax = -1e9;
    for (int e = 8; e <= 16; ++e) {
      const int N = 1 << e;
      const double r = moments::dnq(N, 2) / std::log(static_cast<double>(N));
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    const bool ratio_ok = rmin >= 0.85 && rmax <= 1.0;
    const int N = 256;
    const auto cal = chaos::calibrate_c2(2, N, 500, 909);
    const double D = moments::dnq(N, 2);
    bool bounds = true;
    for (int i = 0; i < 500; ++i) {
      const auto S = walk::sample_path(2, N, rng::task_seed(909, static_cast<std::uint64_t>(i)));
      for (double c : {0.0, 0.5, cal.C2, 8.0}) {
        const double L = chaos::l_statistic(S, 2, N, c);
        bounds = bounds && L >= 0.0 && L <= D;
      }
      bounds = bounds && chaos::l_statistic(S, 2, N, INFINITY) == D;
    }
    return Outcome{ratio_ok && cal.achieved && cal.probability >= 0.9 && bounds,
                   "D/log N in [" + fmt("%.4f", rmin) + ", " + fmt("%.4f", rmax) + "] (need [0.85, 1]); C2 = " +
                       fmt("%g", cal.C2) + " gives P(L >= D/2) = " + fmt("%.3f", cal.probability) +
                       " (need >= 0.9); 0 <= L <= D on all walks: " + (bounds ? "yes" : "no")};
  });

  criterion(10, "V statistic", 300, [&] {
    std::vector<double> v2;
    std::string det = "Q[V^2]";
    for (int N : {64, 256, 1024}) {
      v2.push_back(chaos::v_second_moment_exact(g, 1.0, N));
      det += " " + fmt("%.4f", v2.back());
    }
    const double spread = *std::max_element(v2.begin(), v2.end()) / *std::min_element(v2.begin(), v2.end());
    // Tilted mean along the same walks, truncated to N steps.
    const int paths = 20;
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i < paths; ++i) {
      const auto S = walk::sample_path(2, 1024, rng::task_seed(1010, static_cast<std::uint64_t>(i)));
      lo += chaos::v_tilted_mean(g, 1.6, 1.2, 64, S) / paths;
      hi += chaos::v_tilted_mean(g, 1.6, 1.2, 1024, S) / paths;
    }
    det += ", max/min " + fmt("%.3f", spread) + " (need <= 2); tilted mean N=64 " + fmt("%.5f", lo) + ", N=1024 " +
           fmt("%.5f", hi) + " (need growth)";
    return Outcome{spread <= 2.0 && hi > lo, det};
  });

  criterion(11, "very strong disorder at beta = 2", 600, [&] {
    const auto pt = estimator::free_energy_lower(g, 2.0, 2, {32, 64, 128, 256}, 2000, 1111);
    const bool neg = pt.p_lower < -0.01 && std::abs(pt.p_lower) > 3.0 * pt.p_lower_se;
    const auto cfg = cli::RunConfig::defaults("certificate");
    estimator::CertificateParams p;
    p.N = cfg.N.front();
    p.beta = estimator::beta_of_N(cfg.C1, cfg.q, p.N);
    p.d = cfg.d;
    p.n = cfg.blocks;
    p.q = cfg.q;
    p.gamma_hat = cfg.gamma_hat;
    p.K = cfg.K;
    p.epsilon = cfg.epsilon;
    p.M_cost = cfg.samples;
    p.paths_per_start = cfg.paths_per_start;
    p.M_direct = cfg.direct_samples;
    p.truncation_c = cfg.truncation_c;
    p.seed = cfg.seed;
    const auto rep = estimator::negativity_certificate(g, p);
    const auto& best = rep.best_theta();
    return Outcome{neg && best.contraction < 1.0,
                   "p_lower(n=256) " + fmt("%.5f", pt.p_lower) + " +- " + fmt("%.2g", pt.p_lower_se) +
                       " (need < -0.01 and > 3 SE from 0); certificate at beta " + fmt("%.4g", p.beta) +
                       ": contraction " + fmt("%.4f", best.contraction) + " at theta " + fmt("%g", best.theta) +
                       " (need < 1)"};
  });

  criterion(12, "conjecture fit", 600, [&] {
    std::vector<estimator::FitPoint> planted;
    for (double b : {1.2, 1.6, 2.0, 2.4}) planted.push_back({b, -std::exp(-std::numbers::pi / (b * b)), 0.0});
    const auto pf = estimator::conjecture_fit(planted);
    const double err = std::abs(pf.slope + std::numbers::pi);
    std::vector<estimator::FreeEnergyPoint> real;
    for (double b : {1.2, 1.6, 2.0, 2.4})
      real.push_back(estimator::free_energy_lower(g, b, 2, {32, 64, 128, 256}, 500, rng::task_seed(1212, std::uint64_t(b * 10))));
    const auto rf = estimator::conjecture_fit(real);
    return Outcome{err <= 1e-9 && rf.slope < 0.0, "planted slope error " + fmt("%.3g", err) + " (tol 1e-9); real-run slope " +
                                                      fmt("%.4f", rf.slope) + " over " + std::to_string(rf.used.size()) +
                                                      " points (need < 0)"};
  });

  criterion(13, "determinism across worker counts", 0, [&] {
    const fs::path dir = fs::temp_directory_path() / "dpre_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::vector<std::pair<std::string, std::string>> cmds = {
        {"free-energy", "--beta 1,2 --n 16,32 --samples 100"},
        {"second-moment", "--N 256,1024"},
        {"chaos", "--N 16,32 --samples 50"},
        {"certificate", "--N 16 --C1 2 --samples 100 --paths-per-start 16 --direct-samples 20"},
        {"conjecture", "--beta 1.2,1.6,2.0 --n 16,32 --samples 100"},
        {"oracle", ""},
    };
    bool ok = true;
    std::string det;
    for (const auto& [name, args] : cmds) {
      const std::string a = (dir / (name + "_w1")).string(), b = (dir / (name + "_w2")).string();
      const int ca = run_cli(name + " " + args + " --workers 1 --output " + a);
      const int cb = run_cli(name + " " + args + " --workers 2 --output " + b);
      const bool same = ca == 0 && cb == 0 && cli::data_payload(a + ".csv") == cli::data_payload(b + ".csv");
      ok = ok && same;
      det += name + (same ? " ok" : " DIFF") + "; ";
    }
    fs::remove_all(dir);
    return Outcome{ok, det + "payloads compared byte for byte"};
  });

  // Every Monte Carlo batch above went through the Jensen check; a violation throws.
  criterion(6, "Jensen ordering on every Monte Carlo batch", 0, [&] {
    const auto t = jensen_tally();
    return Outcome{t.checks > 0 && t.min_slack >= -1e-12,
                   std::to_string(t.checks) + " batches checked, min slack " + fmt("%.3g", t.min_slack) + " (tol -1e-12)"};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
