#include "dpre/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "dpre/partition.hpp"
#include "dpre/walk.hpp"

namespace dpre::estimator {
namespace {

// Signed permutations of the coordinates of z.
std::vector<LatticePoint> orbit(const LatticePoint& z) {
  std::vector<LatticePoint> out;
  std::array<int, kMaxDim> perm{0, 1, 2};
  do {
    for (int signs = 0; signs < (1 << z.d); ++signs) {
      LatticePoint p(z.d);
      for (int k = 0; k < z.d; ++k) p.x[k] = (signs >> k & 1 ? -1 : 1) * z.x[perm[k]];
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
  } while (std::next_permutation(perm.begin(), perm.begin() + z.d));
  return out;
}

// 0 <= x_1 <= ... <= x_d inside [-m, m]^d: one point per symmetry orbit.
std::vector<LatticePoint> fundamental_domain(int d, int m) {
  std::vector<LatticePoint> out;
  Box b = Box::around(LatticePoint::origin(d), m);
  b.for_each([&](const LatticePoint& x) {
    bool ok = true;
    for (int k = 0; k < d; ++k) ok = ok && x.x[k] >= 0 && (k == 0 || x.x[k - 1] <= x.x[k]);
    if (ok) out.push_back(x);
  });
  return out;
}

struct ZKey {
  LatticePoint z;
  bool operator<(const ZKey& o) const { return z.x < o.z.x; }
};

}  // namespace

nlohmann::json FreeEnergyPoint::to_json() const {
  nlohmann::json prof = nlohmann::json::array();
  for (const auto& e : profile) prof.push_back({{"n", e.n}, {"mean", e.mean}, {"se", e.se}});
  return {{"beta", beta},
          {"d", d},
          {"n_schedule", n_schedule},
          {"M", M},
          {"seed", seed},
          {"profile", prof},
          {"p_lower", p_lower},
          {"p_lower_se", p_lower_se},
          {"certificate", certificate},
          {"theta", theta},
          {"jensen_slack", jensen_slack},
          {"non_monotone", non_monotone}};
}

FreeEnergyPoint free_energy_lower(const env::EnvironmentModel& model, double beta, int d,
                                  const std::vector<int>& n_schedule, int M, std::uint64_t seed, double theta,
                                  int workers) {
  if (n_schedule.empty()) throw PreconditionError("free_energy_lower needs a nonempty n schedule");
  for (std::size_t k = 0; k < n_schedule.size(); ++k) {
    if (n_schedule[k] < 1) throw PreconditionError("horizons must be >= 1");
    if (k && n_schedule[k] <= n_schedule[k - 1]) throw PreconditionError("n schedule must be increasing");
  }
  if (M < 100) throw PreconditionError("free_energy_lower needs M >= 100 (got " + std::to_string(M) + ")");
  if (!(theta > 0.0 && theta < 1.0)) throw PreconditionError("theta must lie in (0, 1)");
  const int n_max = n_schedule.back();
  const LatticePoint o = LatticePoint::origin(d);
  const env::Window window{n_max, Box::around(o, n_max)};
  const auto profiles = parallel_map<std::vector<double>>(static_cast<std::size_t>(M), workers, [&](std::size_t i) {
    const env::EnvironmentField field(model, rng::task_seed(seed, i), window);
    return partition::log_partition_profile(field, beta, n_max, o);
  });
  FreeEnergyPoint pt;
  pt.beta = beta;
  pt.d = d;
  pt.n_schedule = n_schedule;
  pt.M = M;
  pt.seed = seed;
  pt.theta = theta;
  pt.jensen_slack = std::numeric_limits<double>::infinity();
  std::vector<double> logs(static_cast<std::size_t>(M)), per_n(static_cast<std::size_t>(M));
  for (int n : n_schedule) {
    for (std::size_t i = 0; i < logs.size(); ++i) {
      logs[i] = profiles[i][static_cast<std::size_t>(n)];
      per_n[i] = logs[i] / n;
    }
    const auto s = summarize(per_n);
    pt.profile.push_back({n, s.mean, s.se});
    pt.jensen_slack = std::min(pt.jensen_slack, check_jensen(logs, n, theta));
    if (n == n_max) {
      std::vector<double> scaled(logs.size());
      for (std::size_t i = 0; i < logs.size(); ++i) scaled[i] = theta * logs[i];
      pt.certificate = log_mean_exp(scaled) / (n * theta);
    }
  }
  pt.p_lower = pt.profile.back().mean;
  pt.p_lower_se = pt.profile.back().se;
  for (std::size_t a = 0; a < pt.profile.size(); ++a)
    for (std::size_t b = a + 1; b < pt.profile.size(); ++b) {
      const double tol = 2.0 * std::hypot(pt.profile[a].se, pt.profile[b].se);
      if (pt.profile[b].mean < pt.profile[a].mean - tol) pt.non_monotone = true;
    }
  return pt;
}

double beta_of_N(double C1, int q, long long N) {
  if (!(C1 > 0.0)) throw PreconditionError("C1 must be > 0");
  if (q < 2) throw PreconditionError("beta_of_N needs q >= 2");
  if (N < 3) throw PreconditionError("beta_of_N needs N >= 3 (got " + std::to_string(N) + ")");
  return C1 * std::pow(std::log(static_cast<double>(N)), -(q - 1.0) / (2.0 * q));
}

long long N_of_beta(double C1, int q, double beta) {
  if (!(C1 > 0.0)) throw PreconditionError("C1 must be > 0");
  if (q < 2) throw PreconditionError("N_of_beta needs q >= 2");
  if (!(beta > 0.0)) throw PreconditionError("N_of_beta needs beta > 0");
  const double logN = std::pow(C1 / beta, 2.0 * q / (q - 1.0));
  if (logN > 43.0) throw ResourceError("N_of_beta: N = exp(" + std::to_string(logN) + ") does not fit");
  return static_cast<long long>(std::floor(std::exp(logN)));
}

nlohmann::json CertificateReport::to_json() const {
  nlohmann::json th = nlohmann::json::array();
  for (const auto& t : by_theta) {
    th.push_back({{"theta", t.theta},
                  {"cost_factor", t.cost_factor},
                  {"cost_term", t.cost_term},
                  {"R", t.R},
                  {"tail_bound", t.tail_bound},
                  {"tilted_sum", t.tilted_sum},
                  {"tilted_sum_se", t.tilted_sum_se},
                  {"contraction", t.contraction},
                  {"contraction_se", t.contraction_se},
                  {"rate", t.rate},
                  {"free_energy_proxy", t.free_energy_proxy},
                  {"direct", t.direct.to_json()},
                  {"direct_rate", t.direct_rate}});
  }
  const auto& p = params;
  return {{"label", label},
          {"params",
           {{"beta", p.beta}, {"d", p.d}, {"n", p.n}, {"N", p.N}, {"q", p.q}, {"gamma_hat", p.gamma_hat},
            {"K", p.K}, {"thetas", p.thetas}, {"epsilon", p.epsilon}, {"M_cost", p.M_cost},
            {"paths_per_start", p.paths_per_start}, {"M_direct", p.M_direct},
            {"truncation_c", p.truncation_c}, {"seed", p.seed}}},
          {"gamma_N", gamma_N},
          {"penalty_threshold", penalty_threshold},
          {"exceed_fraction_untilted", exceed_fraction_untilted},
          {"by_theta", th},
          {"best_theta", by_theta.empty() ? 0.0 : best_theta().theta}};
}

CertificateReport negativity_certificate(const env::EnvironmentModel& model, const CertificateParams& p) {
  if (p.thetas.empty()) throw PreconditionError("certificate needs at least one theta");
  for (double t : p.thetas)
    if (!(t > 0.0 && t < 1.0)) throw PreconditionError("theta must lie in (0, 1)");
  if (p.n < 1) throw PreconditionError("certificate needs n >= 1 blocks");
  if (!(p.epsilon > 0.0)) throw PreconditionError("epsilon must be > 0");
  if (p.M_cost < 2 || p.paths_per_start < 1 || p.M_direct < 2)
    throw PreconditionError("certificate sample sizes are too small");
  chaos::ChaosParams cp;
  cp.q = p.q;
  cp.gamma_hat = p.gamma_hat;
  cp.N = p.N;
  cp.d = p.d;
  cp.block = LatticePoint::origin(p.d);
  cp.K = p.K;
  cp.truncation_c = p.truncation_c;
  cp.validate();

  CertificateReport rep;
  rep.params = p;
  rep.gamma_N = cp.gamma_N();
  rep.penalty_threshold = std::exp(p.K * p.K);

  const std::uint64_t cost_seed = rng::combine(p.seed, 1);
  const std::uint64_t env_seed = rng::combine(p.seed, 2);
  const std::uint64_t walk_seed = rng::combine(p.seed, 3);
  const std::uint64_t direct_seed = rng::combine(p.seed, 4);

  // Untilted exceedance fraction; the cost factor for each theta follows from it.
  const auto cost = chaos::penalty_cost_factor(model, cp, p.M_cost, cost_seed, p.workers);
  rep.exceed_fraction_untilted = cost.exceed_fraction;

  // Exact hitting probabilities P^x(S_N in B_z) for x in the fundamental domain.
  const BoxSpec spec(p.N, p.d);
  const auto kernel = walk::build_kernel_cached(p.d, p.N);
  const auto dom = fundamental_domain(p.d, spec.m());
  const int zr = (p.N + spec.m()) / spec.width() + 1;
  const Box zbox = Box::around(LatticePoint::origin(p.d), zr);
  std::vector<std::vector<double>> hit(dom.size(), std::vector<double>(zbox.count(), 0.0));
  for (std::size_t xi = 0; xi < dom.size(); ++xi)
    zbox.for_each([&](const LatticePoint& z) { hit[xi][zbox.offset(z)] = walk::box_hit_prob(kernel, dom[xi], spec, z); });

  // Tilted samples: path from x, one Q_S field per path, penalty factor at S_N's block.
  const std::size_t P = static_cast<std::size_t>(p.paths_per_start);
  const env::Window window = chaos::chaos_window(cp, 0);
  struct Sample {
    LatticePoint z;
    double g = 1.0;
  };
  const auto samples = parallel_map<Sample>(dom.size() * P, p.workers, [&](std::size_t idx) {
    const LatticePoint& x = dom[idx / P];
    const auto path = walk::sample_path(x, p.N, rng::task_seed(walk_seed, idx));
    const auto field = env::EnvironmentField(model, rng::task_seed(env_seed, idx), window).with_tilt(path, p.beta);
    const double A = chaos::chaos_statistic(field, cp, 0);
    return Sample{spec.block_of(path.end()), std::exp(chaos::penalty(A, p.K))};
  });
  // phi_z(x) = P^x(S_N in B_z) * mean of the penalty factor over samples ending in B_z
  // (1 when no sample got there, which only loosens the bound).
  std::vector<std::vector<double>> phi(dom.size(), std::vector<double>(zbox.count(), 0.0));
  std::vector<std::vector<double>> phi_se(dom.size(), std::vector<double>(zbox.count(), 0.0));
  for (std::size_t xi = 0; xi < dom.size(); ++xi) {
    std::map<ZKey, std::vector<double>> by_z;
    for (std::size_t s = 0; s < P; ++s) {
      const auto& smp = samples[xi * P + s];
      if (zbox.contains(smp.z)) by_z[ZKey{smp.z}].push_back(smp.g);
    }
    zbox.for_each([&](const LatticePoint& z) {
      const std::size_t off = zbox.offset(z);
      const auto it = by_z.find(ZKey{z});
      double c = 1.0, cse = 0.0;
      if (it != by_z.end()) {
        const auto s = summarize(it->second);
        c = s.mean;
        cse = s.se;
      }
      phi[xi][off] = hit[xi][off] * c;
      phi_se[xi][off] = hit[xi][off] * cse;
    });
  }
  // Worst start point per block: max over the domain and the orbit of z.
  std::vector<double> phi_max(zbox.count(), 0.0), phi_max_se(zbox.count(), 0.0), hit_max(zbox.count(), 0.0);
  zbox.for_each([&](const LatticePoint& z) {
    const std::size_t off = zbox.offset(z);
    for (const auto& g : orbit(z)) {
      if (!zbox.contains(g)) continue;
      const std::size_t go = zbox.offset(g);
      for (std::size_t xi = 0; xi < dom.size(); ++xi) {
        if (phi[xi][go] > phi_max[off]) {
          phi_max[off] = phi[xi][go];
          phi_max_se[off] = phi_se[xi][go];
        }
        hit_max[off] = std::max(hit_max[off], hit[xi][go]);
      }
    }
  });

  // Direct samples of log W_{nN}.
  const int n_total = p.n * p.N;
  const LatticePoint o = LatticePoint::origin(p.d);
  const env::Window dwin{n_total, Box::around(o, n_total)};
  const auto log_w = parallel_map<double>(static_cast<std::size_t>(p.M_direct), p.workers, [&](std::size_t i) {
    const env::EnvironmentField field(model, rng::task_seed(direct_seed, i), dwin);
    return partition::log_partition_profile(field, p.beta, n_total, o).back();
  });

  for (double theta : p.thetas) {
    ThetaCertificate t;
    t.theta = theta;
    t.cost_factor = chaos::penalty_cost_from_fraction(cost.exceed_fraction, p.K, theta);
    t.cost_term = std::pow(t.cost_factor, 1.0 - theta);
    // Smallest R with sum_{|z|_1 > R} max_x P^x(S_N in B_z)^theta < epsilon.
    std::vector<std::pair<int, double>> tail_terms;
    zbox.for_each([&](const LatticePoint& z) {
      tail_terms.emplace_back(l1_norm(z), std::pow(hit_max[zbox.offset(z)], theta));
    });
    int R = -1;
    double tail = 0.0;
    for (int r = 0; r <= p.d * zr; ++r) {
      double s = 0.0;
      for (const auto& [n1, v] : tail_terms)
        if (n1 > r) s += v;
      if (s < p.epsilon) {
        R = r;
        tail = s;
        break;
      }
    }
    if (R < 0)
      throw ResourceError("certificate: no R <= " + std::to_string(p.d * zr) + " brings the tail below epsilon (N = " +
                          std::to_string(p.N) + ")");
    t.R = R;
    t.tail_bound = tail;
    double sum = 0.0, var = 0.0;
    zbox.for_each([&](const LatticePoint& z) {
      if (l1_norm(z) > R) return;
      const std::size_t off = zbox.offset(z);
      const double f = phi_max[off];
      if (f <= 0.0) return;
      sum += std::pow(f, theta);
      const double dfdx = theta * std::pow(f, theta - 1.0) * phi_max_se[off];
      var += dfdx * dfdx;
    });
    t.tilted_sum = sum;
    t.tilted_sum_se = std::sqrt(var);
    t.contraction = t.cost_term * (t.tilted_sum + t.tail_bound);
    t.contraction_se = t.cost_term * t.tilted_sum_se;
    t.rate = -std::log(t.contraction);
    t.free_energy_proxy = -t.rate / (p.N * theta);

    std::vector<double> w(log_w.size()), scaled(log_w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      scaled[i] = theta * log_w[i];
      w[i] = std::exp(scaled[i]);
    }
    const auto s = summarize(w);
    t.direct.quantity = "Q[W_{nN}^theta]";
    t.direct.mean = s.mean;
    t.direct.se = s.se;
    t.direct.samples = s.n;
    t.direct.seed = direct_seed;
    t.direct.params = {{"beta", p.beta}, {"theta", theta}, {"n", n_total}, {"d", p.d}};
    t.direct_rate = log_mean_exp(scaled) / (n_total * theta);
    check_jensen(log_w, n_total, theta);
    rep.by_theta.push_back(std::move(t));
  }
  rep.best = 0;
  for (std::size_t k = 1; k < rep.by_theta.size(); ++k)
    if (rep.by_theta[k].contraction < rep.by_theta[rep.best].contraction) rep.best = k;
  return rep;
}

nlohmann::json ConjectureFit::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& u : used) pts.push_back({{"beta", u.beta}, {"p", u.p}, {"se", u.se}});
  return {{"points", pts},
          {"slope", slope},
          {"intercept", intercept},
          {"residuals", residuals},
          {"rms_residual", rms_residual},
          {"r_squared", r_squared},
          {"model_mismatch", model_mismatch},
          {"conjectured_slope", conjectured_slope},
          {"beta_min", beta_min},
          {"beta_max", beta_max},
          {"caveat", caveat}};
}

ConjectureFit conjecture_fit(const std::vector<FitPoint>& points, double lambda_pp0, bool weighted) {
  if (!(lambda_pp0 > 0.0)) throw PreconditionError("lambda''(0) must be > 0");
  ConjectureFit fit;
  for (const auto& pt : points)
    if (pt.beta != 0.0 && pt.p != 0.0 && std::abs(pt.p) > 3.0 * pt.se) fit.used.push_back(pt);
  if (fit.used.size() < 3)
    throw InsufficientData("conjecture_fit: " + std::to_string(fit.used.size()) +
                           " points with |p| > 3 SE; at least 3 are needed");
  const std::size_t n = fit.used.size();
  std::vector<double> x(n), y(n), wt(n, 1.0), rel_se(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = 1.0 / (fit.used[i].beta * fit.used[i].beta);
    y[i] = std::log(std::abs(fit.used[i].p));
    rel_se[i] = fit.used[i].se / std::abs(fit.used[i].p);
    if (weighted && rel_se[i] > 0.0) wt[i] = 1.0 / (rel_se[i] * rel_se[i]);
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wt[i];
    sx += wt[i] * x[i];
    sy += wt[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += wt[i] * (x[i] - mx) * (x[i] - mx);
    sxy += wt[i] * (x[i] - mx) * (y[i] - my);
    syy += wt[i] * (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("conjecture_fit: all usable points share one beta");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    fit.residuals.push_back(r);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(n));
  fit.r_squared = syy > 0.0 ? 1.0 - ss / syy : 1.0;
  std::vector<double> sorted = rel_se;
  std::sort(sorted.begin(), sorted.end());
  const double typical = sorted[n / 2];
  fit.model_mismatch = fit.rms_residual > std::max(1e-6, 2.0 * typical);
  fit.conjectured_slope = -std::numbers::pi / lambda_pp0;
  fit.beta_min = fit.used.front().beta;
  fit.beta_max = fit.used.front().beta;
  for (const auto& u : fit.used) {
    fit.beta_min = std::min(fit.beta_min, u.beta);
    fit.beta_max = std::max(fit.beta_max, u.beta);
  }
  fit.caveat =
      "the conjectured slope describes beta -> 0; at the fitted beta range only the sign of the slope is "
      "informative";
  return fit;
}

ConjectureFit conjecture_fit(const std::vector<FreeEnergyPoint>& points, double lambda_pp0, bool weighted) {
  std::vector<FitPoint> fp;
  for (const auto& p : points) fp.push_back({p.beta, p.p_lower, p.p_lower_se});
  return conjecture_fit(fp, lambda_pp0, weighted);
}

}  // namespace dpre::estimator
