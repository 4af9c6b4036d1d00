#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dpre/env.hpp"
#include "dpre/lattice.hpp"
#include "dpre/stats.hpp"
#include "dpre/walk.hpp"

namespace dpre::chaos {

inline constexpr int kMaxOrder = 5;

struct ChaosParams {
  int q = 2;
  double gamma_hat = 1.0;
  int N = 64;
  int d = 2;
  LatticePoint block = LatticePoint(2);
  double K = 5.0;
  double C1 = 2.0;
  double C2 = 4.0;
  double theta = 0.5;
  // Per-coordinate distance cap ceil(c sqrt(j)) + 1 on the lattice sweep at
  // step j; c <= 0 sweeps the full reachable set.
  double truncation_c = 6.0;

  // gamma_N = gamma_hat / sqrt(log N).
  double gamma_N() const;
  void validate() const;
};

// Single-site constants of the tilted measure at (gamma_N, beta).
struct ChaosConstants {
  double lambda2_pair = 0.0;   // exp(lambda(2g + b) - 2 lambda(g) - lambda(b)) - 1
  double lambda3_cross = 0.0;  // exp(lambda(g + b) - lambda(g) - lambda(b)) - 1
  double m_on = 0.0;           // Q_S[e(g)] - 1 at an on-path site
  double ehat2_on = 0.0;       // Q_S[(e - 1 - m)^2], on-path
  double ehat2_off = 0.0;      // Q_S[(e - 1 - m)^2], off-path
};

ChaosConstants chaos_constants(const env::EnvironmentModel& model, double gamma_N, double beta);

// Field window needed for block epoch ell.
env::Window chaos_window(const ChaosParams& params, int ell = 0);

struct ChaosValue {
  std::vector<double> by_order;  // A^{0..q}; index 0 is the walk mass term
  double lost_mass = 0.0;        // mass cut by truncation, relative to |B|
  double value() const { return by_order.back(); }
};

// A_ell^{k,N} for k = 0..q in one forward sweep:
//   F_k(j, y) = avg F_k(j-1, .) + (e_{j,y}(gamma_N) - 1) avg F_{k-1}(j-1, .),
//   A^k = sqrt(log N) / N * sum_y F_k(N, y),  F_0(0, .) = 1 on B_z.
ChaosValue chaos_orders(const env::EnvironmentField& field, const ChaosParams& params, int ell = 0);
double chaos_statistic(const env::EnvironmentField& field, const ChaosParams& params, int ell = 0);

// Q-hat[A] and Q-hat[A^2] over untilted fields.
EstimateRecord chaos_mean_mc(const env::EnvironmentModel& model, const ChaosParams& params, int M,
                             std::uint64_t seed, int workers = 1);
EstimateRecord chaos_second_moment_mc(const env::EnvironmentModel& model, const ChaosParams& params,
                                      int M, std::uint64_t seed, int workers = 1);

// Both moments from one set of fields (the same fields as the two calls above).
struct ChaosMoments {
  EstimateRecord mean;    // Q-hat[A]
  EstimateRecord second;  // Q-hat[A^2]
};
ChaosMoments chaos_moments_mc(const env::EnvironmentModel& model, const ChaosParams& params, int M,
                              std::uint64_t seed, int workers = 1);

// f_K(x) = -K 1{x > exp(K^2)}.
double penalty(double x, double K);
// g = exp(sum_k f_K(A_k)).
double g_product(std::span<const double> values, double K);

struct PenaltyCost {
  EstimateRecord factor;       // Q-hat[exp(-theta/(1-theta) f_K(A))]
  double exceed_fraction = 0;  // fraction of samples with A > exp(K^2)
  bool within_bound = false;   // factor <= 2
};

PenaltyCost penalty_cost_factor(const env::EnvironmentModel& model, const ChaosParams& params, int M,
                                std::uint64_t seed, int workers = 1);

// Cost factor for another theta from the same exceedance fraction.
double penalty_cost_from_fraction(double exceed_fraction, double K, double theta);

enum class XReading {
  box_anchored,  // first kernel runs from the box point y to S_{j_1}
  verbatim,      // first kernel anchored at S_0; the y-sum only multiplies by |B|
};

// X = (1/N) sum_{y in B_0} sum_{0<j_1<...<j_q<=N} p_{j_1}(y, S_{j_1}) prod p(S_{j_i}, S_{j_{i+1}}).
double x_statistic(const walk::WalkPath& path, int q, int N, const walk::KernelTable& kernel,
                   XReading reading = XReading::box_anchored);

// L = (1/N) sum_{j_1<...<j_q} 1{|S_{j_1} - S_0| < C2 sqrt(j_1)}
//       prod 1{|S_{j_{i+1}} - S_{j_i}| < C2 sqrt(gap)} / gap,
// with |.| the Euclidean norm.
// C2 = +inf switches every indicator on, giving D_N^q.
double l_statistic(const walk::WalkPath& path, int q, int N, double C2);

struct C2Calibration {
  double C2 = 0.0;
  double probability = 0.0;
  bool achieved = false;
  std::vector<std::pair<double, double>> scanned;  // (C2, P(L >= D/2))
};

C2Calibration calibrate_c2(int q, int N, int walks, std::uint64_t seed, int d = 2,
                           std::vector<double> grid = {1, 2, 4, 8}, double target = 0.9);

// Q_S[A_0] = sqrt(log N) * lambda3_cross^q * X.
double tilted_chaos_mean_formula(const env::EnvironmentModel& model, const ChaosParams& params,
                                 double beta, const walk::WalkPath& path,
                                 const walk::KernelTable& kernel);

// Mean and variance of A_0 over fields tilted along path (Q_S samples).
EstimateRecord tilted_chaos_mean_mc(const env::EnvironmentModel& model, const ChaosParams& params,
                                    double beta, const walk::WalkPath& path, int M,
                                    std::uint64_t seed, int workers = 1);
EstimateRecord tilted_chaos_variance_mc(const env::EnvironmentModel& model,
                                        const ChaosParams& params, double beta,
                                        const walk::WalkPath& path, int M, std::uint64_t seed,
                                        int workers = 1);

enum class VMethod { adjoint, per_start };

// V^N = sqrt(log N)/N * sum_{y in B_0} (W_N^y(gamma_N) - 1).
double v_statistic(const env::EnvironmentField& field, double gamma_hat, int N,
                   VMethod method = VMethod::adjoint);

// Q[(V^N)^2] from the difference walk of two independent walks.
double v_second_moment_exact(const env::EnvironmentModel& model, double gamma_hat, int N, int d = 2);

// Same quantity by first-collision decomposition against the renewal sums;
// shares no code with the difference-walk sweep.
double v_second_moment_renewal(const env::EnvironmentModel& model, double gamma_hat, int N, int d = 2);

// (log N / N) (E_{S'}^x[w^{I(S,S')}] - 1), x = S_0,
// w = exp(lambda(g_N + b_N) - lambda(g_N) - lambda(b_N)).
double v_tilted_mean(const env::EnvironmentModel& model, double beta_hat, double gamma_hat, int N,
                     const walk::WalkPath& path);

// Q_S[V^N] = sqrt(log N)/N * sum_{y in B_0} (E_{S'}^y[w^{I(S,S')}] - 1).
double v_tilted_mean_full(const env::EnvironmentModel& model, double beta_hat, double gamma_hat,
                          int N, const walk::WalkPath& path);

}  // namespace dpre::chaos
