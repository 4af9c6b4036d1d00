#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpre/env.hpp"
#include "dpre/stats.hpp"

namespace dpre::moments {

// Lambda_1(beta) = exp(lambda(2 beta) - 2 lambda(beta)) - 1.
double lambda1(const env::EnvironmentModel& model, double beta);

struct MomentOptions {
  int max_N = 1 << 16;
};

// Q[W_N^2(beta)] through the renewal recursion
//   z_0 = 1,  z_n = Lambda_1 sum_{m<n} z_m r_{n-m},  Q[W_N^2] = sum_{n<=N} z_n.
double second_moment_exact(const env::EnvironmentModel& model, double beta, int N, int d,
                           const MomentOptions& opts = {});

// Same recursion with an explicit overlap weight Lambda; returns the partial
// sums Y(0..N), Y(k) = E[(1 + Lambda)^{#overlaps up to k}].
std::vector<double> overlap_generating_sums(double big_lambda, int N, int d);

// Enumerates all (2d)^{2N} path pairs. Refuses N > 6 or more than 2^31 pairs.
double second_moment_bruteforce(const env::EnvironmentModel& model, double beta, int N, int d);

struct MomentScanRecord {
  int d = 2;
  std::string family;
  double beta_hat = 0.0;
  int N = 0;
  double beta_N = 0.0;
  double lambda1 = 0.0;
  double second_moment = 0.0;
};

struct MomentScan {
  std::vector<MomentScanRecord> records;
  double threshold = 0.0;  // sqrt(pi / lambda''(0))
  std::string verdict;     // bounded | diverging | near-threshold
  double loglog_slope = 0.0;
};

// Relative half-width of the band around the threshold reported as
// "near-threshold".
inline constexpr double kNearThresholdBand = 0.01;

MomentScan intermediate_scan(const env::EnvironmentModel& model, double beta_hat,
                             const std::vector<int>& N_grid, int d = 2,
                             const MomentOptions& opts = {}, int workers = 1);

// D_N^q = (1/N) sum_{j_1<...<j_q<=N} prod 1/(j_{i+1} - j_i).
double dnq(int N, int q);

struct FractionalMomentEstimate {
  EstimateRecord w_theta;       // Q-hat[W_n^theta]
  double certificate = 0.0;     // log(Q-hat[W_n^theta]) / (n theta)
  double mean_log_w_over_n = 0.0;
  double jensen_slack = 0.0;
};

FractionalMomentEstimate fractional_moment_mc(const env::EnvironmentModel& model, double beta,
                                              double theta, int n, int M, std::uint64_t seed,
                                              int d = 2, int workers = 1);

}  // namespace dpre::moments
