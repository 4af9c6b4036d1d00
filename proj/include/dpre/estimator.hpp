#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpre/chaos.hpp"
#include "dpre/env.hpp"
#include "dpre/stats.hpp"

namespace dpre::estimator {

struct ProfileEntry {
  int n = 0;
  double mean = 0.0;  // Q-hat[log W_n] / n
  double se = 0.0;
};

struct FreeEnergyPoint {
  double beta = 0.0;
  int d = 2;
  std::vector<int> n_schedule;
  int M = 0;
  std::uint64_t seed = 0;
  std::vector<ProfileEntry> profile;
  double p_lower = 0.0;  // largest-n profile value
  double p_lower_se = 0.0;
  double certificate = 0.0;  // log(Q-hat[W_n^theta]) / (n theta) at the largest n
  double theta = 0.5;
  double jensen_slack = 0.0;  // smallest slack over the profile
  bool non_monotone = false;

  nlohmann::json to_json() const;
};

FreeEnergyPoint free_energy_lower(const env::EnvironmentModel& model, double beta, int d,
                                  const std::vector<int>& n_schedule, int M, std::uint64_t seed,
                                  double theta = 0.5, int workers = 1);

// beta = C1 (log N)^{-(q-1)/(2q)}.
double beta_of_N(double C1, int q, long long N);
// N = floor(exp((C1 / beta)^{2q/(q-1)})).
long long N_of_beta(double C1, int q, double beta);

struct CertificateParams {
  double beta = 2.0;
  int d = 2;
  int n = 4;  // blocks
  int N = 64;
  int q = 2;
  double gamma_hat = 1.0;
  double K = 5.0;
  std::vector<double> thetas = {0.25, 0.5, 0.75};
  double epsilon = 0.01;
  int M_cost = 1000;          // untilted chaos samples for the penalty cost
  int paths_per_start = 64;   // tilted samples per start point of B_0
  int M_direct = 200;         // samples of W_{nN} for the direct estimate
  double truncation_c = 6.0;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct ThetaCertificate {
  double theta = 0.0;
  double cost_factor = 0.0;      // Q-hat[exp(-theta/(1-theta) f_K(A))]
  double cost_term = 0.0;        // cost_factor^(1-theta)
  int R = 0;                     // blocks with |z| <= R estimated by Monte Carlo
  double tail_bound = 0.0;       // sum_{|z|>R} max_x P^x(S_N in B_z)^theta
  double tilted_sum = 0.0;       // sum_{|z|<=R} phi_z^theta
  double tilted_sum_se = 0.0;
  double contraction = 0.0;      // cost_term * (tilted_sum + tail_bound)
  double contraction_se = 0.0;
  double rate = 0.0;             // -log contraction
  double free_energy_proxy = 0.0;  // -rate / (N theta)
  EstimateRecord direct;         // Q-hat[W_{nN}^theta]
  double direct_rate = 0.0;      // log(direct) / (n N theta)
};

struct CertificateReport {
  CertificateParams params;
  double gamma_N = 0.0;
  double penalty_threshold = 0.0;  // exp(K^2)
  double exceed_fraction_untilted = 0.0;
  std::vector<ThetaCertificate> by_theta;
  std::size_t best = 0;
  std::string label = "finite-sample certificate proxy (Monte Carlo, finite n); not a rigorous bound";

  const ThetaCertificate& best_theta() const { return by_theta[best]; }
  nlohmann::json to_json() const;
};

CertificateReport negativity_certificate(const env::EnvironmentModel& model,
                                         const CertificateParams& params);

struct FitPoint {
  double beta = 0.0;
  double p = 0.0;
  double se = 0.0;
};

struct ConjectureFit {
  std::vector<FitPoint> used;
  double slope = 0.0;      // d log|p| / d beta^{-2}
  double intercept = 0.0;
  std::vector<double> residuals;
  double rms_residual = 0.0;
  double r_squared = 0.0;
  bool model_mismatch = false;
  double conjectured_slope = 0.0;  // -pi / lambda''(0)
  double beta_min = 0.0;
  double beta_max = 0.0;
  std::string caveat;

  nlohmann::json to_json() const;
};

// Least squares of log|p| against beta^{-2} over points with |p| > 3 SE.
ConjectureFit conjecture_fit(const std::vector<FitPoint>& points, double lambda_pp0 = 1.0,
                             bool weighted = false);
ConjectureFit conjecture_fit(const std::vector<FreeEnergyPoint>& points, double lambda_pp0 = 1.0,
                             bool weighted = false);

}  // namespace dpre::estimator
