#include "dpre/stats.hpp"

#include <algorithm>
#include <limits>

#include "dpre/error.hpp"

namespace dpre {
namespace {

std::mutex tally_mutex;
JensenTally tally{0, std::numeric_limits<double>::infinity()};

double pairwise(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise(v, h) + pairwise(v + h, n - h);
}

}  // namespace

nlohmann::json EstimateRecord::to_json() const {
  return {{"quantity", quantity}, {"mean", mean}, {"se", se}, {"samples", samples}, {"seed", seed}, {"params", params}};
}

double pairwise_sum(std::span<const double> v) { return pairwise(v.data(), v.size()); }

SampleSummary summarize(std::span<const double> v) {
  SampleSummary s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return s;
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - s.mean) * (v[i] - s.mean);
  s.variance = pairwise_sum(dev) / static_cast<double>(v.size() - 1);
  s.se = std::sqrt(s.variance / static_cast<double>(v.size()));
  return s;
}

double variance_se(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double mean = pairwise_sum(v) / static_cast<double>(n);
  std::vector<double> d2(n), d4(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - mean;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  const double m2 = pairwise_sum(d2) / static_cast<double>(n);
  const double m4 = pairwise_sum(d4) / static_cast<double>(n);
  return std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(n));
}

double log_mean_exp(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("log_mean_exp of an empty sample");
  const double shift = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(shift)) return shift;
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] - shift);
  return shift + std::log(pairwise_sum(e) / static_cast<double>(v.size()));
}

double check_jensen(std::span<const double> log_w, int n, double theta) {
  if (log_w.empty()) throw PreconditionError("check_jensen on an empty sample");
  const double mean_log = pairwise_sum(log_w) / static_cast<double>(log_w.size());
  std::vector<double> scaled(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) scaled[i] = theta * log_w[i];
  const double frac = log_mean_exp(scaled) / (n * theta);
  const double slack = frac - mean_log / n;
  {
    std::lock_guard lock(tally_mutex);
    ++tally.checks;
    tally.min_slack = std::min(tally.min_slack, slack);
  }
  if (slack < -1e-12)
    throw JensenViolation("Jensen ordering violated: mean(log W)/n = " + std::to_string(mean_log / n) +
                          " exceeds log(mean W^theta)/(n theta) = " + std::to_string(frac));
  return slack;
}

JensenTally jensen_tally() {
  std::lock_guard lock(tally_mutex);
  return tally;
}

int default_workers() {
  const unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 1 : static_cast<int>(h);
}

}  // namespace dpre
