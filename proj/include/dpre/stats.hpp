#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace dpre {

// A Monte Carlo estimate with its provenance.
struct EstimateRecord {
  std::string quantity;
  double mean = 0.0;
  double se = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
    else comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Fixed-shape binary tree reduction; the result depends only on the input
// order.
double pairwise_sum(std::span<const double> v);

struct SampleSummary {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se = 0.0;
  std::size_t n = 0;
};

SampleSummary summarize(std::span<const double> v);

// Standard error of the unbiased sample variance, (mu4 - s^4) / n under the
// plug-in fourth central moment.
double variance_se(std::span<const double> v);

// log(mean(exp(v))).
double log_mean_exp(std::span<const double> v);

// Throws JensenViolation unless
//   mean(log_w) / n <= log(mean(w^theta)) / (n theta) + 1e-12.
// Returns the slack.
double check_jensen(std::span<const double> log_w, int n, double theta);

// Process-wide tally of check_jensen calls and the smallest slack seen.
struct JensenTally {
  std::size_t checks = 0;
  double min_slack = 0.0;
};
JensenTally jensen_tally();

// Workers pull indices from a shared counter and write into a slot per
// index, so the output never depends on `workers`.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, int workers, Fn&& fn) {
  std::vector<T> out(count);
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n = static_cast<std::size_t>(workers) < count ? static_cast<std::size_t>(workers) : count;
  pool.reserve(n);
  for (std::size_t w = 0; w < n; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

int default_workers();

}  // namespace dpre
