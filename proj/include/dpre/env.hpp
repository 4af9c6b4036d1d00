#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpre/lattice.hpp"
#include "dpre/rng.hpp"
#include "dpre/walk.hpp"

namespace dpre::env {

enum class Family { gaussian_unit, rademacher, finite_discrete };

// Law of a single disorder variable eta. Only families with a closed-form
// log moment generating function are representable.
class EnvironmentModel {
 public:
  static EnvironmentModel gaussian_unit();
  static EnvironmentModel rademacher();
  static EnvironmentModel finite_discrete(std::vector<double> values, std::vector<double> probabilities);

  Family family() const { return family_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probabilities() const { return probs_; }
  std::string name() const;

  // {family, values?, probabilities?}
  nlohmann::json to_json() const;
  static EnvironmentModel from_json(const nlohmann::json& j);

  // Draw eta from a uniformly distributed 64-bit word.
  double draw(std::uint64_t h) const;

 private:
  EnvironmentModel() = default;

  Family family_ = Family::gaussian_unit;
  std::vector<double> values_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

// lambda(beta) = log Q[exp(beta eta)].
double cumulant(const EnvironmentModel& model, double beta);

// lambda''(0), the variance of eta.
double lambda_pp0(const EnvironmentModel& model);

// e(beta) = exp(beta eta - lambda(beta)); Q-mean one.
double e_weight(const EnvironmentModel& model, double beta, double eta);
double log_e_weight(const EnvironmentModel& model, double beta, double eta);

// Law with density e(beta) against the base law: the single-site marginal of
// the path-tilted measure at an on-path site.
class TiltedLaw {
 public:
  TiltedLaw(const EnvironmentModel& base, double beta);

  double beta() const { return beta_; }
  double draw(std::uint64_t h) const;
  double mean() const;
  double variance() const;
  // Atom masses for discrete families (empty for the Gaussian).
  const std::vector<double>& probabilities() const { return probs_; }
  const std::vector<double>& values() const { return base_.values(); }

 private:
  EnvironmentModel base_;
  double beta_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

// Time range [1, n_max] times an axis-aligned spatial box.
struct Window {
  int n_max = 0;
  Box space;

  bool covers(int t_lo, int t_hi, const Box& b) const {
    return t_lo >= 1 && t_hi <= n_max && space.contains(b);
  }
};

// A reproducible realization eta(i, x) on a window. Values are a pure
// function of (seed, i, x); nothing is stored except for table fixtures.
class EnvironmentField {
 public:
  EnvironmentField(EnvironmentModel model, std::uint64_t seed, Window window);

  // Explicit values, laid out time-major then row-major over window.space.
  static EnvironmentField from_table(EnvironmentModel model, Window window, std::vector<double> values);
  static EnvironmentField constant(EnvironmentModel model, Window window, double value);

  // Q_S realization: eta(i, S_i) for 1 <= i <= path.length() drawn from the
  // tilted law, all other sites shared with this field.
  EnvironmentField with_tilt(walk::WalkPath path, double beta) const;

  // theta_m: eta'(i, x) = eta(i + m, x).
  EnvironmentField shifted(int m) const;

  const EnvironmentModel& model() const { return model_; }
  std::uint64_t seed() const { return seed_; }
  const Window& window() const { return window_; }
  int dim() const { return window_.space.d; }
  bool tilted() const { return tilt_ != nullptr; }

  double eta_at(int i, const LatticePoint& x) const;

  // Throws WindowViolation unless times [t_lo, t_hi] and box b are covered.
  void require(int t_lo, int t_hi, const Box& b) const;

  // eta at row_start + k * step * e_{d-1}, k < count. No window check.
  void fill_row(int i, const LatticePoint& row_start, int count, int step, double* out) const;

 private:
  struct Tilt {
    walk::WalkPath path;
    TiltedLaw law;
  };

  std::uint64_t row_key(std::uint64_t stream, int i, const LatticePoint& p) const;
  double base_value(int i, const LatticePoint& x) const;

  EnvironmentModel model_;
  std::uint64_t seed_ = 0;
  Window window_;
  int time_offset_ = 0;
  std::uint64_t env_key_ = 0;
  std::uint64_t tilt_key_ = 0;
  std::shared_ptr<const std::vector<double>> table_;
  std::shared_ptr<const Tilt> tilt_;
};

}  // namespace dpre::env
