#include "dpre/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vexp.hpp"

namespace dpre::env {
namespace {

double log_sum_exp_weighted(const std::vector<double>& values, const std::vector<double>& probs,
                            double beta) {
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k)
    if (probs[k] > 0) shift = std::max(shift, beta * values[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (probs[k] > 0) s += probs[k] * std::exp(beta * values[k] - shift);
  return shift + std::log(s);
}

std::vector<double> cumulate(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  std::partial_sum(p.begin(), p.end(), c.begin());
  c.back() = 1.0;
  return c;
}

std::size_t pick(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

double standard_normal(std::uint64_t h) {
  double z;
  detail::gaussian_from_hash(&h, 1, &z);
  return z;
}

}  // namespace

EnvironmentModel EnvironmentModel::gaussian_unit() {
  EnvironmentModel m;
  m.family_ = Family::gaussian_unit;
  return m;
}

EnvironmentModel EnvironmentModel::rademacher() {
  EnvironmentModel m;
  m.family_ = Family::rademacher;
  m.values_ = {-1.0, 1.0};
  m.probs_ = {0.5, 0.5};
  m.cumulative_ = {0.5, 1.0};
  return m;
}

EnvironmentModel EnvironmentModel::finite_discrete(std::vector<double> values,
                                                   std::vector<double> probabilities) {
  if (values.empty() || values.size() != probabilities.size())
    throw PreconditionError("finite-discrete model needs matching, nonempty values and probabilities");
  double total = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) throw PreconditionError("finite-discrete values must be finite");
    if (!(probabilities[k] >= 0.0)) throw PreconditionError("finite-discrete probabilities must be nonnegative");
    total += probabilities[k];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw PreconditionError("finite-discrete probabilities must sum to 1 (got " + std::to_string(total) + ")");
  EnvironmentModel m;
  m.family_ = Family::finite_discrete;
  m.values_ = std::move(values);
  m.probs_ = std::move(probabilities);
  m.cumulative_ = cumulate(m.probs_);
  if (!(lambda_pp0(m) > 0.0))
    throw PreconditionError("finite-discrete model must have positive variance");
  return m;
}

std::string EnvironmentModel::name() const {
  switch (family_) {
    case Family::gaussian_unit: return "gaussian-unit";
    case Family::rademacher: return "rademacher";
    case Family::finite_discrete: return "finite-discrete";
  }
  return "unknown";
}

nlohmann::json EnvironmentModel::to_json() const {
  nlohmann::json j;
  j["family"] = name();
  if (family_ == Family::finite_discrete) {
    j["values"] = values_;
    j["probabilities"] = probs_;
  }
  return j;
}

EnvironmentModel EnvironmentModel::from_json(const nlohmann::json& j) {
  const auto family = j.at("family").get<std::string>();
  if (family == "gaussian-unit" || family == "gaussian") return gaussian_unit();
  if (family == "rademacher") return rademacher();
  if (family == "finite-discrete" || family == "discrete")
    return finite_discrete(j.at("values").get<std::vector<double>>(),
                           j.at("probabilities").get<std::vector<double>>());
  throw PreconditionError("unknown environment family '" + family + "'");
}

double EnvironmentModel::draw(std::uint64_t h) const {
  switch (family_) {
    case Family::gaussian_unit: return standard_normal(h);
    case Family::rademacher: return (h >> 63) ? 1.0 : -1.0;
    case Family::finite_discrete: return values_[pick(cumulative_, rng::to_unit(h))];
  }
  return 0.0;
}

double cumulant(const EnvironmentModel& model, double beta) {
  if (!std::isfinite(beta)) throw PreconditionError("cumulant: beta must be finite");
  switch (model.family()) {
    case Family::gaussian_unit: return 0.5 * beta * beta;
    case Family::rademacher: {
      // log cosh, stable for large |beta|.
      const double a = std::abs(beta);
      return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    }
    case Family::finite_discrete:
      if (beta == 0.0) return 0.0;
      return log_sum_exp_weighted(model.values(), model.probabilities(), beta);
  }
  return 0.0;
}

double lambda_pp0(const EnvironmentModel& model) {
  switch (model.family()) {
    case Family::gaussian_unit:
    case Family::rademacher: return 1.0;
    case Family::finite_discrete: {
      const auto& v = model.values();
      const auto& p = model.probabilities();
      double mean = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) mean += p[k] * v[k];
      double var = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) var += p[k] * (v[k] - mean) * (v[k] - mean);
      return var;
    }
  }
  return 0.0;
}

double log_e_weight(const EnvironmentModel& model, double beta, double eta) {
  return beta * eta - cumulant(model, beta);
}

double e_weight(const EnvironmentModel& model, double beta, double eta) {
  return std::exp(log_e_weight(model, beta, eta));
}

TiltedLaw::TiltedLaw(const EnvironmentModel& base, double beta) : base_(base), beta_(beta) {
  if (!std::isfinite(beta)) throw PreconditionError("tilted law: beta must be finite");
  if (base.family() == Family::gaussian_unit) return;
  const double lam = cumulant(base, beta);
  const auto& v = base.values();
  const auto& p = base.probabilities();
  probs_.resize(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) probs_[k] = p[k] * std::exp(beta * v[k] - lam);
  const double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  for (auto& q : probs_) q /= total;
  cumulative_ = cumulate(probs_);
}

double TiltedLaw::draw(std::uint64_t h) const {
  if (base_.family() == Family::gaussian_unit) return beta_ + standard_normal(h);
  return base_.values()[pick(cumulative_, rng::to_unit(h))];
}

double TiltedLaw::mean() const {
  if (base_.family() == Family::gaussian_unit) return beta_;
  double m = 0.0;
  for (std::size_t k = 0; k < probs_.size(); ++k) m += probs_[k] * base_.values()[k];
  return m;
}

double TiltedLaw::variance() const {
  if (base_.family() == Family::gaussian_unit) return 1.0;
  const double m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < probs_.size(); ++k)
    v += probs_[k] * (base_.values()[k] - m) * (base_.values()[k] - m);
  return v;
}

EnvironmentField::EnvironmentField(EnvironmentModel model, std::uint64_t seed, Window window)
    : model_(std::move(model)), seed_(seed), window_(window) {
  if (window_.n_max < 1) throw PreconditionError("environment window needs n_max >= 1");
  for (int k = 0; k < window_.space.d; ++k)
    if (window_.space.lo[k] > window_.space.hi[k]) throw PreconditionError("empty environment window");
  env_key_ = rng::stream_key(seed, rng::Stream::environment);
  tilt_key_ = rng::stream_key(seed, rng::Stream::tilt);
}

EnvironmentField EnvironmentField::from_table(EnvironmentModel model, Window window,
                                              std::vector<double> values) {
  EnvironmentField f(std::move(model), 0, window);
  const std::size_t expected = static_cast<std::size_t>(window.n_max) * window.space.count();
  if (values.size() != expected)
    throw PreconditionError("environment table has " + std::to_string(values.size()) +
                            " values, window needs " + std::to_string(expected));
  f.table_ = std::make_shared<const std::vector<double>>(std::move(values));
  return f;
}

EnvironmentField EnvironmentField::constant(EnvironmentModel model, Window window, double value) {
  const std::size_t n = static_cast<std::size_t>(window.n_max) * window.space.count();
  return from_table(std::move(model), window, std::vector<double>(n, value));
}

EnvironmentField EnvironmentField::with_tilt(walk::WalkPath path, double beta) const {
  if (path.dim() != dim()) throw PreconditionError("tilt path dimension differs from the field");
  EnvironmentField f = *this;
  f.tilt_ = std::make_shared<const Tilt>(Tilt{std::move(path), TiltedLaw(model_, beta)});
  return f;
}

EnvironmentField EnvironmentField::shifted(int m) const {
  if (m < 0) throw PreconditionError("environment shift must be nonnegative");
  if (table_) throw PreconditionError("table fixtures cannot be shifted");
  EnvironmentField f = *this;
  f.time_offset_ += m;
  return f;
}

std::uint64_t EnvironmentField::row_key(std::uint64_t stream, int i, const LatticePoint& p) const {
  std::uint64_t h = rng::combine(stream, rng::as_word(i + time_offset_));
  for (int k = 0; k + 1 < p.d; ++k) h = rng::combine(h, rng::as_word(p.x[k]));
  return h;
}

double EnvironmentField::base_value(int i, const LatticePoint& x) const {
  if (table_) {
    const std::size_t off = static_cast<std::size_t>(i - 1) * window_.space.count() + window_.space.offset(x);
    return (*table_)[off];
  }
  const std::uint64_t h = rng::mix64(row_key(env_key_, i, x) + rng::kGolden * rng::as_word(x.x[x.d - 1]));
  return model_.draw(h);
}

double EnvironmentField::eta_at(int i, const LatticePoint& x) const {
  if (x.d != dim() || i < 1 || i > window_.n_max || !window_.space.contains(x)) {
    throw WindowViolation("eta(" + std::to_string(i) + ", " + x.str() + ") outside window [1, " +
                          std::to_string(window_.n_max) + "] x " + window_.space.str());
  }
  if (tilt_ && i <= tilt_->path.length() && tilt_->path[i] == x) {
    const std::uint64_t h =
        rng::mix64(row_key(tilt_key_, i, x) + rng::kGolden * rng::as_word(x.x[x.d - 1]));
    return tilt_->law.draw(h);
  }
  return base_value(i, x);
}

void EnvironmentField::require(int t_lo, int t_hi, const Box& b) const {
  if (!window_.covers(t_lo, t_hi, b)) {
    throw WindowViolation("computation needs times [" + std::to_string(t_lo) + ", " + std::to_string(t_hi) +
                          "] x " + b.str() + " but the field window is [1, " +
                          std::to_string(window_.n_max) + "] x " + window_.space.str());
  }
}

void EnvironmentField::fill_row(int i, const LatticePoint& row_start, int count, int step, double* out) const {
  const int d = row_start.d;
  if (table_) {
    LatticePoint p = row_start;
    const std::size_t base = static_cast<std::size_t>(i - 1) * window_.space.count();
    for (int k = 0; k < count; ++k, p.x[d - 1] += step) out[k] = (*table_)[base + window_.space.offset(p)];
  } else {
    thread_local std::vector<std::uint64_t> hashes;
    if (hashes.size() < static_cast<std::size_t>(count)) hashes.resize(static_cast<std::size_t>(count));
    detail::hash_row(row_key(env_key_, i, row_start), row_start.x[d - 1], step, count, hashes.data());
    switch (model_.family()) {
      case Family::gaussian_unit:
        detail::gaussian_from_hash(hashes.data(), count, out);
        break;
      case Family::rademacher:
        for (int k = 0; k < count; ++k) out[k] = (hashes[static_cast<std::size_t>(k)] >> 63) ? 1.0 : -1.0;
        break;
      case Family::finite_discrete:
        for (int k = 0; k < count; ++k) out[k] = model_.draw(hashes[static_cast<std::size_t>(k)]);
        break;
    }
  }
  if (tilt_ && i <= tilt_->path.length()) {
    const LatticePoint& s = tilt_->path[i];
    bool same_row = true;
    for (int k = 0; k + 1 < d; ++k) same_row = same_row && s.x[k] == row_start.x[k];
    const int off = s.x[d - 1] - row_start.x[d - 1];
    if (same_row && off >= 0 && off % step == 0 && off / step < count) {
      const std::uint64_t h =
          rng::mix64(row_key(tilt_key_, i, s) + rng::kGolden * rng::as_word(s.x[d - 1]));
      out[off / step] = tilt_->law.draw(h);
    }
  }
}

}  // namespace dpre::env
