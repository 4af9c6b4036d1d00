#include "dpre/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpre/chaos.hpp"
#include "dpre/error.hpp"
#include "dpre/estimator.hpp"
#include "dpre/moments.hpp"
#include "dpre/partition.hpp"
#include "dpre/rng.hpp"
#include "dpre/stats.hpp"
#include "dpre/walk.hpp"

namespace dpre::cli {

namespace {

using nlohmann::json;

const std::vector<std::string> kCommands = {"free-energy", "second-moment", "chaos",
                                            "certificate", "conjecture",    "oracle"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string num(int v) { return std::to_string(v); }
std::string num(bool v) { return v ? "1" : "0"; }

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

std::string prefix_of(const RunConfig& cfg) {
  return cfg.output.empty() ? "dpre_" + cfg.command : cfg.output;
}

void write_outputs(const RunConfig& cfg, const Table& table, const json& results, std::ostream& log) {
  const std::string prefix = prefix_of(cfg);
  const json config = cfg.to_json();
  {
    std::ofstream f(prefix + ".csv");
    if (!f) throw PreconditionError("output: cannot write " + prefix + ".csv");
    f << "# " << kVersion << "\n";
    f << "# config: " << config.dump() << "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c) f << (c ? "," : "") << table.columns[c];
    f << "\n";
    for (const auto& r : table.rows) {
      for (std::size_t c = 0; c < r.size(); ++c) f << (c ? "," : "") << r[c];
      f << "\n";
    }
  }
  {
    std::ofstream f(prefix + ".json");
    if (!f) throw PreconditionError("output: cannot write " + prefix + ".json");
    json report{{"version", kVersion}, {"config", config}, {"results", results}};
    f << report.dump(2) << "\n";
  }
  log << "wrote " << prefix << ".csv and " << prefix << ".json\n";
}

// Rough count of lattice-site updates; compared against cfg.max_work.
double free_energy_work(const RunConfig& cfg) {
  if (cfg.n.empty()) return 0.0;
  const double n = *std::max_element(cfg.n.begin(), cfg.n.end());
  return cfg.samples * n * std::pow(n + 1.0, cfg.d);
}

double chaos_work(const RunConfig& cfg, int N, long long samples) {
  const double side = std::sqrt(N) + 2.0 * (cfg.truncation_c > 0.0 ? cfg.truncation_c * std::sqrt(N) + 1 : N);
  return static_cast<double>(samples) * N * std::pow(std::min(side, 2.0 * N + std::sqrt(N)), cfg.d) * (cfg.q + 1);
}

void require_work(const RunConfig& cfg, double work, const std::string& what) {
  if (work > cfg.max_work)
    throw ResourceError(what + ": estimated work " + num(work) + " exceeds max_work = " + num(cfg.max_work));
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = -INFINITY;
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// ---- oracle suite -----------------------------------------------------------

struct OracleRow {
  std::string check;
  std::string label;
  double fast = 0.0;
  double oracle = 0.0;
  double tol = 0.0;  // relative, with absolute floor at magnitude 1
  bool pass() const { return std::abs(fast - oracle) <= tol * std::max(1.0, std::abs(oracle)); }
};

// W_n from all (2d)^n paths.
double brute_partition(const env::EnvironmentField& field, double beta, int n) {
  const int d = field.dim();
  const double lam = env::cumulant(field.model(), beta);
  double total = 0.0;
  long count = 0;
  std::vector<LatticePoint> pos(static_cast<std::size_t>(n) + 1, LatticePoint::origin(d));
  std::function<void(int, double)> rec = [&](int i, double h) {
    if (i == n) {
      total += std::exp(beta * h - n * lam);
      ++count;
      return;
    }
    for (int k = 0; k < d; ++k)
      for (int s : {1, -1}) {
        LatticePoint y = pos[static_cast<std::size_t>(i)];
        y[k] += s;
        pos[static_cast<std::size_t>(i) + 1] = y;
        rec(i + 1, h + field.eta_at(i + 1, y));
      }
  };
  rec(0, 0.0);
  return total / static_cast<double>(count);
}

// Q[(V^N)^2] over all pairs of N-step walks from every pair of box starts.
double brute_v_second_moment(const env::EnvironmentModel& model, double gamma_hat, int N, int d) {
  const double gN = gamma_hat / std::sqrt(std::log(static_cast<double>(N)));
  const double L1 = moments::lambda1(model, gN);
  const BoxSpec spec(N, d);
  const Box B = spec.range(LatticePoint::origin(d));
  std::vector<walk::WalkPath> paths;
  std::vector<LatticePoint> pos(static_cast<std::size_t>(N) + 1, LatticePoint::origin(d));
  std::function<void(int)> rec = [&](int i) {
    if (i == N) {
      paths.emplace_back(pos);
      return;
    }
    for (int k = 0; k < d; ++k)
      for (int s : {1, -1}) {
        LatticePoint y = pos[static_cast<std::size_t>(i)];
        y[k] += s;
        pos[static_cast<std::size_t>(i) + 1] = y;
        rec(i + 1);
      }
  };
  rec(0);
  double total = 0.0;
  B.for_each([&](const LatticePoint& a) {
    B.for_each([&](const LatticePoint& b) {
      double s = 0.0;
      for (const auto& p : paths)
        for (const auto& r : paths) {
          long I = 0;
          for (int i = 1; i <= N; ++i) I += (p[i] + a) == (r[i] + b);
          s += std::pow(1.0 + L1, static_cast<double>(I)) - 1.0;
        }
      total += s / (static_cast<double>(paths.size()) * static_cast<double>(paths.size()));
    });
  });
  return std::log(static_cast<double>(N)) / (static_cast<double>(N) * N) * total;
}

// A^{1,N} as the explicit single sum
// sqrt(log N)/N sum_{y in B} sum_j sum_x p_j(y, x) (e_{j,x} - 1).
double single_sum_chaos(const env::EnvironmentField& field, const chaos::ChaosParams& p) {
  const auto kernel = walk::build_kernel(p.d, p.N);
  const double gN = p.gamma_N();
  const Box B = BoxSpec(p.N, p.d).range(p.block);
  double total = 0.0;
  B.for_each([&](const LatticePoint& y) {
    for (int j = 1; j <= p.N; ++j)
      Box::around(y, j).for_each([&](const LatticePoint& x) {
        const double pj = kernel.prob(j, y, x);
        if (pj > 0.0) total += pj * (env::e_weight(field.model(), gN, field.eta_at(j, x)) - 1.0);
      });
  });
  return std::sqrt(std::log(static_cast<double>(p.N))) / p.N * total;
}

std::vector<OracleRow> oracle_suite(const RunConfig& cfg) {
  std::vector<OracleRow> rows;
  const std::vector<env::EnvironmentModel> models = {env::EnvironmentModel::gaussian_unit(),
                                                     env::EnvironmentModel::rademacher()};
  // Renewal recursion against path-pair enumeration.
  for (const auto& m : models)
    for (int d : {1, 2})
      for (int N = 1; N <= 5; ++N)
        for (double beta : {0.3, 0.8})
          rows.push_back({"second_moment", m.name() + " d=" + num(d) + " N=" + num(N) + " beta=" + short_num(beta),
                          moments::second_moment_exact(m, beta, N, d), moments::second_moment_bruteforce(m, beta, N, d),
                          1e-10});

  const auto g = env::EnvironmentModel::gaussian_unit();
  // Transfer matrix against path enumeration.
  for (int d : {1, 2})
    for (int s = 0; s < 3; ++s) {
      const int n = d == 1 ? 10 : 6;
      const env::Window win{n, Box::around(LatticePoint::origin(d), n)};
      const env::EnvironmentField field(g, rng::task_seed(cfg.seed, 100 + s), win);
      const double beta = 0.7;
      rows.push_back({"log_partition", "d=" + num(d) + " n=" + num(n) + " seed#" + num(s),
                      partition::log_partition(field, beta, n, LatticePoint::origin(d)).log_w,
                      std::log(brute_partition(field, beta, n)), 1e-12});
    }

  // Coarse-grained decomposition: log sum_Z W-hat_Z = log W_{nN}.
  for (int s = 0; s < 2; ++s) {
    const int N = 16, nb = 2, d = 2;
    const BoxSpec spec(N, d);
    const LatticePoint o = LatticePoint::origin(d);
    const env::Window win{nb * N, Box::around(o, nb * N)};
    const env::EnvironmentField field(g, rng::task_seed(cfg.seed, 200 + s), win);
    const double beta = 1.0;
    std::vector<double> parts;
    for (const auto& z : partition::enumerate_block_paths(spec, o, nb))
      parts.push_back(partition::coarse_partition(field, beta, spec, z, o).log_w);
    rows.push_back({"coarse_decomposition", "n=2 N=16 seed#" + num(s), log_sum_exp(parts),
                    partition::log_partition(field, beta, nb * N, o).log_w, 1e-9});
  }

  // V^N: adjoint sweep against one forward run per start.
  for (int s = 0; s < 2; ++s) {
    const int N = 16;
    const BoxSpec spec(N, 2);
    const Box core = spec.range(LatticePoint::origin(2));
    const env::Window win{N, core.expanded(N)};
    const env::EnvironmentField field(g, rng::task_seed(cfg.seed, 300 + s), win);
    rows.push_back({"v_statistic", "N=16 seed#" + num(s), chaos::v_statistic(field, 1.0, N, chaos::VMethod::adjoint),
                    chaos::v_statistic(field, 1.0, N, chaos::VMethod::per_start), 1e-10});
  }

  // Q[(V^N)^2]: difference-walk DP against enumeration and renewal.
  rows.push_back({"v_second_moment", "N=2 enumeration", chaos::v_second_moment_exact(g, 1.0, 2),
                  brute_v_second_moment(g, 1.0, 2, 2), 1e-12});
  for (int N : {8, 32, 128})
    rows.push_back({"v_second_moment", "N=" + num(N) + " renewal", chaos::v_second_moment_exact(g, 1.0, N),
                    chaos::v_second_moment_renewal(g, 1.0, N), 1e-10});

  // q = 1 chaos: marks DP against the explicit single sum.
  for (int s = 0; s < 2; ++s) {
    chaos::ChaosParams p;
    p.q = 1;
    p.N = 16;
    p.gamma_hat = 1.0;
    p.truncation_c = 0.0;
    const env::EnvironmentField field(g, rng::task_seed(cfg.seed, 400 + s), chaos::chaos_window(p));
    rows.push_back({"chaos_q1", "N=16 seed#" + num(s), chaos::chaos_statistic(field, p), single_sum_chaos(field, p),
                    1e-12});
  }

  // Closed-form return probabilities against the kernel table.
  for (int d : {1, 2, 3}) {
    const int n = 40;
    const auto k = walk::build_kernel(d, n);
    for (int i : {1, 5, 20})
      rows.push_back({"return_probability", "d=" + num(d) + " 2i=" + num(2 * i), walk::return_probability(d, i),
                      k.prob(2 * i, LatticePoint::origin(d)), 1e-12});
  }

  // Scalar site lookup against the vectorized row fill (bitwise).
  {
    const env::Window win{8, Box::around(LatticePoint::origin(2), 40)};
    const env::EnvironmentField field(g, rng::task_seed(cfg.seed, 500), win);
    std::vector<double> row(81);
    double worst = 0.0;
    for (int i = 1; i <= 8; ++i) {
      field.fill_row(i, LatticePoint{i - 4, -40}, 81, 1, row.data());
      for (int k = 0; k < 81; ++k) worst = std::max(worst, std::abs(row[static_cast<std::size_t>(k)] - field.eta_at(i, LatticePoint{i - 4, -40 + k})));
    }
    rows.push_back({"environment_rows", "fill_row vs eta_at max |diff|", worst, 0.0, 0.0});
  }
  return rows;
}

// ---- conjecture input -------------------------------------------------------

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

// Reads (beta, p, se) rows. Column names beta, p|p_lower, se|p_lower_se;
// without a header the first three columns are used. Later rows with the same
// beta replace earlier ones, so a free-energy CSV can be fed back directly.
std::vector<estimator::FitPoint> read_fit_points(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PreconditionError("input: cannot read '" + path + "'");
  std::string line;
  int cb = 0, cp = 1, cs = 2;
  bool header_seen = false;
  std::map<double, estimator::FitPoint> by_beta;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (!header_seen) {
      header_seen = true;
      bool numeric = true;
      try {
        std::stod(cells.at(0));
      } catch (...) {
        numeric = false;
      }
      if (!numeric) {
        cb = cp = cs = -1;
        for (int c = 0; c < static_cast<int>(cells.size()); ++c) {
          const auto& h = cells[static_cast<std::size_t>(c)];
          if (h == "beta") cb = c;
          if (h == "p_lower" || (h == "p" && cp < 0)) cp = c;
          if (h == "p_lower_se" || (h == "se" && cs < 0)) cs = c;
        }
        if (cb < 0 || cp < 0 || cs < 0) throw PreconditionError("input: need beta, p and se columns in '" + path + "'");
        continue;
      }
    }
    const int need = std::max({cb, cp, cs});
    if (static_cast<int>(cells.size()) <= need) throw PreconditionError("input: short row '" + line + "'");
    estimator::FitPoint pt;
    pt.beta = std::stod(cells[static_cast<std::size_t>(cb)]);
    pt.p = std::stod(cells[static_cast<std::size_t>(cp)]);
    pt.se = std::stod(cells[static_cast<std::size_t>(cs)]);
    by_beta[pt.beta] = pt;
  }
  std::vector<estimator::FitPoint> pts;
  for (const auto& [b, pt] : by_beta) pts.push_back(pt);
  return pts;
}

std::vector<estimator::FreeEnergyPoint> run_free_energy_grid(const RunConfig& cfg, bool& partial) {
  const auto model = cfg.environment_model();
  std::vector<estimator::FreeEnergyPoint> pts;
  partial = false;
  double spent = 0.0;
  for (std::size_t b = 0; b < cfg.beta.size(); ++b) {
    const double work = cfg.beta[b] == 0.0 ? 0.0 : free_energy_work(cfg);
    if (spent + work > cfg.max_work) {
      partial = true;
      break;
    }
    spent += work;
    pts.push_back(estimator::free_energy_lower(model, cfg.beta[b], cfg.d, cfg.n, cfg.samples,
                                               rng::task_seed(cfg.seed, b), cfg.theta, cfg.workers));
  }
  return pts;
}

}  // namespace

// ---- RunConfig ----------------------------------------------------------------

RunConfig RunConfig::defaults(const std::string& command) {
  RunConfig c;
  c.command = command;
  if (command == "free-energy") {
    c.beta = {2.0};
    c.n = {32, 64, 128};
  } else if (command == "second-moment") {
    c.N = {256, 1024, 4096, 16384, 32768};
  } else if (command == "chaos") {
    c.N = {64, 128, 256};
  } else if (command == "certificate") {
    // Frozen desk-scale fixture: beta from C1 at N = 64.
    c.N = {64};
    c.C1 = 7.2;
    c.gamma_hat = 2.0;
    c.K = 2.5;
    c.samples = 1000;
  } else if (command == "conjecture") {
    c.beta = {1.2, 1.6, 2.0, 2.4};
    c.n = {32, 64, 128, 256};
    c.samples = 500;
  }
  c.output = "dpre_" + command;
  return c;
}

json RunConfig::to_json() const {
  return json{{"command", command},
              {"model", model},
              {"values", values},
              {"probabilities", probabilities},
              {"d", d},
              {"beta", beta},
              {"beta_hat", beta_hat},
              {"C1", C1},
              {"q", q},
              {"N", N},
              {"n", n},
              {"samples", samples},
              {"theta", theta},
              {"K", K},
              {"gamma_hat", gamma_hat},
              {"C2", C2},
              {"seed", seed},
              {"output", output},
              {"workers", workers},
              {"max_work", max_work},
              {"input", input},
              {"blocks", blocks},
              {"paths_per_start", paths_per_start},
              {"direct_samples", direct_samples},
              {"truncation_c", truncation_c},
              {"epsilon", epsilon}};
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw PreconditionError("config: top level must be a JSON object");
  if (!j.contains("command")) throw PreconditionError("config: missing field 'command'");
  RunConfig c = defaults(j.at("command").get<std::string>());
  const std::map<std::string, std::function<void(const json&)>> setters = {
      {"command", [&](const json&) {}},
      {"model", [&](const json& v) { c.model = v.get<std::string>(); }},
      {"values", [&](const json& v) { c.values = v.get<std::vector<double>>(); }},
      {"probabilities", [&](const json& v) { c.probabilities = v.get<std::vector<double>>(); }},
      {"d", [&](const json& v) { c.d = v.get<int>(); }},
      {"beta", [&](const json& v) { c.beta = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()}; }},
      {"beta_hat", [&](const json& v) { c.beta_hat = v.get<double>(); }},
      {"C1", [&](const json& v) { c.C1 = v.get<double>(); }},
      {"q", [&](const json& v) { c.q = v.get<int>(); }},
      {"N", [&](const json& v) { c.N = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()}; }},
      {"n", [&](const json& v) { c.n = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()}; }},
      {"samples", [&](const json& v) { c.samples = v.get<int>(); }},
      {"theta", [&](const json& v) { c.theta = v.get<double>(); }},
      {"K", [&](const json& v) { c.K = v.get<double>(); }},
      {"gamma_hat", [&](const json& v) { c.gamma_hat = v.get<double>(); }},
      {"C2", [&](const json& v) { c.C2 = v.get<double>(); }},
      {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
      {"output", [&](const json& v) { c.output = v.get<std::string>(); }},
      {"workers", [&](const json& v) { c.workers = v.get<int>(); }},
      {"max_work", [&](const json& v) { c.max_work = v.get<double>(); }},
      {"input", [&](const json& v) { c.input = v.get<std::string>(); }},
      {"blocks", [&](const json& v) { c.blocks = v.get<int>(); }},
      {"paths_per_start", [&](const json& v) { c.paths_per_start = v.get<int>(); }},
      {"direct_samples", [&](const json& v) { c.direct_samples = v.get<int>(); }},
      {"truncation_c", [&](const json& v) { c.truncation_c = v.get<double>(); }},
      {"epsilon", [&](const json& v) { c.epsilon = v.get<double>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw PreconditionError("config: unknown field '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw PreconditionError("config: field '" + key + "' has the wrong type (" + e.what() + ")");
    }
  }
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw PreconditionError("config: field '" + field + "' " + why);
  };
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) fail("command", "is not a known subcommand");
  if (model != "gaussian-unit" && model != "gaussian" && model != "rademacher" && model != "finite-discrete" &&
      model != "discrete")
    fail("model", "must be gaussian-unit, rademacher or finite-discrete");
  try {
    environment_model();
  } catch (const Error& e) {
    fail("model", std::string("is invalid: ") + e.what());
  }
  if (d < 1 || d > 3) fail("d", "must be 1, 2 or 3");
  for (double b : beta)
    if (!std::isfinite(b)) fail("beta", "must be finite");
  if (!std::isfinite(beta_hat)) fail("beta_hat", "must be finite");
  if (!(C1 > 0.0)) fail("C1", "must be > 0");
  if (q < 1 || q > chaos::kMaxOrder) fail("q", "must lie in [1, " + num(chaos::kMaxOrder) + "]");
  for (int v : N)
    if (v < 2) fail("N", "entries must be >= 2");
  for (int v : n)
    if (v < 1) fail("n", "entries must be >= 1");
  for (std::size_t i = 1; i < n.size(); ++i)
    if (n[i] <= n[i - 1]) fail("n", "must be strictly increasing");
  if (samples < 1) fail("samples", "must be >= 1");
  if (!(theta > 0.0 && theta < 1.0)) fail("theta", "must lie in (0, 1)");
  if (!(K > 0.0)) fail("K", "must be > 0");
  if (!std::isfinite(gamma_hat)) fail("gamma_hat", "must be finite");
  if (!(C2 >= 0.0)) fail("C2", "must be >= 0");
  if (output.empty()) fail("output", "must not be empty");
  if (workers < 1) fail("workers", "must be >= 1");
  if (!(max_work > 0.0)) fail("max_work", "must be > 0");
  if (blocks < 1) fail("blocks", "must be >= 1");
  if (paths_per_start < 1) fail("paths_per_start", "must be >= 1");
  if (direct_samples < 2) fail("direct_samples", "must be >= 2");
  if (!(epsilon > 0.0)) fail("epsilon", "must be > 0");

  if (command == "free-energy" || command == "conjecture") {
    if (n.empty()) fail("n", "must list at least one horizon");
    if (input.empty() && samples < 100) fail("samples", "must be >= 100 for free-energy estimates");
    if (command == "free-energy" && beta.empty()) fail("beta", "must list at least one value");
    if (command == "conjecture" && input.empty() && beta.size() < 3) fail("beta", "needs at least 3 values");
  }
  if ((command == "second-moment" || command == "chaos") && N.empty()) fail("N", "must list at least one horizon");
  if (command == "certificate" && N.size() != 1) fail("N", "must hold exactly one block length");
  if (command == "certificate" && beta.size() > 1) fail("beta", "takes at most one value");
}

env::EnvironmentModel RunConfig::environment_model() const {
  if (model == "gaussian-unit" || model == "gaussian") return env::EnvironmentModel::gaussian_unit();
  if (model == "rademacher") return env::EnvironmentModel::rademacher();
  return env::EnvironmentModel::finite_discrete(values, probabilities);
}

// ---- commands -------------------------------------------------------------------

int cmd_free_energy(const RunConfig& cfg, std::ostream& log) {
  bool partial = false;
  const auto pts = run_free_energy_grid(cfg, partial);
  Table t{{"beta", "n", "M", "mean_log_w_over_n", "se", "p_lower", "p_lower_se", "certificate", "non_monotone"}, {}};
  json results = json::array();
  for (const auto& p : pts) {
    for (const auto& e : p.profile)
      t.rows.push_back({num(p.beta), num(e.n), num(p.M), num(e.mean), num(e.se), num(p.p_lower), num(p.p_lower_se),
                        num(p.certificate), num(p.non_monotone)});
    results.push_back(p.to_json());
  }
  json out{{"points", results}, {"partial", partial}};
  write_outputs(cfg, t, out, log);
  if (partial) {
    log << "resource cap reached after " << pts.size() << " of " << cfg.beta.size() << " beta values\n";
    return kResourceCap;
  }
  return kOk;
}

int cmd_second_moment(const RunConfig& cfg, std::ostream& log) {
  const double nmax = *std::max_element(cfg.N.begin(), cfg.N.end());
  require_work(cfg, nmax * nmax, "second-moment");
  moments::MomentOptions opts;
  opts.max_N = std::max(opts.max_N, static_cast<int>(nmax));
  const auto scan = moments::intermediate_scan(cfg.environment_model(), cfg.beta_hat, cfg.N, cfg.d, opts, cfg.workers);
  Table t{{"beta_hat", "N", "beta_N", "lambda1", "second_moment"}, {}};
  json recs = json::array();
  for (const auto& r : scan.records) {
    t.rows.push_back({num(r.beta_hat), num(r.N), num(r.beta_N), num(r.lambda1), num(r.second_moment)});
    recs.push_back({{"N", r.N}, {"beta_N", r.beta_N}, {"lambda1", r.lambda1}, {"second_moment", r.second_moment}});
  }
  json out{{"records", recs},
           {"threshold", scan.threshold},
           {"verdict", scan.verdict},
           {"loglog_slope", scan.loglog_slope},
           {"model", cfg.environment_model().to_json()}};
  write_outputs(cfg, t, out, log);
  log << "verdict: " << scan.verdict << "\n";
  return kOk;
}

int cmd_chaos(const RunConfig& cfg, std::ostream& log) {
  double work = 0.0;
  for (int N : cfg.N) work += chaos_work(cfg, N, cfg.samples);
  require_work(cfg, work, "chaos");
  const auto model = cfg.environment_model();
  Table t{{"N", "q", "gamma_hat", "M", "mean_A", "mean_A_se", "second_A", "second_A_se", "v_second_moment", "D_Nq",
           "P_L_ge_half_D"},
          {}};
  json results = json::array();
  for (std::size_t k = 0; k < cfg.N.size(); ++k) {
    chaos::ChaosParams p;
    p.q = cfg.q;
    p.gamma_hat = cfg.gamma_hat;
    p.N = cfg.N[k];
    p.d = cfg.d;
    p.block = LatticePoint::origin(cfg.d);
    p.K = cfg.K;
    p.C1 = cfg.C1;
    p.C2 = cfg.C2;
    p.theta = cfg.theta;
    p.truncation_c = cfg.truncation_c;
    const auto mom = chaos::chaos_moments_mc(model, p, cfg.samples, rng::task_seed(cfg.seed, k), cfg.workers);
    const double v2 = chaos::v_second_moment_exact(model, cfg.gamma_hat, p.N, cfg.d);
    const double D = moments::dnq(p.N, cfg.q);
    const auto cal = chaos::calibrate_c2(cfg.q, p.N, cfg.samples, rng::task_seed(cfg.seed, 1000 + k), cfg.d, {cfg.C2});
    t.rows.push_back({num(p.N), num(p.q), num(p.gamma_hat), num(cfg.samples), num(mom.mean.mean), num(mom.mean.se),
                      num(mom.second.mean), num(mom.second.se), num(v2), num(D), num(cal.probability)});
    results.push_back({{"N", p.N},
                       {"mean_A", mom.mean.to_json()},
                       {"second_A", mom.second.to_json()},
                       {"v_second_moment", v2},
                       {"D_Nq", D},
                       {"C2", cfg.C2},
                       {"P_L_ge_half_D", cal.probability}});
  }
  write_outputs(cfg, t, json{{"horizons", results}}, log);
  return kOk;
}

int cmd_certificate(const RunConfig& cfg, std::ostream& log) {
  estimator::CertificateParams p;
  p.N = cfg.N.front();
  p.beta = cfg.beta.empty() ? estimator::beta_of_N(cfg.C1, cfg.q, p.N) : cfg.beta.front();
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
  p.workers = cfg.workers;
  const BoxSpec spec(p.N, p.d);
  const double starts = std::pow(spec.m() + 1.0, p.d);
  const double nN = static_cast<double>(p.n) * p.N;
  require_work(cfg,
               chaos_work(cfg, p.N, static_cast<long long>(cfg.samples + starts * p.paths_per_start)) +
                   p.M_direct * nN * std::pow(nN + 1.0, p.d),
               "certificate");
  const auto rep = estimator::negativity_certificate(cfg.environment_model(), p);
  Table t{{"theta", "cost_factor", "cost_term", "R", "tail_bound", "tilted_sum", "tilted_sum_se", "contraction",
           "contraction_se", "rate", "free_energy_proxy", "direct_mean", "direct_se", "direct_rate"},
          {}};
  for (const auto& c : rep.by_theta)
    t.rows.push_back({num(c.theta), num(c.cost_factor), num(c.cost_term), num(c.R), num(c.tail_bound),
                      num(c.tilted_sum), num(c.tilted_sum_se), num(c.contraction), num(c.contraction_se), num(c.rate),
                      num(c.free_energy_proxy), num(c.direct.mean), num(c.direct.se), num(c.direct_rate)});
  write_outputs(cfg, t, rep.to_json(), log);
  log << "best contraction factor " << num(rep.best_theta().contraction) << " at theta " << num(rep.best_theta().theta)
      << "\n";
  return kOk;
}

int cmd_conjecture(const RunConfig& cfg, std::ostream& log) {
  std::vector<estimator::FitPoint> pts;
  bool partial = false;
  json source;
  if (!cfg.input.empty()) {
    pts = read_fit_points(cfg.input);
    source = {{"input", cfg.input}};
  } else {
    const auto fe = run_free_energy_grid(cfg, partial);
    json runs = json::array();
    for (const auto& p : fe) {
      pts.push_back({p.beta, p.p_lower, p.p_lower_se});
      runs.push_back(p.to_json());
    }
    source = {{"free_energy", runs}};
  }
  const auto model = cfg.environment_model();
  Table t{{"beta", "p", "se", "used", "residual"}, {}};
  json out{{"source", source}, {"partial", partial}};
  int code = partial ? kResourceCap : kOk;
  try {
    const auto fit = estimator::conjecture_fit(pts, env::lambda_pp0(model));
    std::size_t used = 0;
    for (const auto& p : pts) {
      const bool in = used < fit.used.size() && fit.used[used].beta == p.beta;
      t.rows.push_back({num(p.beta), num(p.p), num(p.se), num(in), in ? num(fit.residuals[used]) : ""});
      if (in) ++used;
    }
    out["fit"] = fit.to_json();
    log << "slope " << num(fit.slope) << " (conjectured " << num(fit.conjectured_slope) << ")\n";
  } catch (const InsufficientData& e) {
    for (const auto& p : pts) t.rows.push_back({num(p.beta), num(p.p), num(p.se), "0", ""});
    out["fit"] = nullptr;
    out["error"] = e.what();
    write_outputs(cfg, t, out, log);
    throw;
  }
  write_outputs(cfg, t, out, log);
  return code;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& log) {
  const auto rows = oracle_suite(cfg);
  Table t{{"check", "case", "fast", "oracle", "abs_err", "tol", "pass"}, {}};
  json res = json::array();
  int failures = 0;
  for (const auto& r : rows) {
    const double err = std::abs(r.fast - r.oracle);
    t.rows.push_back({r.check, r.label, num(r.fast), num(r.oracle), num(err), num(r.tol), num(r.pass())});
    res.push_back({{"check", r.check}, {"case", r.label}, {"fast", r.fast}, {"oracle", r.oracle}, {"pass", r.pass()}});
    if (!r.pass()) {
      ++failures;
      log << "MISMATCH " << r.check << " [" << r.label << "]: " << num(r.fast) << " vs " << num(r.oracle) << "\n";
    }
  }
  write_outputs(cfg, t, json{{"checks", res}, {"failures", failures}}, log);
  log << rows.size() - failures << "/" << rows.size() << " oracle checks passed\n";
  return failures ? kOracleMismatch : kOk;
}

int run_command(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.command == "free-energy") return cmd_free_energy(cfg, log);
  if (cfg.command == "second-moment") return cmd_second_moment(cfg, log);
  if (cfg.command == "chaos") return cmd_chaos(cfg, log);
  if (cfg.command == "certificate") return cmd_certificate(cfg, log);
  if (cfg.command == "conjecture") return cmd_conjecture(cfg, log);
  return cmd_oracle(cfg, log);
}

std::string data_payload(const std::string& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw PreconditionError("cannot read '" + csv_path + "'");
  std::string line, out;
  while (std::getline(f, line))
    if (line.empty() || line[0] != '#') out += line + "\n";
  return out;
}

// ---- front end --------------------------------------------------------------------

namespace {

// Flag storage shared by all subcommands; only flags given on the command
// line are written over the config file.
struct Flags {
  std::string config_file;
  std::string model;
  std::vector<double> values, probabilities, beta;
  int d = 0, q = 0, samples = 0, workers = 0, blocks = 0, paths_per_start = 0, direct_samples = 0;
  double beta_hat = 0, C1 = 0, theta = 0, K = 0, gamma_hat = 0, C2 = 0, max_work = 0, truncation_c = 0, epsilon = 0;
  std::vector<int> N, n;
  std::uint64_t seed = 0;
  std::string output, input;
  std::vector<std::function<void(json&)>> overlays;

  template <class T>
  void add(CLI::App* app, const std::string& flag, const std::string& key, T& var, const std::string& help) {
    CLI::Option* opt = app->add_option(flag, var, help);
    if constexpr (requires { var.size(); var.push_back(typename T::value_type{}); }) {
      if constexpr (!std::is_same_v<T, std::string>) opt->delimiter(',');
    }
    overlays.push_back([opt, key, &var](json& j) {
      if (opt->count() > 0) j[key] = var;
    });
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file; flags override its fields");
    add(app, "--model", "model", model, "gaussian-unit | rademacher | finite-discrete");
    add(app, "--values", "values", values, "finite-discrete support (comma separated)");
    add(app, "--probabilities", "probabilities", probabilities, "finite-discrete masses (comma separated)");
    add(app, "--d", "d", d, "lattice dimension");
    add(app, "--beta", "beta", beta, "inverse temperature(s), comma separated");
    add(app, "--beta-hat", "beta_hat", beta_hat, "intermediate-disorder coupling");
    add(app, "--C1", "C1", C1, "beta = C1 (log N)^{-(q-1)/(2q)} when --beta is absent");
    add(app, "--q", "q", q, "chaos order");
    add(app, "--N", "N", N, "horizon grid, comma separated");
    add(app, "--n", "n", n, "free-energy time schedule, comma separated");
    add(app, "--samples", "samples", samples, "Monte Carlo sample size M");
    add(app, "--theta", "theta", theta, "fractional moment power");
    add(app, "--K", "K", K, "penalty level");
    add(app, "--gamma-hat", "gamma_hat", gamma_hat, "chaos coupling");
    add(app, "--C2", "C2", C2, "gate constant of the L statistic");
    add(app, "--seed", "seed", seed, "master seed");
    add(app, "--output", "output", output, "output prefix (writes .csv and .json)");
    add(app, "--workers", "workers", workers, "worker threads");
    add(app, "--max-work", "max_work", max_work, "cap on estimated lattice-site updates");
    add(app, "--input", "input", input, "conjecture: CSV with beta, p, se");
    add(app, "--blocks", "blocks", blocks, "certificate: number of blocks n");
    add(app, "--paths-per-start", "paths_per_start", paths_per_start, "certificate: tilted samples per start");
    add(app, "--direct-samples", "direct_samples", direct_samples, "certificate: samples of W_{nN}");
    add(app, "--truncation-c", "truncation_c", truncation_c, "chaos sweep cap c sqrt(j); <= 0 is exact");
    add(app, "--epsilon", "epsilon", epsilon, "certificate tail tolerance");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directed polymer estimators: free energy, second moments, chaos statistics, certificates"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags flags;
  std::map<CLI::App*, std::string> names;
  for (const auto& c : kCommands) {
    CLI::App* sub = app.add_subcommand(c, "run the " + c + " pipeline");
    flags.attach(sub);
    names[sub] = c;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  std::string command;
  for (auto* sub : app.get_subcommands()) command = names.at(sub);
  try {
    json j = json::object();
    if (!flags.config_file.empty()) {
      std::ifstream f(flags.config_file);
      if (!f) throw PreconditionError("config: cannot read '" + flags.config_file + "'");
      try {
        j = json::parse(f);
      } catch (const json::exception& e) {
        throw PreconditionError("config: '" + flags.config_file + "' is not valid JSON (" + e.what() + ")");
      }
      if (j.contains("command") && j["command"] != command)
        throw PreconditionError("config: field 'command' is '" + j["command"].get<std::string>() +
                                "' but the subcommand is '" + command + "'");
    }
    j["command"] = command;
    for (const auto& ov : flags.overlays) ov(j);
    const RunConfig cfg = RunConfig::from_json(j);
    return run_command(cfg, std::cout);
  } catch (const ResourceError& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return kResourceCap;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace dpre::cli
