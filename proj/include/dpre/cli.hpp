#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpre/env.hpp"

namespace dpre::cli {

inline constexpr const char* kVersion = "dpre 0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kResourceCap = 2,
  kOracleMismatch = 3,
};

// Fully resolved run configuration. Fields a command does not use are still
// echoed so that every output file records the complete state.
struct RunConfig {
  std::string command;
  std::string model = "gaussian-unit";  // gaussian-unit | rademacher | finite-discrete
  std::vector<double> values;           // finite-discrete support
  std::vector<double> probabilities;
  int d = 2;
  std::vector<double> beta;    // free-energy grid; empty means "derive from C1"
  double beta_hat = 1.0;       // second-moment scan coupling
  double C1 = 2.0;
  int q = 2;
  std::vector<int> N;          // horizons
  std::vector<int> n;          // free-energy time schedule
  int samples = 2000;
  double theta = 0.5;
  double K = 5.0;
  double gamma_hat = 1.0;
  double C2 = 2.0;
  std::uint64_t seed = 1;
  std::string output;          // file prefix; <output>.csv and <output>.json
  int workers = 1;
  double max_work = 1e12;      // cap on estimated lattice-site updates
  std::string input;           // conjecture: CSV with beta, p, se columns
  int blocks = 4;              // certificate: n
  int paths_per_start = 256;
  int direct_samples = 200;
  double truncation_c = 6.0;
  double epsilon = 0.01;

  // Defaults for one subcommand.
  static RunConfig defaults(const std::string& command);
  // Starts from defaults(j["command"]) and overrides every key present.
  // Unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Throws PreconditionError naming the offending field.
  void validate() const;
  env::EnvironmentModel environment_model() const;
};

// Subcommands. Each writes <output>.csv and <output>.json and returns an
// exit code.
int cmd_free_energy(const RunConfig& cfg, std::ostream& log);
int cmd_second_moment(const RunConfig& cfg, std::ostream& log);
int cmd_chaos(const RunConfig& cfg, std::ostream& log);
int cmd_certificate(const RunConfig& cfg, std::ostream& log);
int cmd_conjecture(const RunConfig& cfg, std::ostream& log);
int cmd_oracle(const RunConfig& cfg, std::ostream& log);

int run_command(const RunConfig& cfg, std::ostream& log);

// Full front end: argument parsing, config file merge, dispatch, error
// mapping to exit codes.
int main(int argc, char** argv);

// Lines of a CSV file that are not '#' comments.
std::string data_payload(const std::string& csv_path);

}  // namespace dpre::cli
