#pragma once

#include <utility>
#include <vector>

#include "dpre/env.hpp"
#include "dpre/lattice.hpp"
#include "sweep.hpp"

namespace dpre::detail {

// Forward transfer matrix
//   v_i(y) = (1/2d) sum_{|x-y|=1} v_{i-1}(x) e_{t0+i,y}(beta),  v_0 = 1 on core,
// kept in normalized form: the stored slice is v_i / exp(off_i). Optional
// masks zero every site outside a box right after a given time.
struct TransferRun {
  Box core;
  int n = 0;
  int t0 = 0;
  std::vector<std::pair<int, Box>> masks;  // sorted by time
};

struct TransferOutput {
  // log of sum_y v_i(y) for i = 0..n; -inf once a mask empties the slice.
  std::vector<double> log_total;
  // Final slice (when requested): box, row-major values and log offset.
  Box box;
  std::vector<double> final_values;
  double final_offset = 0.0;
};

TransferOutput run_transfer(const env::EnvironmentField& field, double beta, const TransferRun& run,
                            bool keep_final);

}  // namespace dpre::detail
