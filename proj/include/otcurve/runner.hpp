#pragma once

#include "otcurve/types.hpp"

#include <optional>
#include <string>

namespace otcurve {

struct RunConfig {
  std::string subcommand;  // solve-ode | solve-sinkhorn | curve | derivs | compare |
                           // geodesic | barycenter
  std::string input_path;
  std::string out_dir = ".";
  std::optional<double> eta;  // override of the spec's eta
  int steps = 100;
  double eps_max = 1.0;
  double tol = 1e-6;       // sinkhorn stopping tolerance
  int polish_every = 0;
  int snapshots = 16;
  unsigned long long seed = 1;  // bundled random instance (derivs without input)
  bool use_generic = false;     // cross-check: force the generic objective
};

// Executes one subcommand and writes its files into out_dir.
// Exit codes: 0 ok, 2 schema error, 3 solver failure.
int run(const RunConfig& config);

}  // namespace otcurve
