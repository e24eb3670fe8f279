#pragma once

#include "otcurve/problem.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>

namespace otcurve {

struct LoadedSpec {
  Problem problem;
  // [reference value, reference value + eta * reference entropy]
  std::optional<std::pair<double, double>> bracket;
};

// Problem-spec schema:
// {
//   "marginals": [{"points": [[..]], "weights": [..], "free": bool}, ...],
//   "cost": {"kind": "table", "base": [..], "slope": [..]}
//         | {"kind": "expr", "name": "attractive"|"repulsive"|"pairwise_repulsive"
//                                   |"spence_mirrlees"|"geodesic"|"barycenter"},
//   "constraints": {"kind": "none"|"martingale"|"multi_period_martingale"|"custom",
//                   "vectors": [[..]]},
//   "eta": number,
//   "reference": {"value": number, "entropy": number}   // optional
// }
// Vectors over the grid are flat row-major (first marginal slowest).
// Violations raise SchemaError with a field path.
LoadedSpec parse_problem_spec(const nlohmann::json& j,
                              std::optional<double> eta_override = std::nullopt);
LoadedSpec load_problem_spec(const std::string& path,
                             std::optional<double> eta_override = std::nullopt);

}  // namespace otcurve
