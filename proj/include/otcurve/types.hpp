#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace otcurve {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Bad or inconsistent user input (problem files, CLI arguments).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Family {
  generic,
  two_marginal,
  three_marginal,
  martingale,
  multi_period_martingale,
  geodesic,
  barycenter,
};

std::string family_name(Family f);

}  // namespace otcurve
