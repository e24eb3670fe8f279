#pragma once

#include "otcurve/problem.hpp"
#include "otcurve/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace otcurve {

struct EvalRequest {
  bool value = false;
  bool gradient = false;
  bool hessian = false;
  bool mixed = false;        // d/deps of the gradient
  bool partial_eps = false;  // d/deps of the value at fixed potentials
};

struct EvalResult {
  double value = 0.0;
  double partial_eps = 0.0;
  Vector gradient;
  Vector mixed;
  Matrix hessian;
};

// Dual objective in some concrete parametrization of the potentials:
// either the generic reduced system or a family kernel with one block
// eliminated analytically. All evaluations are pure.
class DualKernel {
 public:
  virtual ~DualKernel() = default;

  virtual Index dim() const = 0;
  virtual std::string name() const = 0;

  virtual void eval(const Vector& phi, double eps, const EvalRequest& req, EvalResult& out) const = 0;

  // Gibbs coupling of the current potentials (length m).
  virtual Vector coupling(const Vector& phi, double eps) const = 0;

  double value(const Vector& phi, double eps) const {
    EvalResult r;
    eval(phi, eps, {.value = true}, r);
    return r.value;
  }
  Vector gradient(const Vector& phi, double eps) const {
    EvalResult r;
    eval(phi, eps, {.gradient = true}, r);
    return std::move(r.gradient);
  }
  Matrix hessian(const Vector& phi, double eps) const {
    EvalResult r;
    eval(phi, eps, {.hessian = true}, r);
    return std::move(r.hessian);
  }
  Vector mixed_eps_gradient(const Vector& phi, double eps) const {
    EvalResult r;
    eval(phi, eps, {.mixed = true}, r);
    return std::move(r.mixed);
  }
  double partial_eps(const Vector& phi, double eps) const {
    EvalResult r;
    eval(phi, eps, {.partial_eps = true}, r);
    return r.partial_eps;
  }
};

// Metadata of a family kernel: which blocks are retained, which is
// eliminated by its stationarity equation and which entries are pinned to
// zero by the gauge. Counts always add up to the unreduced potential count.
struct ReducedLayout {
  Family family = Family::generic;
  std::vector<std::pair<std::string, Index>> retained_blocks;
  std::string eliminated_block;
  Index eliminated_size = 0;
  std::vector<std::string> pinned;

  Index retained_count() const {
    Index s = 0;
    for (auto& b : retained_blocks) s += b.second;
    return s;
  }
  Index unreduced_count() const {
    return retained_count() + eliminated_size + static_cast<Index>(pinned.size());
  }
};

// Family kernel with one potential block eliminated in closed form.
class ReducedKernel : public DualKernel {
 public:
  virtual ReducedLayout layout() const = 0;
  // Eliminated block from the retained potentials (stationarity equation).
  virtual Vector eliminate(const Vector& phi, double eps) const = 0;
  // Potentials in the unreduced generic layout (pinned entries zero,
  // eliminated block filled in).
  virtual Vector full_potentials(const Vector& phi, double eps) const = 0;
  // Inverse of the above modulo gauge: normalize a full-layout potential
  // vector into this kernel's gauge and extract the retained blocks.
  virtual Vector from_full_potentials(const Vector& phi_full) const = 0;
};

}  // namespace otcurve
