#pragma once

#include "otcurve/types.hpp"

#include <functional>
#include <utility>

namespace otcurve {

// Cost vector as a function of the path parameter. The affine form
// c(eps) = base + eps * slope covers the plain eps*c problems and the
// geodesic; barycenter weight paths may supply a general value/derivative
// pair instead.
class CostPath {
 public:
  using Fn = std::function<void(double, Vector&)>;

  CostPath() = default;

  static CostPath affine(Vector base, Vector slope) {
    if (base.size() != slope.size()) throw std::invalid_argument("cost path: base/slope size mismatch");
    CostPath c;
    c.m_ = base.size();
    c.base_ = std::move(base);
    c.slope_ = std::move(slope);
    c.affine_ = true;
    return c;
  }

  // Plain transport path eps * c.
  static CostPath scaled(Vector cost) {
    Vector zero = Vector::Zero(cost.size());
    return affine(std::move(zero), std::move(cost));
  }

  static CostPath general(Index m, Fn value, Fn derivative) {
    CostPath c;
    c.m_ = m;
    c.value_fn_ = std::move(value);
    c.deriv_fn_ = std::move(derivative);
    c.affine_ = false;
    return c;
  }

  Index size() const { return m_; }
  bool is_affine() const { return affine_; }
  const Vector& base() const { return base_; }
  const Vector& slope() const { return slope_; }

  void value(double eps, Vector& out) const {
    if (affine_) {
      out = base_ + eps * slope_;
    } else {
      value_fn_(eps, out);
    }
  }

  void derivative(double eps, Vector& out) const {
    if (affine_) {
      out = slope_;
    } else {
      deriv_fn_(eps, out);
    }
  }

 private:
  Index m_ = 0;
  bool affine_ = true;
  Vector base_, slope_;
  Fn value_fn_, deriv_fn_;
};

}  // namespace otcurve
