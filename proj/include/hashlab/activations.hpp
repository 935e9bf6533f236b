#pragma once

#include <cmath>

#include "hashlab/errors.hpp"

namespace hashlab {

/// Logistic function with slope parameter beta: 1 / (1 + exp(-beta * c)).
template <typename Scalar>
Scalar sigmoid_beta(Scalar c, Scalar beta) {
  if (!(beta > Scalar(0))) throw DomainError("sigmoid beta must be positive");
  // exp overflows to +inf for very negative arguments and the quotient goes to 0.
  return Scalar(1) / (Scalar(1) + std::exp(-beta * c));
}

/// d sigmoid / d c expressed through the sigmoid output s.
template <typename Scalar>
Scalar sigmoid_beta_derivative(Scalar s, Scalar beta) {
  return beta * s * (Scalar(1) - s);
}

/// Three-region threshold: 0 below 0.5 - eps, identity on [0.5 - eps, 0.5 + eps], 1 above.
template <typename Scalar>
Scalar piecewise_threshold(Scalar s, Scalar eps) {
  if (!(s >= Scalar(0) && s <= Scalar(1))) throw DomainError("threshold input outside [0,1]");
  if (!(eps > Scalar(0) && eps <= Scalar(0.5))) throw DomainError("threshold epsilon outside (0, 0.5]");
  if (s < Scalar(0.5) - eps) return Scalar(0);
  if (s > Scalar(0.5) + eps) return Scalar(1);
  return s;
}

/// Subgradient of piecewise_threshold: 1 in the closed linear region, 0 where saturated.
template <typename Scalar>
Scalar piecewise_threshold_derivative(Scalar s, Scalar eps) {
  return (s >= Scalar(0.5) - eps && s <= Scalar(0.5) + eps) ? Scalar(1) : Scalar(0);
}

}  // namespace hashlab
