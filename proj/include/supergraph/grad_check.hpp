#pragma once

#include <cmath>
#include <stdexcept>

#include "supergraph/types.hpp"

namespace supergraph {

inline constexpr Scalar kFiniteDiffEps = 1e-5;

/// Central-difference gradient of a scalar function of a matrix:
/// (f(x + eps e) - f(x - eps e)) / (2 eps) per coordinate.
/// Throws std::domain_error if f is non-finite at any probe point.
template <class F>
Mat finite_diff_grad(F&& f, const Mat& x, Scalar eps = kFiniteDiffEps) {
  if (!(eps > 0)) throw std::invalid_argument("finite_diff_grad: eps must be > 0");
  Mat grad(x.rows(), x.cols());
  Mat probe = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      probe(i, j) = x(i, j) + eps;
      const Scalar fp = f(probe);
      probe(i, j) = x(i, j) - eps;
      const Scalar fm = f(probe);
      probe(i, j) = x(i, j);
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::domain_error("finite_diff_grad: non-finite value at probe point");
      grad(i, j) = (fp - fm) / (2 * eps);
    }
  }
  return grad;
}

/// |a - b| <= tol * max(1, |a|, |b|), the comparison used by every gradient
/// check in this project.
inline bool grad_close(Scalar analytic, Scalar numeric, Scalar tol) {
  const Scalar scale = std::max({Scalar(1), std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) <= tol * scale;
}

}  // namespace supergraph
