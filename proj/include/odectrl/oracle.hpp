#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "odectrl/dynamics.hpp"
#include "odectrl/types.hpp"

// Independent checks used to audit the analytic gradient and propagation
// code. Nothing here may call into the adjoint or propagation modules: the
// finite-difference gradient sees the objective only through the caller's
// closure, and the reference integrator carries its own hard-coded classical
// RK4 step.

namespace odectrl {

// Declared in the propagation module; only the type is needed here, never
// its stepping code.
template <typename Scalar>
struct NetworkConfig;

// Central-difference gradient of an arbitrary objective. The objective is
// evaluated 2 * size times; any non-finite value aborts the probe since the
// resulting gradient would be meaningless.
template <typename Scalar, typename LossFn>
Vector<Scalar> fd_gradient(LossFn&& loss, Vector<Scalar> params,
                           Scalar h = Scalar(1e-5)) {
  if (!(h > Scalar(0))) throw std::invalid_argument("fd_gradient: h must be positive");
  Vector<Scalar> grad(params.size());
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    const Scalar saved = params(k);
    params(k) = saved + h;
    const Scalar up = loss(params);
    params(k) = saved - h;
    const Scalar down = loss(params);
    params(k) = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("fd_gradient: objective returned a non-finite value");
    grad(k) = (up - down) / (2 * h);
  }
  return grad;
}

// Nearest point to `a` on the probability simplex found by exhaustive grid
// search. Only dimensions 1..3 are supported; the cost grows as
// (1/grid_step)^(dim-1).
template <typename Scalar>
Vector<Scalar> brute_simplex(const Vector<Scalar>& a,
                             Scalar grid_step = Scalar(1e-3)) {
  const Eigen::Index dim = a.size();
  if (dim < 1 || dim > 3)
    throw std::invalid_argument("brute_simplex: only dimensions 1..3 are supported");
  if (!(grid_step > Scalar(0)) || grid_step > Scalar(1))
    throw std::invalid_argument("brute_simplex: grid_step must lie in (0, 1]");
  if (dim == 1) return Vector<Scalar>::Constant(1, Scalar(1));

  const int steps = static_cast<int>(std::llround(Scalar(1) / grid_step));
  Vector<Scalar> best = Vector<Scalar>::Zero(dim);
  Scalar best_dist = std::numeric_limits<Scalar>::infinity();
  Vector<Scalar> z(dim);
  if (dim == 2) {
    for (int i = 0; i <= steps; ++i) {
      z(0) = Scalar(i) / steps;
      z(1) = Scalar(steps - i) / steps;
      const Scalar d = (z - a).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = z;
      }
    }
    return best;
  }
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; j <= steps - i; ++j) {
      z(0) = Scalar(i) / steps;
      z(1) = Scalar(j) / steps;
      z(2) = Scalar(steps - i - j) / steps;
      const Scalar d = (z - a).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = z;
      }
    }
  }
  return best;
}

// High-accuracy terminal state for the layered ODE: each layer's control is
// held fixed while dy/dt = f(y, u_j) is integrated over [0, dt] by classical
// RK4 with 2^refinement substeps. Coefficients are spelled out here on
// purpose; this is the yardstick the production integrator is measured
// against, so it shares none of its stepping code.
template <typename Scalar>
Matrix<Scalar> reference_solve(const NetworkConfig<Scalar>& config,
                               const std::vector<LayerControls<Scalar>>& controls,
                               const Matrix<Scalar>& x0, int refinement) {
  if (config.kind == Architecture::Net)
    throw std::invalid_argument("reference_solve: Net has no underlying ODE");
  if (refinement < 0 || refinement > 30)
    throw std::invalid_argument("reference_solve: refinement must lie in 0..30");
  if (static_cast<int>(controls.size()) != config.layers)
    throw std::invalid_argument("reference_solve: one control per layer required");
  if (x0.rows() != config.width)
    throw std::invalid_argument("reference_solve: initial state width mismatch");

  const long substeps = 1L << refinement;
  const Scalar h = config.dt / Scalar(substeps);
  Matrix<Scalar> y = x0;
  for (int j = 0; j < config.layers; ++j) {
    const auto& u = controls[j];
    for (long step = 0; step < substeps; ++step) {
      const Matrix<Scalar> k1 = vector_field(config.kind, u, y);
      const Matrix<Scalar> k2 = vector_field(config.kind, u, y + (h / 2) * k1);
      const Matrix<Scalar> k3 = vector_field(config.kind, u, y + (h / 2) * k2);
      const Matrix<Scalar> k4 = vector_field(config.kind, u, y + h * k3);
      y += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
  }
  return y;
}

}  // namespace odectrl
