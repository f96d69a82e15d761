#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "odectrl/types.hpp"

namespace odectrl {

enum class Architecture { Net, ResNet, OdeNet, OdeNetSimplex };

// OdeNet kinds carry a per-layer scalar weight alpha on the vector field.
constexpr bool has_alpha(Architecture k) {
  return k == Architecture::OdeNet || k == Architecture::OdeNetSimplex;
}

// Net is a plain layer map y -> sigma(Ky + beta); no tableau, no step size.
constexpr bool uses_tableau(Architecture k) { return k != Architecture::Net; }

inline Architecture architecture_from_name(std::string_view name) {
  if (name == "net") return Architecture::Net;
  if (name == "resnet") return Architecture::ResNet;
  if (name == "odenet") return Architecture::OdeNet;
  if (name == "odenet_simplex") return Architecture::OdeNetSimplex;
  throw std::invalid_argument("unknown architecture '" + std::string(name) +
                              "'; supported: net, resnet, odenet, odenet_simplex");
}

inline std::string architecture_name(Architecture k) {
  switch (k) {
    case Architecture::Net: return "net";
    case Architecture::ResNet: return "resnet";
    case Architecture::OdeNet: return "odenet";
    case Architecture::OdeNetSimplex: return "odenet_simplex";
  }
  throw std::invalid_argument("architecture_name: bad enum value");
}

// One layer's parameters: field is alpha * sigma(K y + beta), with alpha
// fixed at 1 and ignored for Net and ResNet.
template <typename Scalar>
struct LayerControls {
  Matrix<Scalar> weight;  // K, n x n
  Vector<Scalar> bias;    // beta, n
  Scalar alpha = 1;
};

// Gradient fragment matching LayerControls coordinate-for-coordinate.
template <typename Scalar>
struct LayerGradient {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  Scalar alpha = 0;
};

template <typename Scalar>
void check_layer_shapes(const LayerControls<Scalar>& u, Eigen::Index n,
                        const char* where) {
  if (u.weight.rows() != n || u.weight.cols() != n || u.bias.size() != n)
    throw std::invalid_argument(std::string(where) +
                                ": layer control shapes do not match state width");
}

// Elementwise tanh; accepts any Eigen expression, columns are samples.
template <typename Derived>
auto activation(const Eigen::MatrixBase<Derived>& z) {
  return z.array().tanh().matrix().eval();
}

// d/dz tanh(z) = 1 - tanh(z)^2.
template <typename Derived>
auto activation_prime(const Eigen::MatrixBase<Derived>& z) {
  return (1 - z.array().tanh().square()).matrix().eval();
}

// K Y + beta broadcast over columns.
template <typename Scalar, typename Derived>
Matrix<Scalar> preactivation(const LayerControls<Scalar>& u,
                             const Eigen::MatrixBase<Derived>& y) {
  return ((u.weight * y).colwise() + u.bias).eval();
}

// f(y, u): sigma(K y + beta), scaled by alpha for the OdeNet kinds.
template <typename Scalar, typename Derived>
Matrix<Scalar> vector_field(Architecture kind, const LayerControls<Scalar>& u,
                            const Eigen::MatrixBase<Derived>& y) {
  check_layer_shapes(u, y.rows(), "vector_field");
  Matrix<Scalar> f = activation(preactivation(u, y));
  if (has_alpha(kind)) f *= u.alpha;
  return f;
}

// (d_y f) v = alpha * sigma'(z) .* (K v), columnwise.
template <typename Scalar, typename DY, typename DV>
Matrix<Scalar> jac_y_apply(Architecture kind, const LayerControls<Scalar>& u,
                           const Eigen::MatrixBase<DY>& y,
                           const Eigen::MatrixBase<DV>& v) {
  Matrix<Scalar> out =
      activation_prime(preactivation(u, y)).cwiseProduct(u.weight * v);
  if (has_alpha(kind)) out *= u.alpha;
  return out;
}

// (d_y f)^T p = alpha * K^T (sigma'(z) .* p), columnwise.
template <typename Scalar, typename DY, typename DP>
Matrix<Scalar> jac_y_transpose_apply(Architecture kind,
                                     const LayerControls<Scalar>& u,
                                     const Eigen::MatrixBase<DY>& y,
                                     const Eigen::MatrixBase<DP>& p) {
  Matrix<Scalar> out =
      u.weight.transpose() *
      activation_prime(preactivation(u, y)).cwiseProduct(p.derived());
  if (has_alpha(kind)) out *= u.alpha;
  return out;
}

// (d_u f) w for a control perturbation w = (dK, dbeta, dalpha):
// alpha * sigma'(z) .* (dK y + dbeta) + dalpha * sigma(z).
template <typename Scalar, typename DY>
Matrix<Scalar> jac_u_apply(Architecture kind, const LayerControls<Scalar>& u,
                           const Eigen::MatrixBase<DY>& y,
                           const LayerControls<Scalar>& w) {
  const Matrix<Scalar> z = preactivation(u, y);
  Matrix<Scalar> out = activation_prime(z).cwiseProduct(
      (w.weight * y).colwise() + w.bias);
  if (has_alpha(kind)) {
    out *= u.alpha;
    out += w.alpha * activation(z);
  }
  return out;
}

// (d_u f)^T p as a gradient fragment, summed over columns:
// gamma = alpha * sigma'(z) .* p; dK = gamma y^T, dbeta = gamma 1,
// dalpha = <p, sigma(z)>.
template <typename Scalar, typename DY, typename DP>
LayerGradient<Scalar> jac_u_transpose_apply(Architecture kind,
                                            const LayerControls<Scalar>& u,
                                            const Eigen::MatrixBase<DY>& y,
                                            const Eigen::MatrixBase<DP>& p) {
  const Matrix<Scalar> z = preactivation(u, y);
  Matrix<Scalar> gamma = activation_prime(z).cwiseProduct(p.derived());
  LayerGradient<Scalar> g;
  if (has_alpha(kind)) {
    g.alpha = (p.derived().cwiseProduct(activation(z))).sum();
    gamma *= u.alpha;
  } else {
    g.alpha = Scalar(0);
  }
  g.weight.noalias() = gamma * y.derived().transpose();
  g.bias = gamma.rowwise().sum();
  return g;
}

// H = <p, f(y, u)>, summed over columns for batched input.
template <typename Scalar, typename DY, typename DP>
Scalar hamiltonian(Architecture kind, const LayerControls<Scalar>& u,
                   const Eigen::MatrixBase<DY>& y,
                   const Eigen::MatrixBase<DP>& p) {
  return p.derived().cwiseProduct(vector_field(kind, u, y)).sum();
}

}  // namespace odectrl
