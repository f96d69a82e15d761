#pragma once

#include <stdexcept>
#include <vector>

#include "odectrl/dynamics.hpp"
#include "odectrl/loss.hpp"
#include "odectrl/propagation.hpp"
#include "odectrl/types.hpp"

namespace odectrl {

// Full gradient of the classification objective: one fragment per layer plus
// the classifier block.
template <typename Scalar>
struct GradientBundle {
  std::vector<LayerGradient<Scalar>> layers;
  RowVector<Scalar> head_weight;  // dJ/dW
  Scalar head_bias = 0;           // dJ/dmu
};

// Costate trajectory produced by backward. stage_costates[j][i] is the stage
// costate P_i, stage_slopes[j][i] its slope L_i = -(d_y f)(Y_i)^T P_i.
template <typename Scalar>
struct AdjointState {
  std::vector<Matrix<Scalar>> costates;                     // layers + 1
  std::vector<std::vector<Matrix<Scalar>>> stage_costates;  // layers x stages
  std::vector<std::vector<Matrix<Scalar>>> stage_slopes;    // layers x stages
};

// Residual weights gamma_i = (C(z_i) - c_i) C'(z_i), one per column.
template <typename Scalar, typename Derived>
RowVector<Scalar> residual_weights(const ClassifierHead<Scalar>& head,
                                   const Eigen::MatrixBase<Derived>& y,
                                   const Eigen::VectorXi& labels) {
  if (labels.size() != y.cols())
    throw std::invalid_argument("residual_weights: one label per sample required");
  const RowVector<Scalar> z = scores(head, y);
  RowVector<Scalar> gamma(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    gamma(i) = (hypothesis(z(i)) - Scalar(labels(i))) * hypothesis_prime(z(i));
  return gamma;
}

// p^[N] = W^T gamma, columnwise.
template <typename Scalar, typename Derived>
Matrix<Scalar> terminal_costate(const ClassifierHead<Scalar>& head,
                                const Eigen::MatrixBase<Derived>& y_final,
                                const Eigen::VectorXi& labels) {
  return head.weight.transpose() *
         residual_weights(head, y_final, labels);
}

// dJ/dW = gamma Y^T (summed over samples), dJ/dmu = sum gamma.
template <typename Scalar, typename Derived>
void classifier_gradients(const ClassifierHead<Scalar>& head,
                          const Eigen::MatrixBase<Derived>& y_final,
                          const Eigen::VectorXi& labels,
                          RowVector<Scalar>& d_weight, Scalar& d_bias) {
  const RowVector<Scalar> gamma = residual_weights(head, y_final, labels);
  d_weight.noalias() = gamma * y_final.derived().transpose();
  d_bias = gamma.sum();
}

// Costate sweep. For RK kinds the update per layer j (stages in reverse) is
//
//   P_i   = p^[j+1] - dt sum_k (a(k,i) b_k / b_i) L_k
//   L_i   = -(d_y f)(Y_i, u_j)^T P_i
//   p^[j] = p^[j+1] - dt sum_i b_i L_i
//
// which is the partitioned companion of the forward scheme: substituting
// p^[j] back in gives P_i = p^[j] + dt sum_l a~(i,l) L_l with a~ from
// adjoint_of, so bilinear pairings with the variational equation are
// conserved identically. Weights b_i must be nonzero. Net reduces to the
// chain rule p^[j] = K^T (sigma'(z_j) .* p^[j+1]).
template <typename Scalar>
AdjointState<Scalar> backward(const NetworkConfig<Scalar>& config,
                              const std::vector<LayerControls<Scalar>>& controls,
                              const TrajectoryCache<Scalar>& cache,
                              const Matrix<Scalar>& p_final) {
  check_network_config(config, controls, "backward");
  const int N = config.layers;
  if (static_cast<int>(cache.states.size()) != N + 1)
    throw std::invalid_argument("backward: cache does not match config");
  if (p_final.rows() != config.width || p_final.cols() != cache.sample_count())
    throw std::invalid_argument("backward: terminal costate shape mismatch");

  AdjointState<Scalar> adj;
  adj.costates.assign(N + 1, Matrix<Scalar>());
  adj.stage_costates.resize(N);
  adj.stage_slopes.resize(N);
  adj.costates[N] = p_final;

  if (config.kind == Architecture::Net) {
    for (int j = N - 1; j >= 0; --j) {
      const Matrix<Scalar>& p_next = adj.costates[j + 1];
      adj.costates[j] =
          jac_y_transpose_apply(config.kind, controls[j], cache.states[j], p_next);
      adj.stage_costates[j] = {p_next};
      adj.stage_slopes[j] = {Matrix<Scalar>(-adj.costates[j])};
    }
    return adj;
  }

  const auto& tab = config.tableau;
  const int s = tab.stages;
  const Scalar dt = config.dt;
  for (int i = 0; i < s; ++i)
    if (tab.b(i) == Scalar(0))
      throw std::invalid_argument("backward: tableau weight b(" +
                                  std::to_string(i) + ") is zero");
  for (int j = N - 1; j >= 0; --j) {
    const Matrix<Scalar>& p_next = adj.costates[j + 1];
    auto& ps = adj.stage_costates[j];
    auto& ls = adj.stage_slopes[j];
    ps.assign(s, Matrix<Scalar>());
    ls.assign(s, Matrix<Scalar>());
    for (int i = s - 1; i >= 0; --i) {
      Matrix<Scalar> pi = p_next;
      for (int k = i + 1; k < s; ++k)
        if (tab.a(k, i) != Scalar(0))
          pi -= dt * (tab.a(k, i) * tab.b(k) / tab.b(i)) * ls[k];
      ls[i] = -jac_y_transpose_apply(config.kind, controls[j],
                                     cache.stage_states[j][i], pi);
      ps[i] = std::move(pi);
    }
    Matrix<Scalar> p = p_next;
    for (int i = 0; i < s; ++i) p -= dt * tab.b(i) * ls[i];
    adj.costates[j] = std::move(p);
  }
  return adj;
}

// Per-layer objective gradients. RK kinds: dJ/du_j = dt sum_i b_i
// (d_u f)(Y_i, u_j)^T P_i; Net: plain chain rule without the dt factor.
// Dividing the euler fragment by dt recovers the discrete Hamiltonian
// stationarity signal d_u H(y_j, p^[j+1], u_j) exactly.
template <typename Scalar>
std::vector<LayerGradient<Scalar>> control_gradients(
    const NetworkConfig<Scalar>& config,
    const std::vector<LayerControls<Scalar>>& controls,
    const TrajectoryCache<Scalar>& cache, const AdjointState<Scalar>& adj) {
  check_network_config(config, controls, "control_gradients");
  const int N = config.layers;
  if (static_cast<int>(adj.costates.size()) != N + 1 ||
      static_cast<int>(cache.states.size()) != N + 1)
    throw std::invalid_argument("control_gradients: pass results do not match config");

  std::vector<LayerGradient<Scalar>> grads(N);
  if (config.kind == Architecture::Net) {
    for (int j = 0; j < N; ++j)
      grads[j] = jac_u_transpose_apply(config.kind, controls[j], cache.states[j],
                                       adj.stage_costates[j][0]);
    return grads;
  }

  const auto& tab = config.tableau;
  const Scalar dt = config.dt;
  for (int j = 0; j < N; ++j) {
    LayerGradient<Scalar> g;
    g.weight = Matrix<Scalar>::Zero(config.width, config.width);
    g.bias = Vector<Scalar>::Zero(config.width);
    g.alpha = 0;
    for (int i = 0; i < tab.stages; ++i) {
      const LayerGradient<Scalar> gi =
          jac_u_transpose_apply(config.kind, controls[j],
                                cache.stage_states[j][i], adj.stage_costates[j][i]);
      const Scalar w = dt * tab.b(i);
      g.weight += w * gi.weight;
      g.bias += w * gi.bias;
      g.alpha += w * gi.alpha;
    }
    grads[j] = std::move(g);
  }
  return grads;
}

template <typename Scalar>
struct LossAndGradient {
  GradientBundle<Scalar> gradient;
  Scalar loss = 0;
};

// Loss and exact gradient over a dataset in one batched sweep: forward all
// samples as columns, seed the costates with the classifier residuals, run
// backward, and accumulate layer fragments. Sample sums fall out of the
// matrix products, so the result equals the sum of per-sample gradients.
template <typename Scalar>
LossAndGradient<Scalar> full_gradient(
    const NetworkConfig<Scalar>& config,
    const std::vector<LayerControls<Scalar>>& controls,
    const ClassifierHead<Scalar>& head, const Matrix<Scalar>& features,
    const Eigen::VectorXi& labels) {
  if (features.cols() != config.width)
    throw std::invalid_argument("full_gradient: feature width mismatch");
  if (features.rows() != labels.size())
    throw std::invalid_argument("full_gradient: one label per sample required");

  const Matrix<Scalar> x0 = features.transpose();
  const TrajectoryCache<Scalar> cache = forward(config, controls, x0);
  const Matrix<Scalar>& y_final = cache.states.back();

  LossAndGradient<Scalar> out;
  out.loss = batch_loss(head, y_final, labels);
  const Matrix<Scalar> p_final = terminal_costate(head, y_final, labels);
  const AdjointState<Scalar> adj = backward(config, controls, cache, p_final);
  out.gradient.layers = control_gradients(config, controls, cache, adj);
  classifier_gradients(head, y_final, labels, out.gradient.head_weight,
                       out.gradient.head_bias);
  return out;
}

}  // namespace odectrl
