#pragma once

#include <stdexcept>
#include <thread>
#include <vector>

#include "odectrl/dynamics.hpp"
#include "odectrl/tableau.hpp"
#include "odectrl/types.hpp"

namespace odectrl {

template <typename Scalar>
struct NetworkConfig {
  Architecture kind = Architecture::ResNet;
  ButcherTableau<Scalar> tableau;
  int width = 0;    // state dimension n
  int layers = 0;   // N
  Scalar dt = 1;    // ignored by Net
};

// Everything the adjoint pass needs from a forward pass. Columns of each
// matrix are samples; single-sample propagation is the one-column case.
// For Net each layer stores one degenerate stage: stage_states[j] = {y_j},
// stage_fields[j] = {y_{j+1}}.
template <typename Scalar>
struct TrajectoryCache {
  std::vector<Matrix<Scalar>> states;                     // layers + 1
  std::vector<std::vector<Matrix<Scalar>>> stage_states;  // layers x stages
  std::vector<std::vector<Matrix<Scalar>>> stage_fields;  // layers x stages
  Eigen::Index sample_count() const {
    return states.empty() ? 0 : states.front().cols();
  }
};

template <typename Scalar>
void check_network_config(const NetworkConfig<Scalar>& config,
                          const std::vector<LayerControls<Scalar>>& controls,
                          const char* where) {
  if (config.width <= 0 || config.layers <= 0)
    throw std::invalid_argument(std::string(where) + ": width and layers must be positive");
  if (static_cast<int>(controls.size()) != config.layers)
    throw std::invalid_argument(std::string(where) + ": expected " +
                                std::to_string(config.layers) + " layer controls, got " +
                                std::to_string(controls.size()));
  for (const auto& u : controls) check_layer_shapes(u, config.width, where);
  if (uses_tableau(config.kind)) {
    if (config.dt <= Scalar(0))
      throw std::invalid_argument(std::string(where) + ": dt must be positive");
    if (config.tableau.stages < 1)
      throw std::invalid_argument(std::string(where) + ": tableau has no stages");
    if (!is_explicit(config.tableau))
      throw std::invalid_argument(std::string(where) + ": tableau must be explicit");
  }
}

// Propagates a block of initial states (columns) through all layers.
//
// RK kinds advance y^{j+1} = y^j + dt sum_i b_i f(Y_i, u_j) with stages
// Y_i = y^j + dt sum_{l<i} a(i,l) f(Y_l, u_j); Net applies y -> sigma(Ky+b).
template <typename Scalar>
TrajectoryCache<Scalar> forward(const NetworkConfig<Scalar>& config,
                                const std::vector<LayerControls<Scalar>>& controls,
                                const Matrix<Scalar>& x0) {
  check_network_config(config, controls, "forward");
  if (x0.rows() != config.width)
    throw std::invalid_argument("forward: initial state width mismatch");
  if (x0.cols() < 1) throw std::invalid_argument("forward: no samples");

  const int N = config.layers;
  TrajectoryCache<Scalar> cache;
  cache.states.reserve(N + 1);
  cache.stage_states.resize(N);
  cache.stage_fields.resize(N);
  cache.states.push_back(x0);

  if (config.kind == Architecture::Net) {
    for (int j = 0; j < N; ++j) {
      const Matrix<Scalar>& y = cache.states.back();
      Matrix<Scalar> next = vector_field(config.kind, controls[j], y);
      cache.stage_states[j] = {y};
      cache.stage_fields[j] = {next};
      cache.states.push_back(std::move(next));
    }
    return cache;
  }

  const auto& tab = config.tableau;
  const int s = tab.stages;
  const Scalar dt = config.dt;
  for (int j = 0; j < N; ++j) {
    const Matrix<Scalar>& y = cache.states.back();
    auto& ys = cache.stage_states[j];
    auto& fs = cache.stage_fields[j];
    ys.resize(s);
    fs.resize(s);
    for (int i = 0; i < s; ++i) {
      Matrix<Scalar> yi = y;
      for (int l = 0; l < i; ++l)
        if (tab.a(i, l) != Scalar(0)) yi += dt * tab.a(i, l) * fs[l];
      fs[i] = vector_field(config.kind, controls[j], yi);
      ys[i] = std::move(yi);
    }
    Matrix<Scalar> next = y;
    for (int i = 0; i < s; ++i) next += dt * tab.b(i) * fs[i];
    cache.states.push_back(std::move(next));
  }
  return cache;
}

template <typename Scalar>
TrajectoryCache<Scalar> forward(const NetworkConfig<Scalar>& config,
                                const std::vector<LayerControls<Scalar>>& controls,
                                const Vector<Scalar>& x0) {
  return forward(config, controls, Matrix<Scalar>(x0));
}

// Per-sample propagation of a dataset (rows of features are samples).
// Output order matches input order independent of thread count; each entry
// is bit-identical to forward() on that sample alone.
template <typename Scalar>
std::vector<TrajectoryCache<Scalar>> forward_batch(
    const NetworkConfig<Scalar>& config,
    const std::vector<LayerControls<Scalar>>& controls,
    const Matrix<Scalar>& features, int threads = 1) {
  if (features.cols() != config.width)
    throw std::invalid_argument("forward_batch: feature width mismatch");
  const Eigen::Index m = features.rows();
  std::vector<TrajectoryCache<Scalar>> out(m);
  auto run_range = [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index i = lo; i < hi; ++i)
      out[i] = forward(config, controls, Matrix<Scalar>(features.row(i).transpose()));
  };
  if (threads <= 1 || m <= 1) {
    run_range(0, m);
    return out;
  }
  const int workers = static_cast<int>(std::min<Eigen::Index>(threads, m));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const Eigen::Index chunk = (m + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index lo = w * chunk;
    const Eigen::Index hi = std::min(m, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(run_range, lo, hi);
  }
  for (auto& t : pool) t.join();
  return out;
}

// Linearization of forward along a state perturbation v0 and per-layer
// control perturbations w, discretized with the same tableau:
// stage derivative dV_i = (d_y f)(Y_i) V_i + (d_u f)(Y_i) w_j.
// Returns the perturbation at every layer interface (layers + 1 entries).
template <typename Scalar>
std::vector<Matrix<Scalar>> evolve_variational(
    const NetworkConfig<Scalar>& config,
    const std::vector<LayerControls<Scalar>>& controls,
    const TrajectoryCache<Scalar>& cache, const Matrix<Scalar>& v0,
    const std::vector<LayerControls<Scalar>>& w) {
  check_network_config(config, controls, "evolve_variational");
  const int N = config.layers;
  if (static_cast<int>(cache.states.size()) != N + 1)
    throw std::invalid_argument("evolve_variational: cache does not match config");
  if (v0.rows() != config.width || v0.cols() != cache.sample_count())
    throw std::invalid_argument("evolve_variational: perturbation shape mismatch");
  if (static_cast<int>(w.size()) != N)
    throw std::invalid_argument("evolve_variational: expected one perturbation per layer");
  for (const auto& wj : w) check_layer_shapes(wj, config.width, "evolve_variational");

  std::vector<Matrix<Scalar>> vs;
  vs.reserve(N + 1);
  vs.push_back(v0);

  if (config.kind == Architecture::Net) {
    for (int j = 0; j < N; ++j) {
      const Matrix<Scalar>& y = cache.states[j];
      vs.push_back(jac_y_apply(config.kind, controls[j], y, vs.back()) +
                   jac_u_apply(config.kind, controls[j], y, w[j]));
    }
    return vs;
  }

  const auto& tab = config.tableau;
  const int s = tab.stages;
  const Scalar dt = config.dt;
  for (int j = 0; j < N; ++j) {
    const Matrix<Scalar>& v = vs.back();
    std::vector<Matrix<Scalar>> dv(s);
    for (int i = 0; i < s; ++i) {
      Matrix<Scalar> vi = v;
      for (int l = 0; l < i; ++l)
        if (tab.a(i, l) != Scalar(0)) vi += dt * tab.a(i, l) * dv[l];
      dv[i] = jac_y_apply(config.kind, controls[j], cache.stage_states[j][i], vi) +
              jac_u_apply(config.kind, controls[j], cache.stage_states[j][i], w[j]);
    }
    Matrix<Scalar> next = v;
    for (int i = 0; i < s; ++i) next += dt * tab.b(i) * dv[i];
    vs.push_back(std::move(next));
  }
  return vs;
}

}  // namespace odectrl
