#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "odectrl/adjoint.hpp"
#include "odectrl/loss.hpp"
#include "odectrl/propagation.hpp"
#include "odectrl/rng.hpp"
#include "odectrl/types.hpp"

namespace odectrl {

// ---------------------------------------------------------------------------
// Parameter packing

// Describes the flat coordinate order used when the whole parameter set is
// treated as one vector: per layer K (column-major), beta, then alpha when
// the architecture carries one; classifier W and mu last when included.
struct ParameterLayout {
  int width = 0;
  int layers = 0;
  bool alpha = false;
  bool head = true;

  Eigen::Index layer_size() const {
    return static_cast<Eigen::Index>(width) * width + width + (alpha ? 1 : 0);
  }
  Eigen::Index size() const {
    return layers * layer_size() + (head ? width + 1 : 0);
  }
};

template <typename Scalar>
ParameterLayout layout_for(const NetworkConfig<Scalar>& config, bool head = true) {
  return ParameterLayout{config.width, config.layers, has_alpha(config.kind), head};
}

// Trainable state as structured blocks; the training loop works on this
// form directly so MNIST-sized weight matrices are never copied through an
// intermediate flat vector.
template <typename Scalar>
struct ParameterSet {
  std::vector<LayerControls<Scalar>> controls;
  ClassifierHead<Scalar> head;
};

template <typename Scalar>
Vector<Scalar> flatten(const ParameterLayout& layout,
                       const std::vector<LayerControls<Scalar>>& controls,
                       const ClassifierHead<Scalar>& head) {
  if (static_cast<int>(controls.size()) != layout.layers)
    throw std::invalid_argument("flatten: layer count does not match layout");
  Vector<Scalar> out(layout.size());
  Eigen::Index at = 0;
  const Eigen::Index n = layout.width;
  for (const auto& u : controls) {
    out.segment(at, n * n) = Eigen::Map<const Vector<Scalar>>(u.weight.data(), n * n);
    at += n * n;
    out.segment(at, n) = u.bias;
    at += n;
    if (layout.alpha) out(at++) = u.alpha;
  }
  if (layout.head) {
    out.segment(at, n) = head.weight.transpose();
    at += n;
    out(at++) = head.bias;
  }
  return out;
}

// Gradient bundles flatten into the same coordinate order as parameters.
template <typename Scalar>
Vector<Scalar> flatten(const ParameterLayout& layout,
                       const GradientBundle<Scalar>& bundle) {
  std::vector<LayerControls<Scalar>> as_controls(bundle.layers.size());
  for (std::size_t j = 0; j < bundle.layers.size(); ++j) {
    as_controls[j].weight = bundle.layers[j].weight;
    as_controls[j].bias = bundle.layers[j].bias;
    as_controls[j].alpha = bundle.layers[j].alpha;
  }
  ClassifierHead<Scalar> head;
  head.weight = layout.head ? bundle.head_weight : RowVector<Scalar>::Zero(layout.width);
  head.bias = layout.head ? bundle.head_bias : Scalar(0);
  return flatten(layout, as_controls, head);
}

template <typename Scalar>
ParameterSet<Scalar> unflatten(const ParameterLayout& layout,
                               const Vector<Scalar>& v) {
  if (v.size() != layout.size())
    throw std::invalid_argument("unflatten: vector length does not match layout");
  ParameterSet<Scalar> out;
  out.controls.resize(layout.layers);
  Eigen::Index at = 0;
  const Eigen::Index n = layout.width;
  for (auto& u : out.controls) {
    u.weight = Eigen::Map<const Matrix<Scalar>>(v.data() + at, n, n);
    at += n * n;
    u.bias = v.segment(at, n);
    at += n;
    u.alpha = layout.alpha ? v(at++) : Scalar(1);
  }
  if (layout.head) {
    out.head.weight = v.segment(at, n).transpose();
    at += n;
    out.head.bias = v(at++);
  } else {
    out.head.weight = RowVector<Scalar>::Zero(n);
    out.head.bias = Scalar(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vector-space operations shared by flat and structured parameters

template <typename Scalar>
Vector<Scalar> param_step(const Vector<Scalar>& u, const Vector<Scalar>& g,
                          Scalar step) {
  return u - step * g;
}

template <typename Scalar>
Scalar param_dot(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  return a.dot(b);
}

template <typename Scalar>
Vector<Scalar> param_diff(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  return a - b;
}

template <typename Scalar>
ParameterSet<Scalar> param_step(const ParameterSet<Scalar>& u,
                                const ParameterSet<Scalar>& g, Scalar step) {
  if (g.controls.size() != u.controls.size())
    throw std::invalid_argument("param_step: layer count mismatch");
  ParameterSet<Scalar> out = u;
  for (std::size_t j = 0; j < u.controls.size(); ++j) {
    out.controls[j].weight -= step * g.controls[j].weight;
    out.controls[j].bias -= step * g.controls[j].bias;
    out.controls[j].alpha -= step * g.controls[j].alpha;
  }
  out.head.weight -= step * g.head.weight;
  out.head.bias -= step * g.head.bias;
  return out;
}

template <typename Scalar>
Scalar param_dot(const ParameterSet<Scalar>& a, const ParameterSet<Scalar>& b) {
  if (a.controls.size() != b.controls.size())
    throw std::invalid_argument("param_dot: layer count mismatch");
  Scalar acc = 0;
  for (std::size_t j = 0; j < a.controls.size(); ++j) {
    acc += a.controls[j].weight.cwiseProduct(b.controls[j].weight).sum();
    acc += a.controls[j].bias.dot(b.controls[j].bias);
    acc += a.controls[j].alpha * b.controls[j].alpha;
  }
  acc += a.head.weight.dot(b.head.weight);
  acc += a.head.bias * b.head.bias;
  return acc;
}

template <typename Scalar>
ParameterSet<Scalar> param_diff(const ParameterSet<Scalar>& a,
                                const ParameterSet<Scalar>& b) {
  return param_step(a, b, Scalar(1));
}

// ---------------------------------------------------------------------------
// Steps

// Plain gradient descent update u - tau * g.
template <typename P, typename Scalar>
P gd_step(const P& params, const P& grad, Scalar tau) {
  return param_step(params, grad, tau);
}

// Euclidean projection onto the probability simplex (sort-based; Held's
// theta threshold). Total for any finite input.
template <typename Scalar>
Vector<Scalar> project_simplex(const Vector<Scalar>& a) {
  const Eigen::Index dim = a.size();
  if (dim < 1) throw std::invalid_argument("project_simplex: empty input");
  std::vector<Scalar> sorted(a.data(), a.data() + dim);
  std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());
  Scalar cumulative = 0;
  Scalar theta = 0;
  for (Eigen::Index k = 0; k < dim; ++k) {
    cumulative += sorted[k];
    const Scalar candidate = (cumulative - Scalar(1)) / Scalar(k + 1);
    if (sorted[k] - candidate > Scalar(0)) theta = candidate;
  }
  return (a.array() - theta).max(Scalar(0)).matrix();
}

struct BacktrackState {
  double lipschitz = 1.0;  // running estimate L
  double rho_up = 2.0;     // rejection multiplier
  double rho_down = 0.9;   // acceptance multiplier
  int max_inner = 60;
  long accepted = 0;
  long rejected = 0;
};

// One backtracked proximal-gradient step. The candidate is
// project(u - g / L) and acceptance demands the quadratic upper bound
//
//   J(u~) <= J(u) + <g, u~ - u> + (L/2) |u~ - u|^2,
//
// evaluated at the projected candidate, so every accepted iterate is
// feasible and the accepted loss can never increase. On acceptance L
// shrinks by rho_down for the next iteration; on rejection it grows by
// rho_up and the candidate is recomputed. Throws after max_inner
// consecutive rejections.
template <typename P, typename LossFn, typename Projector>
std::pair<P, double> backtracking_step(const P& params, double current_loss,
                                       const P& grad, LossFn&& loss_fn,
                                       BacktrackState& state,
                                       Projector&& project) {
  for (int attempt = 0; attempt < state.max_inner; ++attempt) {
    P candidate = project(param_step(params, grad, 1.0 / state.lipschitz));
    const double candidate_loss = loss_fn(candidate);
    const P d = param_diff(candidate, params);
    const double bound = current_loss + param_dot(grad, d) +
                         0.5 * state.lipschitz * param_dot(d, d);
    if (candidate_loss <= bound) {
      ++state.accepted;
      state.lipschitz *= state.rho_down;
      return {std::move(candidate), candidate_loss};
    }
    ++state.rejected;
    state.lipschitz *= state.rho_up;
  }
  throw std::runtime_error("backtracking_step: no acceptable step after " +
                           std::to_string(state.max_inner) + " trials");
}

template <typename P, typename LossFn>
std::pair<P, double> backtracking_step(const P& params, double current_loss,
                                       const P& grad, LossFn&& loss_fn,
                                       BacktrackState& state) {
  return backtracking_step(params, current_loss, grad,
                           std::forward<LossFn>(loss_fn), state,
                           [](P p) { return p; });
}

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  int max_iters = 10000;
  std::uint64_t seed = 1;
  bool fixed_classifier = false;
  double l0 = 1.0;
  double rho_up = 2.0;
  double rho_down = 0.9;
  int max_inner = 60;
  // Stop once recorded train accuracy reaches this value; <= 0 disables.
  double target_train_accuracy = -1.0;
};

// Row k describes the state after k accepted steps; row 0 is the
// initialization. Wall-clock stays in memory only so written artifacts are
// reproducible byte-for-byte.
struct TrainRecord {
  std::vector<double> train_loss, test_loss, train_acc, test_acc;
  std::vector<double> lipschitz;
  std::vector<double> wall_seconds;
  std::vector<VectorXd> alphas;  // one snapshot per row for alpha kinds
  ParameterSet<double> params;
  int iterations = 0;
};

// K ~ N(0,1)/sqrt(n), beta = 0, alpha = 1/N (feasible for the simplex),
// W ~ N(0,1)/sqrt(n), mu = 0. Draw order is fixed: layer weights first,
// classifier last, so seeded runs reproduce exactly.
template <typename Scalar>
ParameterSet<Scalar> init_parameters(const NetworkConfig<Scalar>& config, Rng& rng) {
  const int n = config.width;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(n));
  ParameterSet<Scalar> p;
  p.controls.resize(config.layers);
  for (auto& u : p.controls) {
    u.weight = rng.normal_matrix(n, n, scale);
    u.bias = Vector<Scalar>::Zero(n);
    u.alpha = has_alpha(config.kind) ? Scalar(1) / Scalar(config.layers) : Scalar(1);
  }
  p.head.weight = rng.normal_vector(n, scale).transpose();
  p.head.bias = Scalar(0);
  return p;
}

namespace detail {

inline VectorXd gather_alphas(const ParameterSet<double>& p) {
  VectorXd a(p.controls.size());
  for (std::size_t j = 0; j < p.controls.size(); ++j) a(j) = p.controls[j].alpha;
  return a;
}

inline void scatter_alphas(ParameterSet<double>& p, const VectorXd& a) {
  for (std::size_t j = 0; j < p.controls.size(); ++j) p.controls[j].alpha = a(j);
}

// Gradient fragments mirror the control coordinates, so a gradient reshaped
// as controls can drive the structured parameter arithmetic directly.
inline std::vector<LayerControls<double>> as_controls(
    std::vector<LayerGradient<double>>&& g) {
  std::vector<LayerControls<double>> out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    out[j].weight = std::move(g[j].weight);
    out[j].bias = std::move(g[j].bias);
    out[j].alpha = g[j].alpha;
  }
  return out;
}

}  // namespace detail

// Full-batch projected backtracking descent (identity projection unless the
// architecture constrains alpha to the simplex). Records one row per
// accepted step plus the initial state. Test metrics are evaluated every
// iteration on the held-out set; the training set alone drives descent.
inline TrainRecord train(const NetworkConfig<double>& config,
                         const MatrixXd& train_features,
                         const Eigen::VectorXi& train_labels,
                         const MatrixXd& test_features,
                         const Eigen::VectorXi& test_labels,
                         const TrainOptions& opts) {
  if (train_features.cols() != config.width || test_features.cols() != config.width)
    throw std::invalid_argument("train: feature width does not match network width");
  if (train_features.rows() != train_labels.size() ||
      test_features.rows() != test_labels.size())
    throw std::invalid_argument("train: one label per sample required");

  const MatrixXd x_train = train_features.transpose();
  const MatrixXd x_test = test_features.transpose();

  Rng rng(opts.seed);
  ParameterSet<double> params = init_parameters(config, rng);

  const bool simplex = config.kind == Architecture::OdeNetSimplex;
  auto project = [&](ParameterSet<double> p) {
    if (simplex) detail::scatter_alphas(p, project_simplex(detail::gather_alphas(p)));
    return p;
  };
  params = project(params);

  struct Metrics {
    double loss = 0, acc = 0;
  };
  auto evaluate = [&](const ParameterSet<double>& p, const MatrixXd& x,
                      const Eigen::VectorXi& labels) -> Metrics {
    const auto cache = forward(config, p.controls, x);
    const MatrixXd& yn = cache.states.back();
    return {batch_loss(p.head, yn, labels), accuracy(p.head, yn, labels)};
  };

  BacktrackState bt;
  bt.lipschitz = opts.l0;
  bt.rho_up = opts.rho_up;
  bt.rho_down = opts.rho_down;
  bt.max_inner = opts.max_inner;

  TrainRecord rec;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto record = [&](double loss, double acc, const ParameterSet<double>& p) {
    const Metrics te = evaluate(p, x_test, test_labels);
    rec.train_loss.push_back(loss);
    rec.train_acc.push_back(acc);
    rec.test_loss.push_back(te.loss);
    rec.test_acc.push_back(te.acc);
    rec.lipschitz.push_back(bt.lipschitz);
    rec.wall_seconds.push_back(elapsed());
    if (has_alpha(config.kind)) rec.alphas.push_back(detail::gather_alphas(p));
  };

  Metrics tr = evaluate(params, x_train, train_labels);
  record(tr.loss, tr.acc, params);

  // The candidate evaluated immediately before acceptance is the accepted
  // point, so its accuracy can be stashed instead of re-propagating.
  double last_eval_acc = tr.acc;
  auto loss_fn = [&](const ParameterSet<double>& p) {
    const Metrics m = evaluate(p, x_train, train_labels);
    last_eval_acc = m.acc;
    return m.loss;
  };

  double current_loss = tr.loss;
  for (int k = 1; k <= opts.max_iters; ++k) {
    auto lg = full_gradient(config, params.controls, params.head, train_features,
                            train_labels);
    ParameterSet<double> grad;
    grad.controls = detail::as_controls(std::move(lg.gradient.layers));
    if (opts.fixed_classifier) {
      grad.head.weight = RowVectorXd::Zero(config.width);
      grad.head.bias = 0.0;
    } else {
      grad.head.weight = std::move(lg.gradient.head_weight);
      grad.head.bias = lg.gradient.head_bias;
    }
    auto [next, next_loss] =
        backtracking_step(params, current_loss, grad, loss_fn, bt, project);
    params = std::move(next);
    current_loss = next_loss;
    rec.iterations = k;
    record(current_loss, last_eval_acc, params);
    if (opts.target_train_accuracy > 0 &&
        last_eval_acc >= opts.target_train_accuracy)
      break;
  }
  rec.params = std::move(params);
  return rec;
}

}  // namespace odectrl
