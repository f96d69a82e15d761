#include "odectrl/check.hpp"

#include <algorithm>
#include <cmath>

#include "odectrl/adjoint.hpp"
#include "odectrl/optimizer.hpp"
#include "odectrl/oracle.hpp"
#include "odectrl/propagation.hpp"
#include "odectrl/rng.hpp"
#include "odectrl/tableau.hpp"

namespace odectrl {

namespace {

NetworkConfig<double> small_network(const std::string& arch,
                                    const std::string& tableau, int layers,
                                    double dt) {
  NetworkConfig<double> net;
  net.kind = architecture_from_name(arch);
  net.tableau = make_tableau<double>(tableau);
  net.width = 2;
  net.layers = layers;
  net.dt = dt;
  return net;
}

}  // namespace

double max_gradient_rel_error(const std::string& arch, const std::string& tableau,
                              std::uint64_t seed, bool corrupt) {
  const NetworkConfig<double> net = small_network(arch, tableau, 3, 0.1);
  const ParameterLayout layout = layout_for(net);

  Rng rng(seed);
  const VectorXd flat_params = rng.normal_vector(layout.size(), 0.1);
  const int m = 5;
  const MatrixXd features = rng.normal_matrix(m, net.width, 0.8);
  Eigen::VectorXi labels(m);
  for (int i = 0; i < m; ++i) labels(i) = i % 2;

  // Forward-only objective: the probe never touches the adjoint code.
  auto objective = [&](const VectorXd& v) {
    const ParameterSet<double> p = unflatten(layout, v);
    const auto cache = forward(net, p.controls, MatrixXd(features.transpose()));
    return batch_loss(p.head, cache.states.back(), labels);
  };

  const ParameterSet<double> p = unflatten(layout, flat_params);
  const auto lg = full_gradient(net, p.controls, p.head, features, labels);
  VectorXd analytic = flatten(layout, lg.gradient);
  if (corrupt && analytic.size() > 0) {
    Eigen::Index top = 0;
    analytic.cwiseAbs().maxCoeff(&top);
    analytic(top) = -analytic(top);
  }

  const VectorXd probe = fd_gradient(objective, flat_params, 1e-5);

  // Errors are scaled by the gradient's magnitude, not per coordinate: the
  // probe's own noise floor (roundoff of the objective divided by 2h) swamps
  // coordinates that are individually near zero, while any systematic defect
  // shows up on the large coordinates.
  const double scale = std::max({analytic.cwiseAbs().maxCoeff(),
                                 probe.cwiseAbs().maxCoeff(), 1e-10});
  return (analytic - probe).cwiseAbs().maxCoeff() / scale;
}

double pairing_drift(const std::string& arch, const std::string& tableau,
                     std::uint64_t seed, int layers) {
  const NetworkConfig<double> net = small_network(arch, tableau, layers, 0.05);

  Rng rng(seed);
  std::vector<LayerControls<double>> controls(net.layers);
  for (auto& u : controls) {
    u.weight = rng.normal_matrix(net.width, net.width, 0.3);
    u.bias = rng.normal_vector(net.width, 0.3);
    u.alpha = has_alpha(net.kind) ? rng.uniform(0.2, 1.0) : 1.0;
  }
  const MatrixXd x0 = rng.normal_matrix(net.width, 1, 1.0);
  const MatrixXd v0 = rng.normal_matrix(net.width, 1, 1.0);
  const MatrixXd p_final = rng.normal_matrix(net.width, 1, 1.0);

  const auto cache = forward(net, controls, x0);
  std::vector<LayerControls<double>> no_perturbation(net.layers);
  for (auto& w : no_perturbation) {
    w.weight = MatrixXd::Zero(net.width, net.width);
    w.bias = VectorXd::Zero(net.width);
    w.alpha = 0.0;
  }
  const auto vs = evolve_variational(net, controls, cache, v0, no_perturbation);
  const auto adj = backward(net, controls, cache, p_final);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int j = 0; j <= net.layers; ++j) {
    const double pairing = adj.costates[j].cwiseProduct(vs[j]).sum();
    lo = std::min(lo, pairing);
    hi = std::max(hi, pairing);
  }
  const double base = adj.costates[net.layers].cwiseProduct(vs[net.layers]).sum();
  return (hi - lo) / std::max(std::abs(base), 1e-30);
}

CheckReport run_check(const std::string& arch, const std::string& tableau,
                      std::uint64_t seed, bool corrupt) {
  CheckReport report;
  report.gradient_error = max_gradient_rel_error(arch, tableau, seed, corrupt);
  report.drift = pairing_drift(arch, tableau, seed);
  report.gradient_pass = report.gradient_error <= report.gradient_tolerance;
  report.drift_pass = report.drift <= report.drift_tolerance;
  return report;
}

}  // namespace odectrl
