#include <doctest.h>

#include <cmath>

#include "odectrl/oracle.hpp"
#include "odectrl/propagation.hpp"
#include "odectrl/rng.hpp"

using namespace odectrl;

namespace {

NetworkConfig<double> config_for(Architecture kind, const char* tableau,
                                 int width, int layers, double dt) {
  NetworkConfig<double> c;
  c.kind = kind;
  c.tableau = make_tableau(tableau);
  c.width = width;
  c.layers = layers;
  c.dt = dt;
  return c;
}

std::vector<LayerControls<double>> random_controls(Rng& rng, int n, int layers,
                                                   double scale, double alpha) {
  std::vector<LayerControls<double>> us(layers);
  for (auto& u : us) {
    u.weight = rng.normal_matrix(n, n, scale);
    u.bias = rng.normal_vector(n, scale);
    u.alpha = alpha;
  }
  return us;
}

}  // namespace

TEST_CASE("explicit Euler layer, by hand") {
  auto cfg = config_for(Architecture::ResNet, "euler", 1, 1, 0.2);
  std::vector<LayerControls<double>> u(1);
  u[0].weight = MatrixXd::Constant(1, 1, 0.5);
  u[0].bias = VectorXd::Constant(1, 0.1);
  VectorXd x(1);
  x << 0.3;
  const auto cache = forward(cfg, u, x);
  REQUIRE(cache.states.size() == 2);
  const double f = std::tanh(0.5 * 0.3 + 0.1);
  CHECK(cache.states[1](0, 0) == doctest::Approx(0.3 + 0.2 * f).epsilon(1e-15));
  CHECK(cache.stage_states[0][0](0, 0) == 0.3);
  CHECK(cache.stage_fields[0][0](0, 0) == doctest::Approx(f).epsilon(1e-15));

  SUBCASE("alpha scales the field for OdeNet") {
    cfg.kind = Architecture::OdeNet;
    u[0].alpha = 0.25;
    const auto c2 = forward(cfg, u, x);
    CHECK(c2.states[1](0, 0) == doctest::Approx(0.3 + 0.2 * 0.25 * f).epsilon(1e-15));
  }
}

TEST_CASE("improved Euler layer, by hand") {
  const auto cfg = config_for(Architecture::ResNet, "improved_euler", 1, 1, 0.2);
  std::vector<LayerControls<double>> u(1);
  u[0].weight = MatrixXd::Constant(1, 1, 0.5);
  u[0].bias = VectorXd::Constant(1, 0.1);
  VectorXd x(1);
  x << 0.3;
  const auto cache = forward(cfg, u, x);
  const double f1 = std::tanh(0.5 * 0.3 + 0.1);
  const double y2 = 0.3 + 0.2 * f1;
  const double f2 = std::tanh(0.5 * y2 + 0.1);
  CHECK(cache.states[1](0, 0) ==
        doctest::Approx(0.3 + 0.2 * 0.5 * (f1 + f2)).epsilon(1e-15));
  CHECK(cache.stage_states[0][1](0, 0) == doctest::Approx(y2).epsilon(1e-15));
}

TEST_CASE("Net composes the layer map directly") {
  const auto cfg = config_for(Architecture::Net, "euler", 2, 3, 99.0);  // dt unused
  Rng rng(1);
  auto us = random_controls(rng, 2, 3, 0.8, 1.0);
  VectorXd x = rng.normal_vector(2, 1.0);
  const auto cache = forward(cfg, us, x);
  VectorXd y = x;
  for (int j = 0; j < 3; ++j)
    y = activation(VectorXd(us[j].weight * y + us[j].bias));
  CHECK((cache.states[3].col(0) - y).cwiseAbs().maxCoeff() == 0.0);
  // One degenerate stage per layer: input state and output activation.
  CHECK(cache.stage_states[1].size() == 1);
  CHECK(cache.stage_fields[1][0] == cache.states[2]);
}

TEST_CASE("cache shapes follow the tableau") {
  Rng rng(2);
  for (const char* name : {"euler", "improved_euler", "kutta3", "kutta4"}) {
    CAPTURE(name);
    const auto cfg = config_for(Architecture::ResNet, name, 2, 4, 0.1);
    const auto us = random_controls(rng, 2, 4, 0.5, 1.0);
    const auto cache = forward(cfg, us, VectorXd::Zero(2).eval());
    CHECK(cache.states.size() == 5);
    CHECK(cache.stage_states.size() == 4);
    for (int j = 0; j < 4; ++j) {
      CHECK(static_cast<int>(cache.stage_states[j].size()) == cfg.tableau.stages);
      CHECK(static_cast<int>(cache.stage_fields[j].size()) == cfg.tableau.stages);
    }
  }
}

TEST_CASE("forward validates its inputs") {
  const auto cfg = config_for(Architecture::ResNet, "euler", 2, 2, 0.1);
  Rng rng(3);
  auto us = random_controls(rng, 2, 2, 0.5, 1.0);
  CHECK_THROWS_AS(forward(cfg, us, VectorXd(VectorXd::Zero(3))), std::invalid_argument);
  us.pop_back();
  CHECK_THROWS_AS(forward(cfg, us, VectorXd(VectorXd::Zero(2))), std::invalid_argument);

  auto bad_dt = cfg;
  bad_dt.dt = 0.0;
  const auto ok = random_controls(rng, 2, 2, 0.5, 1.0);
  CHECK_THROWS_AS(forward(bad_dt, ok, VectorXd(VectorXd::Zero(2))), std::invalid_argument);
}

TEST_CASE("batched forward equals per-sample forward bit for bit") {
  Rng rng(4);
  const auto cfg = config_for(Architecture::OdeNet, "kutta3", 3, 5, 0.15);
  const auto us = random_controls(rng, 3, 5, 0.6, 0.4);
  const MatrixXd features = rng.normal_matrix(6, 3, 1.0);

  // Columns of one matrix pass...
  const auto batched = forward(cfg, us, MatrixXd(features.transpose()));
  // ...and one cache per row via forward_batch, serial and threaded.
  const auto singles = forward_batch(cfg, us, features, 1);
  const auto threaded = forward_batch(cfg, us, features, 3);
  REQUIRE(singles.size() == 6);
  for (int i = 0; i < 6; ++i) {
    const auto direct =
        forward(cfg, us, VectorXd(features.row(i).transpose()));
    for (std::size_t j = 0; j < direct.states.size(); ++j) {
      CHECK(singles[i].states[j] == direct.states[j]);
      CHECK(threaded[i].states[j] == direct.states[j]);
      CHECK((batched.states[j].col(i) - direct.states[j].col(0)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("variational sweep is the derivative of forward") {
  Rng rng(5);
  const double eps = 1e-6;
  for (Architecture kind : {Architecture::ResNet, Architecture::OdeNet,
                            Architecture::Net}) {
    for (const char* name : {"euler", "kutta4"}) {
      CAPTURE(architecture_name(kind));
      CAPTURE(name);
      const auto cfg = config_for(kind, name, 2, 4, 0.2);
      const auto us = random_controls(rng, 2, 4, 0.5, 0.5);
      const auto w = random_controls(rng, 2, 4, 0.3, 0.0);  // perturbation dirs
      std::vector<LayerControls<double>> wdir = w;
      if (has_alpha(kind))
        for (auto& wj : wdir) wj.alpha = 0.2;
      const VectorXd x = rng.normal_vector(2, 0.8);
      const VectorXd v0 = rng.normal_vector(2, 1.0);

      const auto cache = forward(cfg, us, x);
      const auto vs = evolve_variational(cfg, us, cache, MatrixXd(v0), wdir);
      REQUIRE(vs.size() == 5);

      auto shifted = [&](double t) {
        auto u2 = us;
        for (int j = 0; j < 4; ++j) {
          u2[j].weight += t * wdir[j].weight;
          u2[j].bias += t * wdir[j].bias;
          u2[j].alpha += t * wdir[j].alpha;
        }
        const VectorXd x2 = x + t * v0;
        return forward(cfg, u2, x2).states.back();
      };
      const MatrixXd diff = (shifted(eps) - shifted(-eps)) / (2 * eps);
      CHECK((vs.back() - diff).cwiseAbs().maxCoeff() <=
            1e-6 * std::max(1.0, vs.back().cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("evolve_variational validates the cache") {
  Rng rng(6);
  const auto cfg = config_for(Architecture::ResNet, "euler", 2, 3, 0.1);
  const auto us = random_controls(rng, 2, 3, 0.5, 1.0);
  const auto cache = forward(cfg, us, VectorXd(rng.normal_vector(2, 1.0)));
  auto w = random_controls(rng, 2, 3, 0.0, 0.0);
  CHECK_THROWS_AS(
      evolve_variational(cfg, us, cache, MatrixXd(MatrixXd::Zero(3, 1)), w),
      std::invalid_argument);
  auto short_cfg = cfg;
  short_cfg.layers = 2;
  auto short_us = us;
  short_us.pop_back();
  auto short_w = w;
  short_w.pop_back();
  CHECK_THROWS_AS(evolve_variational(short_cfg, short_us, cache,
                                     MatrixXd(MatrixXd::Zero(2, 1)), short_w),
                  std::invalid_argument);
}

TEST_CASE("kutta4 forward agrees with the refined reference") {
  Rng rng(7);
  const auto cfg = config_for(Architecture::ResNet, "kutta4", 2, 4, 0.25);
  const auto us = random_controls(rng, 2, 4, 0.5, 1.0);
  const MatrixXd x = rng.normal_matrix(2, 1, 0.8);
  const auto cache = forward(cfg, us, x);
  const MatrixXd ref = reference_solve(cfg, us, x, 8);
  // One coarse kutta4 step per layer lands within O(dt^5) per layer of the
  // tightly refined solution.
  CHECK((cache.states.back() - ref).cwiseAbs().maxCoeff() <= 1e-5);
  // Refinement is converged: one more halving moves the answer < 1e-12.
  const MatrixXd ref2 = reference_solve(cfg, us, x, 9);
  CHECK((ref - ref2).cwiseAbs().maxCoeff() <= 1e-12);
}
