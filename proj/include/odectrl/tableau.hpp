#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "odectrl/types.hpp"

namespace odectrl {

// Coefficients of an s-stage Runge-Kutta method. Row-sum consistency
// c_i = sum_l a(i,l) holds for every built-in tableau.
template <typename Scalar>
struct ButcherTableau {
  int stages = 0;
  Matrix<Scalar> a;   // stages x stages
  Vector<Scalar> b;   // quadrature weights
  Vector<Scalar> c;   // abscissae
  std::string name;
};

// Companion tableau generated by adjoint_of. Kept as a distinct type so the
// two cannot be mixed up at call sites; shares b and c with its partner.
template <typename Scalar>
struct AdjointTableau {
  int stages = 0;
  Matrix<Scalar> a;
  Vector<Scalar> b;
  Vector<Scalar> c;
  std::string name;
};

// Strictly lower triangular A, so stages can be evaluated in order.
template <typename Scalar>
bool is_explicit(const ButcherTableau<Scalar>& t) {
  for (int i = 0; i < t.stages; ++i)
    for (int l = i; l < t.stages; ++l)
      if (t.a(i, l) != Scalar(0)) return false;
  return true;
}

template <typename Scalar = double>
ButcherTableau<Scalar> make_tableau(std::string_view name) {
  ButcherTableau<Scalar> t;
  auto init = [&t](int s) {
    t.stages = s;
    t.a = Matrix<Scalar>::Zero(s, s);
    t.b = Vector<Scalar>::Zero(s);
    t.c = Vector<Scalar>::Zero(s);
  };
  if (name == "euler") {
    init(1);
    t.b << Scalar(1);
  } else if (name == "improved_euler") {
    init(2);
    t.a(1, 0) = Scalar(1);
    t.b << Scalar(1) / 2, Scalar(1) / 2;
    t.c << Scalar(0), Scalar(1);
  } else if (name == "kutta3") {
    init(3);
    t.a(1, 0) = Scalar(1) / 2;
    t.a(2, 0) = Scalar(-1);
    t.a(2, 1) = Scalar(2);
    t.b << Scalar(1) / 6, Scalar(2) / 3, Scalar(1) / 6;
    t.c << Scalar(0), Scalar(1) / 2, Scalar(1);
  } else if (name == "kutta4") {
    init(4);
    t.a(1, 0) = Scalar(1) / 2;
    t.a(2, 1) = Scalar(1) / 2;
    t.a(3, 2) = Scalar(1);
    t.b << Scalar(1) / 6, Scalar(1) / 3, Scalar(1) / 3, Scalar(1) / 6;
    t.c << Scalar(0), Scalar(1) / 2, Scalar(1) / 2, Scalar(1);
  } else {
    throw std::invalid_argument("unknown tableau '" + std::string(name) +
                                "'; supported: euler, improved_euler, kutta3, kutta4");
  }
  t.name = name;
  return t;
}

// Nominal classical order of each built-in method.
template <typename Scalar>
int nominal_order(const ButcherTableau<Scalar>& t) {
  if (t.name == "euler") return 1;
  if (t.name == "improved_euler") return 2;
  if (t.name == "kutta3") return 3;
  if (t.name == "kutta4") return 4;
  throw std::invalid_argument("nominal_order: unknown tableau '" + t.name + "'");
}

// Companion coefficients a~(i,j) = b_j - b_j a(j,i) / b_i. Together with
// b~ = b, c~ = c the pair satisfies b_i a~(i,j) + b_j a(j,i) = b_i b_j, the
// condition under which a partitioned RK pair preserves bilinear invariants
// (Hairer, Lubich & Wanner, Geometric Numerical Integration, Thm. IV.2.2).
template <typename Scalar>
AdjointTableau<Scalar> adjoint_of(const ButcherTableau<Scalar>& t) {
  for (int i = 0; i < t.stages; ++i)
    if (t.b(i) == Scalar(0))
      throw std::invalid_argument("adjoint_of: weight b(" + std::to_string(i) +
                                  ") is zero in tableau '" + t.name + "'");
  AdjointTableau<Scalar> adj;
  adj.stages = t.stages;
  adj.b = t.b;
  adj.c = t.c;
  adj.name = t.name + "_adjoint";
  adj.a.resize(t.stages, t.stages);
  for (int i = 0; i < t.stages; ++i)
    for (int j = 0; j < t.stages; ++j)
      adj.a(i, j) = t.b(j) - t.b(j) * t.a(j, i) / t.b(i);
  return adj;
}

// Max-norm defect of the bilinear-invariant condition for the pair (t, adj).
template <typename Scalar>
Scalar symplecticity_residual(const ButcherTableau<Scalar>& t,
                              const AdjointTableau<Scalar>& adj) {
  if (adj.stages != t.stages)
    throw std::invalid_argument("symplecticity_residual: stage counts differ");
  Scalar worst = 0;
  for (int i = 0; i < t.stages; ++i)
    for (int j = 0; j < t.stages; ++j) {
      const Scalar r = t.b(i) * adj.a(i, j) + t.b(j) * t.a(j, i) - t.b(i) * t.b(j);
      worst = std::max(worst, std::abs(r));
    }
  return worst;
}

// True when all order conditions up to `order` hold to within tol. Conditions
// through order 4 are hard-coded; higher orders are not supported.
template <typename Scalar>
bool verify_order(const ButcherTableau<Scalar>& t, int order,
                  Scalar tol = Scalar(1e-12)) {
  if (order < 1) throw std::invalid_argument("verify_order: order must be >= 1");
  if (order > 4)
    throw std::invalid_argument("verify_order: conditions beyond order 4 are not implemented");
  const int s = t.stages;
  const auto& a = t.a;
  const auto& b = t.b;
  const auto& c = t.c;
  auto ok = [tol](Scalar lhs, Scalar rhs) { return std::abs(lhs - rhs) <= tol; };

  if (!ok(b.sum(), Scalar(1))) return false;
  if (order < 2) return true;

  if (!ok(b.dot(c), Scalar(1) / 2)) return false;
  if (order < 3) return true;

  if (!ok(b.dot(c.cwiseProduct(c)), Scalar(1) / 3)) return false;
  if (!ok(b.dot(a * c), Scalar(1) / 6)) return false;
  if (order < 4) return true;

  if (!ok(b.dot(c.array().pow(3).matrix()), Scalar(1) / 4)) return false;
  if (!ok(b.cwiseProduct(c).dot(a * c), Scalar(1) / 8)) return false;
  if (!ok(b.dot(a * c.cwiseProduct(c)), Scalar(1) / 12)) return false;
  Scalar baac = 0;
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      for (int k = 0; k < s; ++k) baac += b(i) * a(i, j) * a(j, k) * c(k);
  if (!ok(baac, Scalar(1) / 24)) return false;
  return true;
}

}  // namespace odectrl
