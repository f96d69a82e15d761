#pragma once

#include <stdexcept>

#include "odectrl/types.hpp"

namespace odectrl {

// Affine read-out z = W y + mu followed by the logistic hypothesis.
template <typename Scalar>
struct ClassifierHead {
  RowVector<Scalar> weight;  // W, 1 x n
  Scalar bias = 0;           // mu
};

template <typename Scalar>
Scalar hypothesis(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

// C'(z) = C(z) (1 - C(z)).
template <typename Scalar>
Scalar hypothesis_prime(Scalar z) {
  const Scalar c = hypothesis(z);
  return c * (Scalar(1) - c);
}

// W Y + mu for each column of Y.
template <typename Scalar, typename Derived>
RowVector<Scalar> scores(const ClassifierHead<Scalar>& head,
                         const Eigen::MatrixBase<Derived>& y) {
  if (head.weight.size() != y.rows())
    throw std::invalid_argument("scores: classifier width mismatch");
  return ((head.weight * y).array() + head.bias).matrix();
}

// J = 1/2 sum_i (C(W y_i + mu) - c_i)^2. The 1/2 is kept and no averaging
// over samples is applied, so gradients match the adjoint pass exactly.
template <typename Scalar, typename Derived>
Scalar batch_loss(const ClassifierHead<Scalar>& head,
                  const Eigen::MatrixBase<Derived>& y,
                  const Eigen::VectorXi& labels) {
  if (labels.size() != y.cols())
    throw std::invalid_argument("batch_loss: one label per sample required");
  const RowVector<Scalar> z = scores(head, y);
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const Scalar r = hypothesis(z(i)) - Scalar(labels(i));
    acc += r * r;
  }
  return acc / 2;
}

// Class 1 iff the score is strictly positive; a score of exactly zero
// (hypothesis 1/2) resolves to class 0.
template <typename Scalar>
int predict(Scalar score) {
  return score > Scalar(0) ? 1 : 0;
}

template <typename Scalar, typename Derived>
Scalar accuracy(const ClassifierHead<Scalar>& head,
                const Eigen::MatrixBase<Derived>& y,
                const Eigen::VectorXi& labels) {
  if (labels.size() != y.cols())
    throw std::invalid_argument("accuracy: one label per sample required");
  if (labels.size() == 0) throw std::invalid_argument("accuracy: empty batch");
  const RowVector<Scalar> z = scores(head, y);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (predict(z(i)) == labels(i)) ++hits;
  return Scalar(hits) / Scalar(labels.size());
}

}  // namespace odectrl
