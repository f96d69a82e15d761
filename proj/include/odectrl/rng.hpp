#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "odectrl/types.hpp"

// Deterministic sampling helpers. std::uniform_real_distribution and
// std::normal_distribution are implementation-defined, so seeded runs would
// not reproduce across standard libraries; these draw directly from the
// mt19937_64 bit stream.

namespace odectrl {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; draws two uniforms per pair, caches the second deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * normal();
    return m;
  }

  VectorXd normal_vector(Eigen::Index size, double scale = 1.0) {
    VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = scale * normal();
    return v;
  }

  std::uint64_t bits() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace odectrl
