#pragma once

#include <cstdint>
#include <string>

namespace odectrl {

// Self-contained consistency probes on a small randomized instance
// (n = 2, 3 layers, 5 samples; parameters ~ N(0,1) * 0.1).

// Largest error between the adjoint gradient and a central-difference probe
// of the same objective evaluated through the forward pass alone, relative
// to the gradient's magnitude. `corrupt` flips the sign of the largest
// analytic coordinate first; it exists so the failure path can be exercised
// end to end.
double max_gradient_rel_error(const std::string& arch, const std::string& tableau,
                              std::uint64_t seed, bool corrupt = false);

// Relative drift of the pairing <p^[j], v^[j]> between the costate sweep and
// the variational sweep (no control perturbation) across `layers` layers.
// The pairing is conserved identically by the scheme, so any drift beyond
// roundoff indicates a broken adjoint.
double pairing_drift(const std::string& arch, const std::string& tableau,
                     std::uint64_t seed, int layers = 50);

struct CheckReport {
  double gradient_error = 0;
  double gradient_tolerance = 1e-6;
  double drift = 0;
  double drift_tolerance = 1e-12;
  bool gradient_pass = false;
  bool drift_pass = false;
  bool pass() const { return gradient_pass && drift_pass; }
};

CheckReport run_check(const std::string& arch, const std::string& tableau,
                      std::uint64_t seed, bool corrupt = false);

}  // namespace odectrl
