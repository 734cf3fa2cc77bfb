#pragma once

#include <string>

#include "evasion/constraints.hpp"
#include "evasion/reference_path.hpp"

namespace evasion::validate {

struct GeometryReport {
  int samples = 0;
  int failures = 0;
  double max_intersection_residual = 0;  // worst on-circle / on-line residual [m]
  double min_subject_margin = 1e300;     // lowest subject safety value seen
  std::string first_failure;

  bool ok() const { return failures == 0; }
};

/// Randomised FCC/RCC geometry audit on one road: lead poses drawn along the
/// path, subject placed where the constraint semantics say it must be safe
/// (behind and outside the safety envelope for FCC; abeam in the avoidance
/// lane or ahead past the envelope for RCC). Checks that the subject is
/// strictly safe, every lead footprint corner is strictly unsafe, and that
/// the circle/line intersections match an independent quadratic-formula
/// oracle to 1e-9 m. `parallel` distributes samples over OpenMP threads with
/// per-sample RNG streams; results match the serial reference.
GeometryReport validate_constraint_geometry(double radius, int n_samples, unsigned seed,
                                            bool parallel = false);

}  // namespace evasion::validate
