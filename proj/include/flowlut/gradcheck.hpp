#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace flowlut {

// Central-difference verification of every differentiable operator and of
// the composed model. Each group builds a small random instance per seed,
// back-propagates a fixed random projection of its output, and compares
// sampled parameter coordinates against (f(x+h) - f(x-h)) / 2h evaluated in
// double precision.
//
// Error per coordinate: |a - n| / max(|a|, |n|, floor), where floor is
// abs_floor plus rel_floor times the largest analytic magnitude of that
// instance. With rel_floor = 1 this is the normwise relative error: the
// float32 forward leaves about 1e-5 (times the output scale) of rounding
// noise in each difference quotient at h = 1e-3, so coordinate-wise
// relative error is meaningless for gradients near zero.
//
// Coordinates whose +-h probes change a discrete branch (ReLU mask, pool
// winner, clamp region, LUT cell) are skipped: the function is not
// differentiable across them and the difference quotient is no oracle.

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  std::size_t seeds = 20;
  double step = 1e-3;
  double abs_floor = 1e-12;
  double rel_floor = 1.0;
  /// Fraction of skipped coordinates above which a group fails.
  double max_skip_fraction = 0.2;
  /// Test hook: perturbs the analytic gradient of the named group.
  std::string corrupt_group;
  /// Restrict to these groups; empty runs all.
  std::vector<std::string> only;
};

struct GradFailure {
  std::string param;
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GroupReport {
  std::string name;
  double worst = 0.0;
  GradFailure worst_at;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::vector<GradFailure> failures;  // coordinates above tolerance
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GroupReport> groups;
  bool passed() const;
};

std::vector<std::string> gradcheck_groups();
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace flowlut
