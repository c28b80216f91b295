#pragma once

#include <cstdint>

namespace flowlut {

/// Fingerprint of the discrete choices made while recording a graph: ReLU
/// masks, pooling winners, clamp regions, LUT cells. Two evaluations with the
/// same digest lie on the same smooth piece of the function, which is what a
/// finite-difference comparison needs. Recording ops feed the probe only
/// while one is installed on the current thread.
class BranchProbe {
 public:
  void mix(std::uint64_t v) {
    h_ ^= v + 0x9e3779b97f4a7c15ULL + (h_ << 6) + (h_ >> 2);
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

/// The probe installed on this thread, or null.
BranchProbe* active_branch_probe();

class ScopedBranchProbe {
 public:
  explicit ScopedBranchProbe(BranchProbe& p);
  ~ScopedBranchProbe();
  ScopedBranchProbe(const ScopedBranchProbe&) = delete;
  ScopedBranchProbe& operator=(const ScopedBranchProbe&) = delete;

 private:
  BranchProbe* prev_;
};

}  // namespace flowlut
