#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

namespace flowlut {

struct PipelineConfig {
  std::size_t num_luts = 8;
  std::size_t lattice_size = 33;
  std::size_t flow_steps = 4;
  bool specialized_init = true;

  // Network widths.
  std::size_t wg_c1 = 64;
  std::size_t wg_c2 = 128;
  std::size_t wg_c3 = 256;
  std::size_t head_hidden = 128;
  std::size_t flow_width = 64;

  // The weight generator sees the image bilinearly downsampled to at most
  // this size (never upsampled).
  std::size_t analysis_height = 256;
  std::size_t analysis_width = 256;
  // 0 means refine at the native resolution.
  std::size_t processing_height = 0;
  std::size_t processing_width = 0;

  double lambda_perceptual = 0.1;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;

  /// Throws UsageError naming the first violated constraint.
  void validate() const;

  /// Applies `key = value` overrides; unknown keys are rejected.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
};

/// Parses a plain-text config: `key = value` lines, `#` comments.
PipelineConfig load_config_file(const std::string& path, PipelineConfig base = {});

}  // namespace flowlut
