// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference checks of every analytic gradient in the build.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vagg/encoder.hpp"

namespace vagg {

/// |analytic - numeric| / max(|analytic|, |numeric|, kGradCheckFloor).
double gradient_relative_error(double analytic, double numeric);

/// Magnitudes below this are compared absolutely. Central differences at
/// h = 1e-5 on a loss of magnitude ~20 carry roughly 5e-10 of rounding noise,
/// so entries near 1e-6 cannot be resolved to 1e-4 relative.
inline constexpr double kGradCheckFloor = 1e-5;

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 1;  // independent random instances per suite
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Test hook: perturb the analytic gradient of every group whose name
  /// contains this substring.
  std::string inject_fault;
  EncoderConfig encoder = small_encoder();
  std::size_t frames = 3;

  static EncoderConfig small_encoder() {
    EncoderConfig c = EncoderConfig::make(8, 2, 1);
    return c;
  }
};

struct GradCheckEntry {
  std::string group;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;
  bool pass() const;
};

/// matmul, softmax_rows and layer_norm backward rules.
GradCheckReport check_numkernel_grads(const GradCheckOptions& opt);
/// Encoder backward against L = sum of outputs, per tensor and for the input.
GradCheckReport check_encoder_grads(const GradCheckOptions& opt);
/// Encoder -> aggregate -> cosine embedding loss, per tensor.
GradCheckReport check_pipeline_grads(const GradCheckOptions& opt);

/// All three suites concatenated.
GradCheckReport run_all_grad_checks(const GradCheckOptions& opt);

}  // namespace vagg
