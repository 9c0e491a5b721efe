#pragma once

#include <utility>

#include "homlab/signals.hpp"

namespace homlab {

/// Lossless two-port splitter with an optional phase error on the difference port.
///
///   sum  = sqrt(t) e1 + sqrt(1-t) e2
///   diff = sqrt(1-t) e1 - sqrt(t) exp(i phase_error) e2
///
/// At t = 1/2 and zero phase error this is the 180 degree hybrid:
/// (e1 + e2)/sqrt2 on the sum port, (e1 - e2)/sqrt2 on the difference port.
struct SplitterSpec {
  double t_power = 0.5;
  double phase_error = 0.0;  // rad

  void validate() const;
  static SplitterSpec ideal() { return {}; }
};

enum class BlockedArm { none, plus_arm, minus_arm };

/// Mach-Zehnder built from two splitters. The phase shifter sits on the minus arm.
struct MziConfig {
  SplitterSpec ps1;
  SplitterSpec ps2;
  double arm_phase = 0.0;  // rad
  BlockedArm blocked = BlockedArm::none;
};

struct SplitOutputs {
  SampledSignal plus;
  SampledSignal minus;
};

SplitOutputs split(const SampledSignal& e1, const SampledSignal& e2, const SplitterSpec& spec);

/// ps1, then exp(i arm_phase) on the minus arm, optional blocking, then ps2.
SplitOutputs mzi_classical(const SampledSignal& e1, const SampledSignal& e2, const MziConfig& cfg);

}  // namespace homlab
