#include "homlab/splitter.hpp"

#include <cmath>

#include "homlab/errors.hpp"

namespace homlab {

void SplitterSpec::validate() const {
  if (!(t_power > 0.0 && t_power < 1.0)) throw DomainError("splitter t_power must lie in (0, 1)");
  if (!std::isfinite(phase_error)) throw DomainError("splitter phase_error must be finite");
}

SplitOutputs split(const SampledSignal& e1, const SampledSignal& e2, const SplitterSpec& spec) {
  spec.validate();
  require_same_grid(e1, e2);

  const double t = std::sqrt(spec.t_power);
  const double r = std::sqrt(1.0 - spec.t_power);

  // The phase error is a frequency-domain rotation for real voltages.
  const SampledSignal e2_rotated =
      spec.phase_error == 0.0 ? e2 : phase_shift(e2, spec.phase_error);

  SampledSignal plus = e1;
  SampledSignal minus = e1;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    plus[i] = t * e1[i] + r * e2[i];
    minus[i] = r * e1[i] - t * e2_rotated[i];
  }
  return {std::move(plus), std::move(minus)};
}

SplitOutputs mzi_classical(const SampledSignal& e1, const SampledSignal& e2, const MziConfig& cfg) {
  auto arms = split(e1, e2, cfg.ps1);
  if (cfg.arm_phase != 0.0) arms.minus = phase_shift(arms.minus, cfg.arm_phase);
  switch (cfg.blocked) {
    case BlockedArm::plus_arm:
      arms.plus *= 0.0;
      break;
    case BlockedArm::minus_arm:
      arms.minus *= 0.0;
      break;
    case BlockedArm::none:
      break;
  }
  return split(arms.plus, arms.minus, cfg.ps2);
}

}  // namespace homlab
