#pragma once

#include <Eigen/Core>
#include <optional>

namespace dynloss {

/// Per-class loss weights at one training step. Positive, and normalized so
/// they sum to the number of classes.
using ClassWeights = Eigen::VectorXd;

/// Cyclic per-class weight schedule. One class at a time is emphasized with a
/// tent-shaped factor of amplitude A over a period of T steps; the emphasized
/// class advances every period, so a full cycle through all classes lasts C*T
/// steps. Raw factors are normalized to sum to C, which bounds each weight in
/// (0, C]. A = 1 reduces to constant all-ones weights.
struct OscillationSchedule {
    double amplitude = 1.0;             ///< A >= 1; A = 1 means no oscillation
    long period = 2;                    ///< T >= 2, in minimization steps
    int num_classes = 2;                ///< C >= 2
    std::optional<long> stop_step;      ///< weights are identically 1 for t >= stop_step

    /// Raw tent factor at a step index within one period (0 <= t_in_period < T).
    /// Rises linearly from 1 to A over the first half period, falls back to 1
    /// over the second; the value at 0 is 1, continuing the previous period.
    double tent(long t_in_period) const;

    /// Index of the class emphasized during the period containing step t.
    int emphasized_class(long t) const { return static_cast<int>((t / period) % num_classes); }

    /// Normalized weights at global step t >= 0.
    ClassWeights weights(long t) const;

    /// Throws std::invalid_argument if any parameter is out of range.
    void validate() const;
};

}  // namespace dynloss
