#pragma once

#include <vector>

#include "fringeforge/geometry.hpp"
#include "fringeforge/raster.hpp"

namespace fringeforge {

/// Wraps an angle into (-pi, pi]; the -pi boundary maps to +pi.
inline double wrap_pi(double x) {
    double r = std::remainder(x, kTwoPi);
    if (r <= -kPi) r = kPi;
    return r;
}

/// Uniform N-step phase-shift schedule d_k = 2*pi*k/N, k = 0..N-1.
/// Requires N >= 3 (the three unknowns of the sinusoidal model).
class PhaseShiftSchedule {
public:
    explicit PhaseShiftSchedule(int steps);

    int steps() const { return static_cast<int>(shifts_.size()); }
    const std::vector<double>& shifts() const { return shifts_; }

private:
    std::vector<double> shifts_;
};

struct WrapOptions {
    // Pixels whose modulation is at or below this fraction of the stack's
    // peak average intensity are masked out as unreliable.
    double modulation_floor_fraction = 0.02;
    // Pixels where both quadrature sums are below this magnitude are masked
    // (the arctangent argument is numerically undefined there).
    double numeric_floor = 1e-12;
};

struct WrappedPhaseMap {
    ScalarMap phase;        // (-pi, pi], -pi mapped to +pi
    ScalarMap modulation;   // carried along for masking provenance
    ScalarMap average;
    double modulation_threshold = 0.0;  // absolute threshold actually applied
};

/// Least-squares wrapped phase of a phase-shifted stack:
///   phi = -atan2(sum I_k sin d_k, sum I_k cos d_k)
/// evaluated with the four-quadrant arctangent and the stack's recorded
/// shifts. Per-pixel sums run in ascending k order. Throws InvalidStack when
/// the stack violates its contract.
WrappedPhaseMap wrapped_phase(const FringeStack& stack, const WrapOptions& options = {});

}  // namespace fringeforge
