#pragma once

#include <cstdint>
#include <vector>

#include "fringeforge/raster.hpp"

namespace fringeforge {

// Quality codes attached to unwrapped phase maps.
inline constexpr std::uint8_t kUnwrapOk = 0;
inline constexpr std::uint8_t kUnwrapClampedLow = 1;   // negative order clamped to 0
inline constexpr std::uint8_t kUnwrapClampedHigh = 2;  // order clamped to the top of the band

/// Beat (equivalent) wavelength of a two-wavelength heterodyne pair:
///   lambda_eq = lambda_h * lambda_l / (lambda_l - lambda_h).
/// Requires 0 < lambda_h < lambda_l.
double equivalent_wavelength(double lambda_h, double lambda_l);

/// Per-pixel equivalent phase in [0, 2pi):
///   phi_eq = phi_h - phi_l - 2pi * floor((phi_h - phi_l) / 2pi).
/// Masks are intersected.
ScalarMap equivalent_phase(const ScalarMap& phi_h, const ScalarMap& phi_l);

/// Fringe order of the high-frequency phase:
///   K = Round(((lambda_eq/lambda_h) * phi_eq - (phi_h + pi)) / 2pi)
/// with Round = nearest integer, halves away from zero. The raw order is
/// returned unclamped; unwrap_phase applies the valid-band clamp.
IndexMap fringe_order(const ScalarMap& phi_h, const ScalarMap& phi_eq, double lambda_h,
                      double lambda_eq);

struct AbsolutePhaseMap {
    ScalarMap phase;                     // phi_h + 2pi*K at every valid pixel
    IndexMap fringe_order;               // clamped to [0, ceil(lambda_eq/lambda_h) - 1]
    std::vector<std::uint8_t> quality;   // kUnwrap* codes per pixel
    double lambda_h = 0.0;
    double lambda_l = 0.0;
    double lambda_eq = 0.0;
};

/// Combines wrapped high-frequency phase with a fringe-order map. Orders
/// outside [0, ceil(lambda_eq/lambda_h) - 1] (possible under noise near the
/// range boundaries) are clamped into the band and flagged in the quality
/// map.
AbsolutePhaseMap unwrap_phase(const ScalarMap& phi_h, const IndexMap& order, double lambda_h,
                              double lambda_l);

/// Full two-frequency temporal unwrap: equivalent phase, fringe order, then
/// absolute phase.
AbsolutePhaseMap unwrap_two_frequency(const ScalarMap& phi_h, const ScalarMap& phi_l,
                                      double lambda_h, double lambda_l);

}  // namespace fringeforge
