#include "fringeforge/unwrap.hpp"

#include <cmath>

#include "fringeforge/errors.hpp"
#include "fringeforge/geometry.hpp"
#include "fringeforge/parallel.hpp"

namespace fringeforge {

double equivalent_wavelength(double lambda_h, double lambda_l) {
    if (!(lambda_h > 0.0))
        throw DomainError("equivalent_wavelength: lambda_h must be positive");
    if (!(lambda_l > lambda_h))
        throw DomainError(
            "equivalent_wavelength: lambda_l must exceed lambda_h "
            "(equivalent wavelength would be non-positive or infinite)");
    return lambda_h * lambda_l / (lambda_l - lambda_h);
}

ScalarMap equivalent_phase(const ScalarMap& phi_h, const ScalarMap& phi_l) {
    if (!phi_h.same_shape(phi_l))
        throw DimensionMismatch("equivalent_phase: phase maps differ in size");

    ScalarMap out(phi_h.width, phi_h.height, 0.0, false);
    parallel_for(0, out.size(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!phi_h.valid(i) || !phi_l.valid(i)) continue;
            const double d = phi_h.values[idx] - phi_l.values[idx];
            double eq = d - kTwoPi * std::floor(d / kTwoPi);
            if (eq >= kTwoPi) eq = 0.0;  // guard the closed upper edge under rounding
            out.values[idx] = eq;
            out.mask[idx] = 1;
        }
    });
    return out;
}

IndexMap fringe_order(const ScalarMap& phi_h, const ScalarMap& phi_eq, double lambda_h,
                      double lambda_eq) {
    if (!phi_h.same_shape(phi_eq))
        throw DimensionMismatch("fringe_order: phase maps differ in size");
    if (!(lambda_h > 0.0) || !(lambda_eq > lambda_h))
        throw DomainError("fringe_order: need 0 < lambda_h < lambda_eq");

    const double ratio = lambda_eq / lambda_h;
    IndexMap out(phi_h.width, phi_h.height, 0, false);
    parallel_for(0, out.size(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!phi_h.valid(i) || !phi_eq.valid(i)) continue;
            const double arg =
                (ratio * phi_eq.values[idx] - (phi_h.values[idx] + kPi)) / kTwoPi;
            out.values[idx] = static_cast<std::int32_t>(std::round(arg));
            out.mask[idx] = 1;
        }
    });
    return out;
}

AbsolutePhaseMap unwrap_phase(const ScalarMap& phi_h, const IndexMap& order, double lambda_h,
                              double lambda_l) {
    if (phi_h.width != order.width || phi_h.height != order.height)
        throw DimensionMismatch("unwrap_phase: order map size differs from phase map");

    const double lambda_eq = equivalent_wavelength(lambda_h, lambda_l);
    const auto k_max = static_cast<std::int32_t>(std::ceil(lambda_eq / lambda_h)) - 1;

    AbsolutePhaseMap out;
    out.lambda_h = lambda_h;
    out.lambda_l = lambda_l;
    out.lambda_eq = lambda_eq;
    out.phase = ScalarMap(phi_h.width, phi_h.height, 0.0, false);
    out.fringe_order = IndexMap(phi_h.width, phi_h.height, 0, false);
    out.quality.assign(static_cast<std::size_t>(phi_h.size()), kUnwrapOk);

    parallel_for(0, phi_h.size(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!phi_h.valid(i) || !order.valid(i)) continue;
            std::int32_t k = order.values[idx];
            if (k < 0) {
                k = 0;
                out.quality[idx] = kUnwrapClampedLow;
            } else if (k > k_max) {
                k = k_max;
                out.quality[idx] = kUnwrapClampedHigh;
            }
            out.fringe_order.values[idx] = k;
            out.fringe_order.mask[idx] = 1;
            out.phase.values[idx] = phi_h.values[idx] + kTwoPi * k;
            out.phase.mask[idx] = 1;
        }
    });
    return out;
}

AbsolutePhaseMap unwrap_two_frequency(const ScalarMap& phi_h, const ScalarMap& phi_l,
                                      double lambda_h, double lambda_l) {
    const double lambda_eq = equivalent_wavelength(lambda_h, lambda_l);
    const ScalarMap phi_eq = equivalent_phase(phi_h, phi_l);
    const IndexMap order = fringe_order(phi_h, phi_eq, lambda_h, lambda_eq);
    return unwrap_phase(phi_h, order, lambda_h, lambda_l);
}

}  // namespace fringeforge
