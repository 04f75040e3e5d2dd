#include "fringeforge/phase.hpp"

#include <cmath>

#include "fringeforge/errors.hpp"
#include "fringeforge/parallel.hpp"

namespace fringeforge {

PhaseShiftSchedule::PhaseShiftSchedule(int steps) {
    if (steps < 3)
        throw DomainError("PhaseShiftSchedule: at least 3 steps required, got " +
                          std::to_string(steps));
    shifts_.resize(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k)
        shifts_[static_cast<std::size_t>(k)] = kTwoPi * k / static_cast<double>(steps);
}

WrappedPhaseMap wrapped_phase(const FringeStack& stack, const WrapOptions& options) {
    if (!(options.modulation_floor_fraction >= 0.0))
        throw DomainError("wrapped_phase: modulation_floor_fraction must be >= 0");

    TextureModulation tm = texture_and_modulation(stack);  // validates the stack

    // Absolute modulation threshold from the stack's peak average intensity.
    double peak_average = 0.0;
    for (std::int64_t i = 0; i < tm.average.size(); ++i)
        if (tm.average.valid(i))
            peak_average = std::max(peak_average, tm.average.values[static_cast<std::size_t>(i)]);
    const double threshold = options.modulation_floor_fraction * peak_average;

    const std::size_t n = stack.frames.size();
    std::vector<double> sin_d(n), cos_d(n);
    for (std::size_t k = 0; k < n; ++k) {
        sin_d[k] = std::sin(stack.shifts[k]);
        cos_d[k] = std::cos(stack.shifts[k]);
    }

    WrappedPhaseMap out;
    out.phase = ScalarMap(stack.width(), stack.height(), 0.0, false);
    out.modulation = tm.modulation;
    out.average = tm.average;
    out.modulation_threshold = threshold;

    const ScalarMap& shared_mask = stack.frames.front();
    parallel_for(0, out.phase.size(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!shared_mask.valid(i)) continue;
            if (tm.modulation.values[idx] <= threshold) continue;

            double s = 0.0, c = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double v = stack.frames[k].values[idx];
                s += v * sin_d[k];
                c += v * cos_d[k];
            }
            if (std::abs(s) < options.numeric_floor && std::abs(c) < options.numeric_floor)
                continue;

            out.phase.values[idx] = wrap_pi(-std::atan2(s, c));
            out.phase.mask[idx] = 1;
        }
    });

    // phase.mask is the authoritative validity; modulation/average keep the
    // stack mask so thresholded pixels remain inspectable.
    return out;
}

}  // namespace fringeforge
