#include "fringeforge/raster.hpp"

#include <cmath>

#include "fringeforge/errors.hpp"
#include "fringeforge/geometry.hpp"
#include "fringeforge/parallel.hpp"

namespace fringeforge {

const char* to_string(FrequencyTag tag) {
    return tag == FrequencyTag::High ? "high" : "low";
}

ScalarMap::ScalarMap(int w, int h, double fill, bool valid_pixels) {
    if (w < 0 || h < 0) throw DomainError("ScalarMap: negative dimensions");
    width = w;
    height = h;
    values.assign(static_cast<std::size_t>(size()), fill);
    mask.assign(static_cast<std::size_t>(size()), valid_pixels ? 1 : 0);
}

std::int64_t ScalarMap::valid_count() const {
    std::int64_t n = 0;
    for (const auto m : mask) n += (m != 0);
    return n;
}

IndexMap::IndexMap(int w, int h, std::int32_t fill, bool valid_pixels) {
    if (w < 0 || h < 0) throw DomainError("IndexMap: negative dimensions");
    width = w;
    height = h;
    values.assign(static_cast<std::size_t>(size()), fill);
    mask.assign(static_cast<std::size_t>(size()), valid_pixels ? 1 : 0);
}

std::vector<std::string> validate_stack(const FringeStack& stack) {
    std::vector<std::string> problems;
    const std::size_t n = stack.frames.size();

    if (n < 3) problems.push_back("stack has fewer than 3 frames");
    if (stack.shifts.size() != n)
        problems.push_back("shift count does not match frame count");

    for (std::size_t k = 0; k < stack.shifts.size(); ++k) {
        const double s = stack.shifts[k];
        if (!(s >= 0.0 && s < kTwoPi)) {
            problems.push_back("shift " + std::to_string(k) + " outside [0, 2pi)");
            break;
        }
        if (k > 0 && !(s > stack.shifts[k - 1])) {
            problems.push_back("shifts not strictly increasing");
            break;
        }
    }

    if (n == 0) return problems;

    const ScalarMap& first = stack.frames.front();
    for (std::size_t k = 0; k < n; ++k) {
        const ScalarMap& f = stack.frames[k];
        if (!f.same_shape(first)) {
            problems.push_back("frame " + std::to_string(k) + " has mismatched dimensions");
            return problems;  // nothing below is meaningful
        }
        if (f.values.size() != static_cast<std::size_t>(f.size()) ||
            f.mask.size() != static_cast<std::size_t>(f.size())) {
            problems.push_back("frame " + std::to_string(k) + " has inconsistent buffer sizes");
            return problems;
        }
    }

    for (std::size_t k = 1; k < n; ++k) {
        if (stack.frames[k].mask != first.mask) {
            problems.push_back("frame " + std::to_string(k) + " mask differs from frame 0");
            break;
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        const ScalarMap& f = stack.frames[k];
        for (std::int64_t i = 0; i < f.size(); ++i) {
            if (f.valid(i) && !std::isfinite(f.values[static_cast<std::size_t>(i)])) {
                problems.push_back("frame " + std::to_string(k) +
                                   " has non-finite intensity at a valid pixel");
                break;
            }
        }
    }

    return problems;
}

void intersect_stack_masks(FringeStack& stack) {
    if (stack.frames.empty()) return;
    std::vector<std::uint8_t> shared = stack.frames.front().mask;
    for (std::size_t k = 1; k < stack.frames.size(); ++k) {
        const auto& m = stack.frames[k].mask;
        for (std::size_t i = 0; i < shared.size() && i < m.size(); ++i)
            shared[i] = static_cast<std::uint8_t>(shared[i] && m[i]);
    }
    for (auto& frame : stack.frames) frame.mask = shared;
}

TextureModulation texture_and_modulation(const FringeStack& stack) {
    const auto problems = validate_stack(stack);
    if (!problems.empty()) throw InvalidStack("texture_and_modulation: " + problems.front());

    const int w = stack.width();
    const int h = stack.height();
    const std::size_t n = stack.frames.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> sin_d(n), cos_d(n);
    for (std::size_t k = 0; k < n; ++k) {
        sin_d[k] = std::sin(stack.shifts[k]);
        cos_d[k] = std::cos(stack.shifts[k]);
    }

    TextureModulation out;
    out.average = ScalarMap(w, h, 0.0, false);
    out.modulation = ScalarMap(w, h, 0.0, false);
    out.average.mask = stack.frames.front().mask;
    out.modulation.mask = stack.frames.front().mask;
    out.saturated.assign(static_cast<std::size_t>(out.average.size()), 0);

    const std::int64_t total = out.average.size();
    parallel_for(0, total, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            if (!out.average.valid(i)) continue;
            double sum = 0.0, s = 0.0, c = 0.0;
            for (std::size_t k = 0; k < n; ++k) {  // fixed ascending-k order
                const double v = stack.frames[k].values[static_cast<std::size_t>(i)];
                sum += v;
                s += v * sin_d[k];
                c += v * cos_d[k];
            }
            const double avg = sum * inv_n;
            const double mod = 2.0 * inv_n * std::sqrt(s * s + c * c);
            out.average.values[static_cast<std::size_t>(i)] = avg;
            out.modulation.values[static_cast<std::size_t>(i)] = mod;
            if (mod > avg) out.saturated[static_cast<std::size_t>(i)] = 1;
        }
    });

    return out;
}

}  // namespace fringeforge
