#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fringeforge {

enum class FrequencyTag { High, Low };

const char* to_string(FrequencyTag tag);

/// Dense row-major double image with a per-pixel validity mask. All
/// per-pixel reductions in the library run in ascending index order so
/// results are reproducible bit for bit.
struct ScalarMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;        // size width*height, row-major
    std::vector<std::uint8_t> mask;    // nonzero = valid

    ScalarMap() = default;
    ScalarMap(int w, int h, double fill = 0.0, bool valid_pixels = true);

    std::int64_t size() const { return static_cast<std::int64_t>(width) * height; }

    std::int64_t index(int x, int y) const { return static_cast<std::int64_t>(y) * width + x; }

    double at(int x, int y) const { return values[static_cast<std::size_t>(index(x, y))]; }
    double& at(int x, int y) { return values[static_cast<std::size_t>(index(x, y))]; }

    bool valid(std::int64_t i) const { return mask[static_cast<std::size_t>(i)] != 0; }
    bool valid(int x, int y) const { return valid(index(x, y)); }

    bool same_shape(const ScalarMap& o) const { return width == o.width && height == o.height; }

    std::int64_t valid_count() const;
};

/// Integer-valued companion of ScalarMap (fringe orders and similar labels).
struct IndexMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> values;
    std::vector<std::uint8_t> mask;

    IndexMap() = default;
    IndexMap(int w, int h, std::int32_t fill = 0, bool valid_pixels = true);

    std::int64_t size() const { return static_cast<std::int64_t>(width) * height; }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
    bool valid(std::int64_t i) const { return mask[static_cast<std::size_t>(i)] != 0; }
};

/// A phase-shifted image sequence of one projected frequency. Frames carry
/// their recorded phase shifts (radians); all frames are expected to share
/// dimensions and validity mask.
struct FringeStack {
    std::vector<ScalarMap> frames;
    std::vector<double> shifts;
    FrequencyTag frequency = FrequencyTag::High;
    std::optional<double> wavelength;  // nominal fringe wavelength, provenance only

    int width() const { return frames.empty() ? 0 : frames.front().width; }
    int height() const { return frames.empty() ? 0 : frames.front().height; }
};

/// Checks the stack contract and returns one description per violation:
/// >= 3 frames, shift count matching frame count, shifts strictly increasing
/// within [0, 2pi), identical frame dimensions, identical masks, and finite
/// intensities at valid pixels. Empty result means the stack is usable.
std::vector<std::string> validate_stack(const FringeStack& stack);

/// Replaces every frame mask with the intersection of all frame masks, so a
/// pixel invalid in any frame becomes invalid in the whole stack.
void intersect_stack_masks(FringeStack& stack);

struct TextureModulation {
    ScalarMap average;
    ScalarMap modulation;
    // Set where modulation exceeds average at a valid pixel, which cannot
    // happen for physically consistent (unclipped) intensities.
    std::vector<std::uint8_t> saturated;
};

/// Average intensity (1/N)*sum(I_k) and modulation (2/N)*sqrt((sum I_k sin d_k)^2
/// + (sum I_k cos d_k)^2) per pixel. Throws InvalidStack when validate_stack
/// reports violations.
TextureModulation texture_and_modulation(const FringeStack& stack);

}  // namespace fringeforge
