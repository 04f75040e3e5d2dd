#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fringeforge/errors.hpp"
#include "fringeforge/projector.hpp"
#include "fringeforge/raster.hpp"
#include "test_util.hpp"

using namespace fringeforge;
using testutil::make_sinusoid_stack;
using testutil::make_uniform_stack;

namespace {

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
    for (const auto& p : problems)
        if (p.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("a 25-frame uniform-schedule stack validates cleanly") {
    auto stack = make_sinusoid_stack(
        25, 8, 6, [](int, int) { return 0.5; }, [](int, int) { return 0.3; },
        [](int x, int y) { return 0.1 * x - 0.2 * y; });
    CHECK(validate_stack(stack).empty());
}

TEST_CASE("stack contract violations are reported") {
    SUBCASE("fewer than 3 frames") {
        auto stack = make_sinusoid_stack(
            3, 4, 4, [](int, int) { return 0.5; }, [](int, int) { return 0.3; },
            [](int, int) { return 0.0; });
        stack.frames.resize(2);
        stack.shifts.resize(2);
        CHECK(mentions(validate_stack(stack), "fewer than 3"));
    }
    SUBCASE("shift count mismatch") {
        auto stack = make_uniform_stack(4, 4, 4, 0.5);
        stack.shifts.pop_back();
        CHECK(mentions(validate_stack(stack), "shift count"));
    }
    SUBCASE("shift outside [0, 2pi)") {
        auto stack = make_uniform_stack(4, 4, 4, 0.5);
        stack.shifts.back() = kTwoPi;
        CHECK(mentions(validate_stack(stack), "outside"));
        stack.shifts.back() = -0.1;
        CHECK(!validate_stack(stack).empty());
    }
    SUBCASE("shifts must increase strictly") {
        auto stack = make_uniform_stack(4, 4, 4, 0.5);
        stack.shifts[2] = stack.shifts[1];
        CHECK(mentions(validate_stack(stack), "increasing"));
    }
    SUBCASE("mixed frame dimensions") {
        auto stack = make_uniform_stack(4, 4, 4, 0.5);
        stack.frames[1] = ScalarMap(5, 4, 0.5);
        CHECK(mentions(validate_stack(stack), "dimensions"));
    }
    SUBCASE("masks must be identical across frames") {
        auto stack = make_uniform_stack(4, 4, 4, 0.5);
        stack.frames[2].mask[5] = 0;
        CHECK(mentions(validate_stack(stack), "mask"));
    }
    SUBCASE("non-finite intensity at a valid pixel") {
        auto stack = make_uniform_stack(4, 4, 4, 0.5);
        stack.frames[1].values[3] = std::numeric_limits<double>::quiet_NaN();
        CHECK(mentions(validate_stack(stack), "non-finite"));
    }
    SUBCASE("validation does not mutate the stack") {
        auto stack = make_uniform_stack(4, 4, 4, 0.5);
        stack.shifts[2] = stack.shifts[1];
        auto first = validate_stack(stack);
        auto second = validate_stack(stack);
        CHECK(first == second);
    }
}

TEST_CASE("mask intersection marks a pixel invalid everywhere") {
    auto stack = make_uniform_stack(3, 4, 3, 0.5);
    stack.frames[0].mask[1] = 0;
    stack.frames[2].mask[7] = 0;
    intersect_stack_masks(stack);
    for (const auto& f : stack.frames) {
        CHECK(f.mask[1] == 0);
        CHECK(f.mask[7] == 0);
        CHECK(f.mask[0] == 1);
    }
    CHECK(validate_stack(stack).empty());
}

TEST_CASE("average and modulation of a clean sinusoidal stack") {
    // I_k = 0.5 + 0.3*cos(phi - d_k), N = 25 -> average 0.5, modulation 0.3.
    auto stack = make_sinusoid_stack(
        25, 9, 7, [](int, int) { return 0.5; }, [](int, int) { return 0.3; },
        [](int x, int y) { return 0.37 * x - 0.51 * y + 0.2; });
    auto tm = texture_and_modulation(stack);
    for (std::int64_t i = 0; i < tm.average.size(); ++i) {
        CHECK(tm.average.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(0.5).epsilon(1e-12));
        CHECK(tm.modulation.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(0.3).epsilon(1e-12));
        CHECK(tm.saturated[static_cast<std::size_t>(i)] == 0);
    }
}

TEST_CASE("constant frames have zero modulation") {
    auto tm = texture_and_modulation(make_uniform_stack(25, 5, 5, 0.7));
    for (std::int64_t i = 0; i < tm.average.size(); ++i) {
        CHECK(tm.average.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(0.7).epsilon(1e-12));
        CHECK(std::abs(tm.modulation.values[static_cast<std::size_t>(i)]) < 1e-12);
    }
}

TEST_CASE("exact sinusoid recovery for any step count and parameters") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> amp(0.05, 0.45);
    std::uniform_real_distribution<double> off(0.45, 0.55);
    std::uniform_real_distribution<double> ph(-10.0, 10.0);
    for (int steps : {3, 4, 7, 25}) {
        const double a = amp(gen);
        const double b = off(gen);
        const double p0 = ph(gen);
        auto stack = make_sinusoid_stack(
            steps, 6, 5, [&](int, int) { return b; }, [&](int, int) { return a; },
            [&](int x, int y) { return p0 + 0.3 * x + 0.17 * y; });
        auto tm = texture_and_modulation(stack);
        for (std::int64_t i = 0; i < tm.average.size(); ++i) {
            CHECK(tm.average.values[static_cast<std::size_t>(i)] ==
                  doctest::Approx(b).epsilon(1e-10));
            CHECK(tm.modulation.values[static_cast<std::size_t>(i)] ==
                  doctest::Approx(a).epsilon(1e-10));
        }
    }
}

TEST_CASE("modulation agrees with an extended-precision reference on slot-profile frames") {
    // A rendered slot-transmission stack is not a pure sinusoid; check the
    // double-precision ascending-order sums against long-double sums run in
    // the opposite order.
    CylindricalProjector projector;
    projector.axis_origin = {-150, 0, 0};
    CameraModel camera;
    camera.width = 24;
    camera.height = 18;
    camera.fx = camera.fy = 40.0;
    camera.cx = 11.5;
    camera.cy = 8.5;
    SceneSurface scene = SceneSurface::plane({0, 0, 600}, {0, 0, 1});
    RenderConfig cfg;
    cfg.fidelity = RenderConfig::Fidelity::SlotTransmission;
    cfg.blur_sigma_deg = 0.05;
    auto render = render_fringe_stack(projector, camera, scene, FrequencyTag::High, cfg);

    auto tm = texture_and_modulation(render.stack);
    const std::size_t n = render.stack.frames.size();
    for (std::int64_t i = 0; i < tm.average.size(); ++i) {
        if (!tm.average.valid(i)) continue;
        long double sum = 0.0L, s = 0.0L, c = 0.0L;
        for (std::size_t k = n; k-- > 0;) {
            const long double v = render.stack.frames[k].values[static_cast<std::size_t>(i)];
            const long double d = render.stack.shifts[k];
            sum += v;
            s += v * std::sin(d);
            c += v * std::cos(d);
        }
        const double avg_ref = static_cast<double>(sum / n);
        const double mod_ref = static_cast<double>(2.0L / n * std::sqrt(s * s + c * c));
        CHECK(tm.average.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(avg_ref).epsilon(1e-12));
        CHECK(tm.modulation.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(mod_ref).epsilon(1e-12));
    }
}

TEST_CASE("masked pixels never contribute") {
    auto clean = make_sinusoid_stack(
        5, 6, 4, [](int, int) { return 0.5; }, [](int, int) { return 0.25; },
        [](int x, int y) { return 0.9 * x - 0.4 * y; });
    auto poisoned = clean;
    for (auto& frame : poisoned.frames) {
        frame.mask[3] = 0;
        frame.mask[17] = 0;
        frame.values[3] = std::numeric_limits<double>::quiet_NaN();
        frame.values[17] = std::numeric_limits<double>::infinity();
    }
    for (auto& frame : clean.frames) {
        frame.mask[3] = 0;
        frame.mask[17] = 0;
    }

    auto tm_clean = texture_and_modulation(clean);
    auto tm_poisoned = texture_and_modulation(poisoned);
    CHECK(tm_poisoned.average.mask[3] == 0);
    CHECK(tm_poisoned.average.mask[17] == 0);
    for (std::int64_t i = 0; i < tm_clean.average.size(); ++i) {
        if (!tm_clean.average.valid(i)) continue;
        // Bitwise identical: the masked pixels are skipped, not averaged in.
        CHECK(tm_poisoned.average.values[static_cast<std::size_t>(i)] ==
              tm_clean.average.values[static_cast<std::size_t>(i)]);
        CHECK(tm_poisoned.modulation.values[static_cast<std::size_t>(i)] ==
              tm_clean.modulation.values[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("saturation flag marks modulation exceeding the average") {
    // Physically impossible (negative troughs) but numerically well defined.
    auto stack = make_sinusoid_stack(
        25, 3, 3, [](int, int) { return 0.2; }, [](int, int) { return 0.5; },
        [](int, int) { return 0.7; });
    auto tm = texture_and_modulation(stack);
    for (std::int64_t i = 0; i < tm.average.size(); ++i)
        CHECK(tm.saturated[static_cast<std::size_t>(i)] == 1);
}

TEST_CASE("texture_and_modulation rejects broken stacks") {
    auto stack = make_uniform_stack(4, 4, 4, 0.5);
    stack.shifts[1] = stack.shifts[0];
    CHECK_THROWS_AS(texture_and_modulation(stack), InvalidStack);
}

TEST_CASE("reductions are identical for every worker count") {
    auto stack = make_sinusoid_stack(
        25, 64, 48, [](int, int) { return 0.5; }, [](int x, int) { return 0.2 + 0.001 * x; },
        [](int x, int y) { return 0.11 * x + 0.07 * y; });
    std::vector<double> single_avg, single_mod;
    {
        testutil::EnvGuard guard("FRINGEFORGE_THREADS", "1");
        auto tm = texture_and_modulation(stack);
        single_avg = tm.average.values;
        single_mod = tm.modulation.values;
    }
    {
        testutil::EnvGuard guard("FRINGEFORGE_THREADS", "7");
        auto tm = texture_and_modulation(stack);
        CHECK(tm.average.values == single_avg);
        CHECK(tm.modulation.values == single_mod);
    }
}

TEST_CASE("frequency tags have stable labels") {
    CHECK(std::string(to_string(FrequencyTag::High)) == "high");
    CHECK(std::string(to_string(FrequencyTag::Low)) == "low");
}
