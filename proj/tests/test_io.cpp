#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fringeforge/errors.hpp"
#include "fringeforge/io.hpp"
#include "test_util.hpp"

using namespace fringeforge;
namespace fs = std::filesystem;

TEST_CASE("float map files round trip, including the validity mask") {
    testutil::ScratchDir dir("io_pfm");
    ScalarMap map(17, 9);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> val(-30.0, 30.0);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        map.values[i] = val(gen);
        if (i % 13 == 0) map.mask[i] = 0;
    }

    const auto path = dir / "map.pfm";
    write_pfm(path, map);
    auto loaded = read_pfm(path);

    REQUIRE(loaded.width == 17);
    REQUIRE(loaded.height == 9);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        CHECK(loaded.mask[i] == map.mask[i]);
        if (!map.mask[i]) continue;
        // Stored as float32; the reload must match the cast exactly.
        CHECK(loaded.values[i] == static_cast<double>(static_cast<float>(map.values[i])));
    }
}

TEST_CASE("float map reader rejects malformed input") {
    testutil::ScratchDir dir("io_pfm_bad");
    write_text_file(dir / "bad.pfm", "P5\n3 3\n255\n");
    CHECK_THROWS_AS(read_pfm(dir / "bad.pfm"), IoError);
    CHECK_THROWS_AS(read_pfm(dir / "missing.pfm"), IoError);

    // Truncated pixel data.
    ScalarMap map(8, 8, 1.5);
    write_pfm(dir / "trunc.pfm", map);
    fs::resize_file(dir / "trunc.pfm", fs::file_size(dir / "trunc.pfm") - 32);
    CHECK_THROWS_AS(read_pfm(dir / "trunc.pfm"), IoError);
}

TEST_CASE("16-bit frame files quantize within half a step") {
    testutil::ScratchDir dir("io_pgm");
    ScalarMap map(21, 13);
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> val(0.0, 1.0);
    for (auto& v : map.values) v = val(gen);
    map.mask[4] = 0;

    const auto path = dir / "frame.pgm";
    write_pgm16(path, map, 0.0, 1.0);
    auto loaded = read_pgm16(path, 0.0, 1.0);

    REQUIRE(loaded.width == map.width);
    REQUIRE(loaded.height == map.height);
    const double step = 1.0 / 65535.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        // Frame files do not carry a mask; every pixel reads back valid.
        CHECK(loaded.mask[i] == 1);
        if (!map.mask[i]) {
            CHECK(loaded.values[i] == 0.0);  // masked pixels are stored dark
            continue;
        }
        CHECK(std::abs(loaded.values[i] - map.values[i]) <= 0.5 * step + 1e-12);
    }

    SUBCASE("grid-aligned values survive exactly") {
        ScalarMap exact(9, 3);
        for (std::size_t i = 0; i < exact.values.size(); ++i)
            exact.values[i] = static_cast<double>(i * 2000) / 65535.0;
        write_pgm16(dir / "exact.pgm", exact, 0.0, 1.0);
        auto back = read_pgm16(dir / "exact.pgm", 0.0, 1.0);
        for (std::size_t i = 0; i < exact.values.size(); ++i)
            CHECK(back.values[i] == doctest::Approx(exact.values[i]).epsilon(1e-14));
    }
    SUBCASE("values are clamped to the declared range") {
        ScalarMap wild(2, 1);
        wild.values = {-0.5, 1.8};
        write_pgm16(dir / "wild.pgm", wild, 0.0, 1.0);
        auto back = read_pgm16(dir / "wild.pgm", 0.0, 1.0);
        CHECK(back.values[0] == 0.0);
        CHECK(back.values[1] == 1.0);
    }
    SUBCASE("reader rejects other formats") {
        write_text_file(dir / "bad.pgm", "P2\n2 2\n255\n0 0 0 0\n");
        CHECK_THROWS_AS(read_pgm16(dir / "bad.pgm", 0.0, 1.0), IoError);
    }
}

TEST_CASE("label maps round trip through raw 16-bit files") {
    testutil::ScratchDir dir("io_labels");
    IndexMap labels(6, 4);
    for (std::size_t i = 0; i < labels.values.size(); ++i)
        labels.values[i] = static_cast<std::int32_t>(i % 7);
    labels.values[5] = 65535;  // top of the representable range

    write_pgm16_raw(dir / "labels.pgm", labels);
    auto back = read_pgm16_raw(dir / "labels.pgm");
    CHECK(back.values == labels.values);

    labels.values[0] = -1;
    CHECK_THROWS_AS(write_pgm16_raw(dir / "neg.pgm", labels), IoError);
    labels.values[0] = 70000;
    CHECK_THROWS_AS(write_pgm16_raw(dir / "big.pgm", labels), IoError);
}

TEST_CASE("point clouds round trip") {
    testutil::ScratchDir dir("io_ply");
    std::vector<CloudPoint> cloud;
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> c(-100.0, 700.0);
    for (int i = 0; i < 257; ++i) {
        CloudPoint p;
        p.position = {c(gen), c(gen), c(gen)};
        p.quality = static_cast<std::uint8_t>(i % 5);
        cloud.push_back(p);
    }

    write_ply(dir / "cloud.ply", cloud);
    auto back = read_ply(dir / "cloud.ply");
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(back[i].position.x == static_cast<double>(static_cast<float>(cloud[i].position.x)));
        CHECK(back[i].position.y == static_cast<double>(static_cast<float>(cloud[i].position.y)));
        CHECK(back[i].position.z == static_cast<double>(static_cast<float>(cloud[i].position.z)));
        CHECK(back[i].quality == cloud[i].quality);
    }

    write_text_file(dir / "bad.ply", "obj\nnot a point cloud\n");
    CHECK_THROWS_AS(read_ply(dir / "bad.ply"), IoError);

    // Fewer vertices than the header promises.
    write_text_file(dir / "short.ply",
                    "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float "
                    "y\nproperty float z\nproperty uchar quality\nend_header\n1 2 3 0\n");
    CHECK_THROWS_AS(read_ply(dir / "short.ply"), IoError);
}

TEST_CASE("stack manifests round trip") {
    testutil::ScratchDir dir("io_manifest");
    StackManifest m;
    m.frame_files = {"frames/f0.pgm", "frames/f1.pgm", "frames/f2.pgm"};
    m.shifts = {0.0, 2.0943951023931953, 4.1887902047863905};
    m.frequency = FrequencyTag::Low;
    m.wavelength = 5.625;
    m.intensity_lo = 0.0;
    m.intensity_hi = 1.0;
    m.seed = 424242;
    m.config_hash = "0123456789abcdef";

    save_manifest(dir / "manifest.json", m);
    auto back = load_manifest(dir / "manifest.json");
    CHECK(back.frame_files == m.frame_files);
    CHECK(back.shifts == m.shifts);
    CHECK(back.frequency == FrequencyTag::Low);
    CHECK(back.wavelength == doctest::Approx(5.625).epsilon(1e-15));
    CHECK(back.seed == m.seed);
    CHECK(back.config_hash == m.config_hash);

    write_text_file(dir / "bad.json", "{\"format\": \"something-else\"}");
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), IoError);
}

TEST_CASE("stacks load through their manifest") {
    testutil::ScratchDir dir("io_stack");
    fs::create_directories(dir / "frames");

    StackManifest m;
    m.frequency = FrequencyTag::High;
    m.wavelength = 5.0;
    const int n = 4;
    for (int k = 0; k < n; ++k) {
        ScalarMap frame(5, 4, 0.25 * (k + 1));
        const std::string rel = "frames/frame_" + std::to_string(k) + ".pgm";
        write_pgm16(dir / rel, frame, 0.0, 1.0);
        m.frame_files.push_back(rel);
        m.shifts.push_back(kTwoPi * k / n);
    }
    save_manifest(dir / "manifest.json", m);

    auto stack = load_stack(dir / "manifest.json");
    REQUIRE(stack.frames.size() == 4);
    CHECK(stack.frequency == FrequencyTag::High);
    CHECK(stack.shifts == m.shifts);
    CHECK(stack.frames[1].at(2, 2) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(validate_stack(stack).empty());

    SUBCASE("a missing frame is reported by name") {
        fs::remove(dir / "frames/frame_2.pgm");
        try {
            load_stack(dir / "manifest.json");
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("frame_2.pgm") != std::string::npos);
        }
    }
    SUBCASE("frame and shift counts must agree") {
        m.shifts.pop_back();
        save_manifest(dir / "manifest.json", m);
        CHECK_THROWS_AS(load_stack(dir / "manifest.json"), IoError);
    }
}

TEST_CASE("CSV rows are joined verbatim") {
    testutil::ScratchDir dir("io_csv");
    write_csv(dir / "t.csv", {{"pose", "value_mm"}, {"1", "0.049"}, {"2", "0.061"}});
    CHECK(read_text_file(dir / "t.csv") == "pose,value_mm\n1,0.049\n2,0.061\n");
}

TEST_CASE("content hashing is stable") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
    CHECK(fnv1a_hex("foobar") == fnv1a_hex("foobar"));
    CHECK(fnv1a_hex("foobaz") != fnv1a_hex("foobar"));
}

TEST_CASE("text files round trip") {
    testutil::ScratchDir dir("io_text");
    const std::string body = "line one\nline two\n";
    write_text_file(dir / "t.txt", body);
    CHECK(read_text_file(dir / "t.txt") == body);
    CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), IoError);
}
