#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fringeforge/geometry.hpp"
#include "fringeforge/raster.hpp"

namespace fringeforge {

/// Grayscale PFM ("Pf", scale -1.0 = little-endian float32, bottom-up rows).
/// Masked pixels are stored as NaN and restored as invalid on read.
void write_pfm(const std::filesystem::path& path, const ScalarMap& map);
ScalarMap read_pfm(const std::filesystem::path& path);

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples). Values are
/// scaled linearly from [lo, hi] onto [0, 65535] and clamped; masked pixels
/// are written as 0.
void write_pgm16(const std::filesystem::path& path, const ScalarMap& map, double lo, double hi);
ScalarMap read_pgm16(const std::filesystem::path& path, double lo, double hi);

/// Raw 16-bit PGM for small-integer label images (quality flags).
void write_pgm16_raw(const std::filesystem::path& path, const IndexMap& map);
IndexMap read_pgm16_raw(const std::filesystem::path& path);

struct CloudPoint {
    Vec3 position;
    std::uint8_t quality = 0;
};

/// ASCII PLY with float x, y, z and a uchar quality flag per vertex.
void write_ply(const std::filesystem::path& path, const std::vector<CloudPoint>& points);
std::vector<CloudPoint> read_ply(const std::filesystem::path& path);

/// Stack manifest: JSON document listing the frame files of one frequency
/// with the recorded shift schedule and provenance.
struct StackManifest {
    std::vector<std::string> frame_files;  // relative to the manifest directory
    std::vector<double> shifts;
    FrequencyTag frequency = FrequencyTag::High;
    double wavelength = 0.0;       // nominal units used by unwrapping
    double intensity_lo = 0.0;     // PGM scaling applied to the frames
    double intensity_hi = 1.0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

void save_manifest(const std::filesystem::path& path, const StackManifest& manifest);
StackManifest load_manifest(const std::filesystem::path& path);

/// Loads the frames referenced by a manifest into a FringeStack (masks are
/// intersected). Throws IoError naming the first missing frame file.
FringeStack load_stack(const std::filesystem::path& manifest_path);

/// Writes one CSV row per entry; fields are joined with commas as-is.
void write_csv(const std::filesystem::path& path,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64-bit content hash, hex-encoded; used for provenance records.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fringeforge
