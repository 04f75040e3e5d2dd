#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fringeforge/raster.hpp"

namespace fringeforge {

/// One calibration pose: an unwrapped absolute phase map plus the reference
/// world coordinates of every pixel at that pose.
struct CalibPose {
    std::string id;
    ScalarMap phase;
    ScalarMap x, y, z;  // reference coordinates, mm
};

struct CalibOptions {
    double working_range_min_mm = 540.0;
    double working_range_max_mm = 620.0;
    int min_poses = 4;  // a cubic needs four samples; more poses average noise
};

/// Per-pixel cubic mappings X(phi), Y(phi), Z(phi). Coefficients are stored
/// in raw (uncentered) phase powers; fitting internally centers and scales
/// the per-pixel phase to [-1, 1] for conditioning and maps the result back.
struct PolyCalibration {
    int width = 0;
    int height = 0;
    std::array<std::vector<double>, 4> a;  // X coefficients a0..a3
    std::array<std::vector<double>, 4> b;  // Y coefficients b0..b3
    std::array<std::vector<double>, 4> c;  // Z coefficients c0..c3
    std::vector<std::uint8_t> valid;
    std::vector<double> phase_min;  // per-pixel fitted phase domain
    std::vector<double> phase_max;
    double working_range_min_mm = 0.0;
    double working_range_max_mm = 0.0;

    std::int64_t size() const { return static_cast<std::int64_t>(width) * height; }
    bool pixel_valid(std::int64_t i) const { return valid[static_cast<std::size_t>(i)] != 0; }
};

struct CalibReport {
    std::vector<std::string> pose_ids;
    std::vector<double> rmse_x;  // per-pose residual RMSE, mm
    std::vector<double> rmse_y;
    std::vector<double> rmse_z;
    std::vector<std::int64_t> pose_pixel_count;
    double sigma_cal_mm = 0.0;  // pooled depth residual (Z only)
    double s_eff_mm_per_rad = 0.0;
    std::int64_t valid_pixels = 0;
    int poses = 0;
};

struct CalibResult {
    PolyCalibration calibration;
    CalibReport report;
};

/// Fits the per-pixel cubics over all poses. Requires at least
/// options.min_poses poses (and per pixel at least four distinct phases,
/// otherwise the pixel is masked invalid). Reference Z values must lie
/// within the declared working range.
CalibResult fit_calibration(std::span<const CalibPose> poses, const CalibOptions& options = {});

/// Pooled RMSE over one or more residual maps: sqrt(sum r^2 / count), valid
/// pixels only, fixed map-then-pixel order. Throws EmptyInput when nothing
/// is valid.
double pooled_rmse(std::span<const ScalarMap> residual_maps);

struct EvaluatedPoints {
    ScalarMap x, y, z;
    // Set where the query phase fell outside the pixel's fitted domain
    // (still evaluated; flagged for the consumer).
    std::vector<std::uint8_t> out_of_domain;
};

/// Evaluates the calibration at an absolute phase map. Throws
/// DimensionMismatch when the calibration and map sizes differ.
EvaluatedPoints evaluate_points(const PolyCalibration& calib, const ScalarMap& phase);

/// Mean |dZ/dphi| = |c1 + 2 c2 phi + 3 c3 phi^2| over valid pixels of all
/// pose phase maps: the effective depth sensitivity in mm/rad.
double effective_sensitivity(const PolyCalibration& calib,
                             std::span<const ScalarMap> pose_phases);

/// Calibration container: UTF-8 JSON header terminated by newline + NUL,
/// followed by raw little-endian arrays (12 float64 coefficient planes,
/// a uint8 validity plane, 2 float64 phase-domain planes).
void save_calibration(const std::string& path, const PolyCalibration& calib);
PolyCalibration load_calibration(const std::string& path);

}  // namespace fringeforge
