#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fringeforge/geometry.hpp"
#include "fringeforge/raster.hpp"

namespace fringeforge {

/// Plane in Hessian normal form: dot(normal, p) == offset, |normal| == 1.
/// The normal is oriented so that offset >= 0 (pointing away from the world
/// origin / camera), making signed error maps comparable across poses.
struct Plane {
    Vec3 normal{0, 0, 1};
    double offset = 0.0;

    double signed_distance(const Vec3& p) const { return dot(normal, p) - offset; }
};

struct Sphere {
    Vec3 center;
    double radius = 0.0;

    /// Outward-positive signed deviation from the surface.
    double signed_distance(const Vec3& p) const { return norm(p - center) - radius; }
};

struct Histogram {
    double lo = -1.0;
    double hi = 1.0;
    std::vector<std::int64_t> counts;  // out-of-range samples land in the edge bins
};

struct HistogramOptions {
    int bins = 101;
    double half_range_mm = 1.0;
};

struct ErrorStats {
    double rmse = 0.0;
    double mean = 0.0;
    double std_sample = 0.0;      // n-1 normalization (reported in tables)
    double std_population = 0.0;  // satisfies rmse^2 == mean^2 + std_population^2
    std::int64_t count = 0;
    Histogram histogram;
};

enum class ImageAxis { U, V };

/// Orthogonal-distance least-squares plane through >= 3 non-collinear
/// points (smallest-eigenvalue direction of the centered scatter matrix).
Plane fit_plane(std::span<const Vec3> points);

/// Least-squares sphere center with the radius held fixed (Gauss-Newton on
/// geometric distances, algebraic initialization, step tolerance 1e-9 mm,
/// at most 100 iterations).
Vec3 fit_sphere_center(std::span<const Vec3> points, double radius);

/// Free-radius geometric sphere fit.
Sphere fit_sphere_free(std::span<const Vec3> points);

ErrorStats error_stats(std::span<const double> errors, const HistogramOptions& options = {});

struct SurfaceErrorMap {
    ScalarMap error;  // signed, mm
    ErrorStats stats;
};

SurfaceErrorMap error_map(const ScalarMap& x, const ScalarMap& y, const ScalarMap& z,
                          const Plane& plane, const HistogramOptions& options = {});
SurfaceErrorMap error_map(const ScalarMap& x, const ScalarMap& y, const ScalarMap& z,
                          const Sphere& sphere, const HistogramOptions& options = {});

struct RegionalRmse {
    double central = 0.0;
    double outer = 0.0;
};

/// RMSE of a central band (central_fraction of the extent, centered) versus
/// the union of two symmetric edge bands (outer_fraction/2 each) along the
/// chosen image axis. Throws EmptyRegion when a band holds no valid pixels.
RegionalRmse regional_rmse(const ScalarMap& error, ImageAxis axis, double central_fraction,
                           double outer_fraction);

}  // namespace fringeforge
