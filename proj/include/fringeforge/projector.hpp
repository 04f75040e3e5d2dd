#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fringeforge/geometry.hpp"
#include "fringeforge/raster.hpp"

namespace fringeforge {

/// Mechanical cylindrical fringe projector: a point light source on the axis
/// of a rotating slotted cylinder. Two slot bands with angular intervals
/// theta_h < theta_l produce the high- and low-frequency patterns; rotating
/// the cylinder by interval/N steps phase-shifts the projected fringes.
///
/// Pattern origin convention: both slot bands share a closed-slot (dark
/// fringe) center at the reference azimuth rotation_offset_deg, so both
/// retrieved absolute phases pass -pi together at the start of the designed
/// unwrapping range.
struct CylindricalProjector {
    double theta_h_deg = 5.0;
    double theta_l_deg = 5.625;
    double cylinder_radius_mm = 40.0;  // hardware scale; the phase model uses the axis only

    Vec3 axis_origin{0, 0, 0};   // light source position (on the axis), world mm
    Vec3 axis_dir{0, 1, 0};      // cylinder rotation axis
    Vec3 azimuth_ref{0, 0, 1};   // azimuth zero direction (projected orthogonal to the axis)

    // Pattern origin azimuth alpha_0. Retrieved phase descends as the azimuth
    // grows past alpha_0, so the unambiguous band of the two-frequency unwrap
    // covers azimuths in (alpha_0 - 45 deg, alpha_0]. The default centres that
    // band on the camera field of view of the default geometry (projector at
    // x = -150 mm, camera at the origin, working depths 540-620 mm).
    double rotation_offset_deg = 35.0;
    double stage_resolution_deg = 0.004;

    double interval_deg(FrequencyTag tag) const {
        return tag == FrequencyTag::High ? theta_h_deg : theta_l_deg;
    }

    /// Throws DomainError unless 0 < theta_h < theta_l, both intervals divide
    /// 360 evenly, the axis frame is well formed, and the stage resolution is
    /// positive.
    void validate() const;

    /// Azimuth (degrees, in (-180, 180]) of a world point about the axis,
    /// measured from azimuth_ref toward axis_dir x azimuth_ref.
    double azimuth_deg(const Vec3& world_point) const;
};

enum class WavelengthModel { Exact, SmallAngle };

/// Fringe wavelength projected onto a surface at distance d:
///   exact:       lambda = d * (tan(theta/4) + tan(3*theta/4))
///   small-angle: lambda = d * theta   (theta in radians)
/// Requires d > 0 and 0 < theta < 90 degrees.
double fringe_wavelength(double distance_mm, double theta_deg, WavelengthModel model);

/// Pinhole camera, world-to-camera extrinsics x_cam = R * x_world + t.
struct CameraModel {
    int width = 0;
    int height = 0;
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    Mat3 rotation;
    Vec3 translation;

    /// Throws DomainError unless the rotation is orthonormal with det +1
    /// (tolerance 1e-9), focal lengths are positive and the principal point
    /// lies inside the image rectangle.
    void validate() const;

    Vec3 camera_center() const;  // world coordinates
    /// World-frame direction of the ray through pixel (u, v), scaled so the
    /// camera-frame z component equals 1 (ray parameter equals depth).
    Vec3 ray_direction(double u, double v) const;
    Vec3 backproject(double u, double v, double depth) const;
};

struct PixelProjection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;  // camera-frame z, mm
};

/// Projects a world point; throws BehindCamera when the point lies on or
/// behind the principal plane.
PixelProjection project_point(const CameraModel& camera, const Vec3& world_point);

/// Regular-grid heightfield z = H(x, y), bilinearly interpolated.
struct HeightGrid {
    double x0 = 0.0;
    double y0 = 0.0;
    double spacing = 1.0;
    int cols = 0;
    int rows = 0;
    std::vector<double> z;  // row-major rows x cols
};

struct SceneSurface {
    enum class Kind { Plane, Sphere, Heightmap };
    Kind kind = Kind::Plane;

    Vec3 plane_point{0, 0, 600};
    Vec3 plane_normal{0, 0, 1};

    Vec3 sphere_center{0, 0, 600};
    double sphere_radius = 50.0;

    HeightGrid heightmap;

    double reflectance = 0.9;  // in (0, 1]
    double ambient = 0.05;     // >= 0, ambient + reflectance <= 1

    static SceneSurface plane(const Vec3& point, const Vec3& normal);
    static SceneSurface sphere(const Vec3& center, double radius);
    static SceneSurface height_grid(HeightGrid grid);

    void validate() const;
};

/// Nearest forward ray-surface intersection; returns false when the ray
/// misses (or is degenerate, e.g. parallel to a plane).
bool intersect_scene(const SceneSurface& scene, const Vec3& origin, const Vec3& dir, Vec3* hit);

struct RenderConfig {
    enum class Fidelity { IdealSinusoid, SlotTransmission };

    int steps = 25;
    Fidelity fidelity = Fidelity::IdealSinusoid;
    double blur_sigma_deg = 0.0;   // Gaussian blur of the slot profile, azimuth degrees
    double noise_sigma = 0.0;      // additive Gaussian intensity noise, clipped to [0, inf)
    bool quantize_stage = false;   // snap each rotation to the stage resolution
    std::uint64_t seed = 0;

    void validate() const;
};

/// Geometric pattern phase 2*pi*(beta - alpha_0)/theta at the ray-scene
/// intersection of every pixel; pixels whose rays miss the scene are masked.
ScalarMap ground_truth_phase(const CylindricalProjector& projector, const CameraModel& camera,
                             const SceneSurface& scene, FrequencyTag tag);

struct RenderOutput {
    FringeStack stack;
    /// Unwrapped absolute phase consistent with the retrieval convention
    /// (what the arctangent formula recovers, continued past the wrap):
    /// -(geometric phase) - pi.
    ScalarMap true_phase;
    ScalarMap depth;  // camera-frame z of the intersection, mm
};

/// Renders one frequency's phase-shifted stack plus its ground-truth bundle.
RenderOutput render_fringe_stack(const CylindricalProjector& projector, const CameraModel& camera,
                                 const SceneSurface& scene, FrequencyTag tag,
                                 const RenderConfig& config);

}  // namespace fringeforge
