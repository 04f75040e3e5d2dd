#include "fringeforge/projector.hpp"

#include <algorithm>
#include <cmath>

#include "fringeforge/errors.hpp"
#include "fringeforge/parallel.hpp"
#include "fringeforge/phase.hpp"
#include "rng.hpp"

namespace fringeforge {

namespace {

constexpr double kRayEps = 1e-9;

double wrap_deg_180(double deg) {
    double r = std::remainder(deg, 360.0);
    if (r <= -180.0) r = 180.0;
    return r;
}

/// 50% duty slot transmittance with the closed-slot band centered at g == 0
/// (mod theta), optionally Gaussian-blurred in azimuth. Exact erf form: the
/// blurred binary profile is a sum of edge CDFs from the nearby periods.
double slot_transmittance(double g_deg, double theta_deg, double sigma_deg) {
    const double period = theta_deg;
    if (sigma_deg <= 0.0) {
        double frac = g_deg / period - std::floor(g_deg / period);
        return (frac >= 0.25 && frac < 0.75) ? 1.0 : 0.0;
    }
    const double inv = 1.0 / (sigma_deg * std::sqrt(2.0));
    const auto cdf = [inv](double x) { return 0.5 * std::erfc(-x * inv); };
    const auto reach = static_cast<int>(std::ceil(8.0 * sigma_deg / period)) + 1;
    const double base = std::floor(g_deg / period);
    double t = 0.0;
    for (int j = -reach; j <= reach; ++j) {
        const double open = (base + j) * period + 0.25 * period;   // slot opens
        const double close = (base + j) * period + 0.75 * period;  // slot closes
        t += cdf(g_deg - open) - cdf(g_deg - close);
    }
    return t;
}

struct RayField {
    ScalarMap gamma_deg;  // wrapped beta - alpha_0 per pixel
    ScalarMap depth;
};

/// Casts every pixel ray, records the azimuth offset from the pattern origin
/// and the camera-frame depth. Shared by ground_truth_phase and the renderer.
RayField cast_rays(const CylindricalProjector& projector, const CameraModel& camera,
                   const SceneSurface& scene) {
    projector.validate();
    camera.validate();
    scene.validate();

    RayField field;
    field.gamma_deg = ScalarMap(camera.width, camera.height, 0.0, false);
    field.depth = ScalarMap(camera.width, camera.height, 0.0, false);

    const Vec3 origin = camera.camera_center();
    const Mat3 rt = camera.rotation;  // world->camera

    parallel_for(0, camera.height, [&](std::int64_t row_lo, std::int64_t row_hi) {
        for (std::int64_t yy = row_lo; yy < row_hi; ++yy) {
            for (int xx = 0; xx < camera.width; ++xx) {
                const Vec3 dir =
                    camera.ray_direction(static_cast<double>(xx), static_cast<double>(yy));
                Vec3 hit;
                if (!intersect_scene(scene, origin, dir, &hit)) continue;
                const Vec3 cam = rt * hit + camera.translation;
                if (!(cam.z > 0.0)) continue;
                const std::int64_t i = field.depth.index(xx, static_cast<int>(yy));
                field.depth.values[static_cast<std::size_t>(i)] = cam.z;
                field.gamma_deg.values[static_cast<std::size_t>(i)] =
                    wrap_deg_180(projector.azimuth_deg(hit) - projector.rotation_offset_deg);
                field.depth.mask[static_cast<std::size_t>(i)] = 1;
                field.gamma_deg.mask[static_cast<std::size_t>(i)] = 1;
            }
        }
    });
    return field;
}

}  // namespace

void CylindricalProjector::validate() const {
    if (!(theta_h_deg > 0.0) || !(theta_l_deg > theta_h_deg))
        throw DomainError("projector: need 0 < theta_h < theta_l");
    const double turns_h = 360.0 / theta_h_deg;
    const double turns_l = 360.0 / theta_l_deg;
    if (std::abs(turns_h - std::round(turns_h)) > 1e-9 ||
        std::abs(turns_l - std::round(turns_l)) > 1e-9)
        throw DomainError("projector: 360 degrees must be an integer multiple of each interval");
    if (!(cylinder_radius_mm > 0.0)) throw DomainError("projector: cylinder radius must be > 0");
    if (!(stage_resolution_deg > 0.0))
        throw DomainError("projector: stage resolution must be > 0");
    if (norm(axis_dir) < 1e-12 || norm(azimuth_ref) < 1e-12)
        throw DomainError("projector: axis frame vectors must be nonzero");
    const Vec3 az = normalized(axis_dir);
    const Vec3 ref = azimuth_ref - az * dot(az, azimuth_ref);
    if (norm(ref) < 1e-9)
        throw DomainError("projector: azimuth reference is parallel to the axis");
}

double CylindricalProjector::azimuth_deg(const Vec3& world_point) const {
    const Vec3 az = normalized(axis_dir);
    const Vec3 ex = normalized(azimuth_ref - az * dot(az, azimuth_ref));
    const Vec3 ey = cross(az, ex);
    const Vec3 d = world_point - axis_origin;
    return rad_to_deg(std::atan2(dot(d, ey), dot(d, ex)));
}

double fringe_wavelength(double distance_mm, double theta_deg, WavelengthModel model) {
    if (!(distance_mm > 0.0)) throw DomainError("fringe_wavelength: distance must be positive");
    if (!(theta_deg > 0.0) || !(theta_deg < 90.0))
        throw DomainError("fringe_wavelength: interval must lie in (0, 90) degrees");
    const double theta = deg_to_rad(theta_deg);
    if (model == WavelengthModel::SmallAngle) return distance_mm * theta;
    return distance_mm * (std::tan(theta / 4.0) + std::tan(3.0 * theta / 4.0));
}

void CameraModel::validate() const {
    if (width <= 0 || height <= 0) throw DomainError("camera: image dimensions must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("camera: focal lengths must be positive");
    if (!(cx >= 0.0) || !(cx <= width - 1.0) || !(cy >= 0.0) || !(cy <= height - 1.0))
        throw DomainError("camera: principal point outside the image rectangle");

    const Mat3 rrt = rotation * rotation.transposed();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (std::abs(rrt(r, c) - (r == c ? 1.0 : 0.0)) > 1e-9)
                throw DomainError("camera: rotation is not orthonormal");
    if (std::abs(rotation.det() - 1.0) > 1e-9)
        throw DomainError("camera: rotation determinant must be +1");
}

Vec3 CameraModel::camera_center() const {
    return rotation.transposed() * (-translation);
}

Vec3 CameraModel::ray_direction(double u, double v) const {
    const Vec3 cam{(u - cx) / fx, (v - cy) / fy, 1.0};
    return rotation.transposed() * cam;
}

Vec3 CameraModel::backproject(double u, double v, double depth) const {
    const Vec3 cam{(u - cx) / fx * depth, (v - cy) / fy * depth, depth};
    return rotation.transposed() * (cam - translation);
}

PixelProjection project_point(const CameraModel& camera, const Vec3& world_point) {
    const Vec3 cam = camera.rotation * world_point + camera.translation;
    if (!(cam.z > 0.0))
        throw BehindCamera("project_point: point on or behind the principal plane");
    return {camera.fx * cam.x / cam.z + camera.cx, camera.fy * cam.y / cam.z + camera.cy, cam.z};
}

SceneSurface SceneSurface::plane(const Vec3& point, const Vec3& normal) {
    SceneSurface s;
    s.kind = Kind::Plane;
    s.plane_point = point;
    s.plane_normal = normal;
    return s;
}

SceneSurface SceneSurface::sphere(const Vec3& center, double radius) {
    SceneSurface s;
    s.kind = Kind::Sphere;
    s.sphere_center = center;
    s.sphere_radius = radius;
    return s;
}

SceneSurface SceneSurface::height_grid(HeightGrid grid) {
    SceneSurface s;
    s.kind = Kind::Heightmap;
    s.heightmap = std::move(grid);
    return s;
}

void SceneSurface::validate() const {
    if (!(reflectance > 0.0) || !(reflectance <= 1.0))
        throw DomainError("scene: reflectance must lie in (0, 1]");
    if (!(ambient >= 0.0) || ambient + reflectance > 1.0 + 1e-12)
        throw DomainError("scene: need ambient >= 0 and ambient + reflectance <= 1");
    switch (kind) {
        case Kind::Plane:
            if (norm(plane_normal) < 1e-12) throw DomainError("scene: plane normal is zero");
            break;
        case Kind::Sphere:
            if (!(sphere_radius > 0.0)) throw DomainError("scene: sphere radius must be > 0");
            break;
        case Kind::Heightmap: {
            const auto& g = heightmap;
            if (g.cols < 2 || g.rows < 2 || !(g.spacing > 0.0))
                throw DomainError("scene: heightmap needs at least a 2x2 grid and spacing > 0");
            if (g.z.size() != static_cast<std::size_t>(g.cols) * static_cast<std::size_t>(g.rows))
                throw DomainError("scene: heightmap buffer size mismatch");
            for (const double h : g.z)
                if (!std::isfinite(h)) throw DomainError("scene: heightmap contains non-finite values");
            break;
        }
    }
}

namespace {

bool intersect_plane(const SceneSurface& s, const Vec3& o, const Vec3& d, Vec3* hit) {
    const Vec3 n = normalized(s.plane_normal);
    const double denom = dot(d, n);
    if (std::abs(denom) < 1e-12 * norm(d)) return false;  // degenerate: ray parallel to plane
    const double t = dot(s.plane_point - o, n) / denom;
    if (t <= kRayEps) return false;
    *hit = o + d * t;
    return true;
}

bool intersect_sphere(const SceneSurface& s, const Vec3& o, const Vec3& d, Vec3* hit) {
    const Vec3 oc = o - s.sphere_center;
    const double a = dot(d, d);
    const double b = 2.0 * dot(d, oc);
    const double c = dot(oc, oc) - s.sphere_radius * s.sphere_radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    double t = (-b - sq) / (2.0 * a);
    if (t <= kRayEps) t = (-b + sq) / (2.0 * a);
    if (t <= kRayEps) return false;
    *hit = o + d * t;
    return true;
}

bool height_at(const HeightGrid& g, double x, double y, double* h) {
    const double gx = (x - g.x0) / g.spacing;
    const double gy = (y - g.y0) / g.spacing;
    if (gx < 0.0 || gy < 0.0 || gx > g.cols - 1.0 || gy > g.rows - 1.0) return false;
    const int i = std::min(static_cast<int>(gx), g.cols - 2);
    const int j = std::min(static_cast<int>(gy), g.rows - 2);
    const double fx = gx - i;
    const double fy = gy - j;
    const auto z = [&](int col, int row) {
        return g.z[static_cast<std::size_t>(row) * g.cols + col];
    };
    *h = (1 - fx) * (1 - fy) * z(i, j) + fx * (1 - fy) * z(i + 1, j) +
         (1 - fx) * fy * z(i, j + 1) + fx * fy * z(i + 1, j + 1);
    return true;
}

bool intersect_heightmap(const SceneSurface& s, const Vec3& o, const Vec3& d, Vec3* hit) {
    const HeightGrid& g = s.heightmap;
    // March in t so that each step moves at most half a cell in x/y, then
    // bisect the first bracketed sign change of z(t) - H(x(t), y(t)).
    const double lateral = std::max(std::abs(d.x), std::abs(d.y));
    const double span_hint = std::max({std::abs(o.x - g.x0), std::abs(o.y - g.y0),
                                       g.cols * g.spacing, g.rows * g.spacing, std::abs(o.z)});
    const double t_max = 16.0 * span_hint / std::max(norm(d), 1e-12) + 1.0;
    const double dt = lateral > 1e-12 ? 0.5 * g.spacing / lateral
                                      : std::max(g.spacing, t_max / 4096.0);

    bool have_prev = false;
    double prev_t = 0.0, prev_f = 0.0;
    for (double t = kRayEps; t <= t_max; t += dt) {
        const Vec3 p = o + d * t;
        double h;
        if (!height_at(g, p.x, p.y, &h)) {
            have_prev = false;
            continue;
        }
        const double f = p.z - h;
        if (have_prev && ((prev_f <= 0.0) != (f <= 0.0))) {
            double lo = prev_t, hi = t, flo = prev_f;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                const Vec3 pm = o + d * mid;
                double hm;
                if (!height_at(g, pm.x, pm.y, &hm)) break;
                const double fm = pm.z - hm;
                if ((flo <= 0.0) == (fm <= 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if ((hi - lo) * norm(d) < 1e-6) break;  // 1e-6 mm along the ray
            }
            *hit = o + d * (0.5 * (lo + hi));
            return true;
        }
        have_prev = true;
        prev_t = t;
        prev_f = f;
    }
    return false;
}

}  // namespace

bool intersect_scene(const SceneSurface& scene, const Vec3& origin, const Vec3& dir, Vec3* hit) {
    switch (scene.kind) {
        case SceneSurface::Kind::Plane:
            return intersect_plane(scene, origin, dir, hit);
        case SceneSurface::Kind::Sphere:
            return intersect_sphere(scene, origin, dir, hit);
        case SceneSurface::Kind::Heightmap:
            return intersect_heightmap(scene, origin, dir, hit);
    }
    return false;
}

void RenderConfig::validate() const {
    if (steps < 3) throw DomainError("render: need at least 3 phase steps");
    if (!(blur_sigma_deg >= 0.0)) throw DomainError("render: blur sigma must be >= 0");
    if (!(noise_sigma >= 0.0)) throw DomainError("render: noise sigma must be >= 0");
}

ScalarMap ground_truth_phase(const CylindricalProjector& projector, const CameraModel& camera,
                             const SceneSurface& scene, FrequencyTag tag) {
    const RayField field = cast_rays(projector, camera, scene);
    const double theta = projector.interval_deg(tag);

    ScalarMap out(camera.width, camera.height, 0.0, false);
    out.mask = field.gamma_deg.mask;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        if (!out.valid(i)) continue;
        const auto idx = static_cast<std::size_t>(i);
        out.values[idx] = kTwoPi * field.gamma_deg.values[idx] / theta;
    }
    return out;
}

RenderOutput render_fringe_stack(const CylindricalProjector& projector, const CameraModel& camera,
                                 const SceneSurface& scene, FrequencyTag tag,
                                 const RenderConfig& config) {
    config.validate();
    const RayField field = cast_rays(projector, camera, scene);

    const double theta = projector.interval_deg(tag);
    const int n = config.steps;

    // Stage rotation per step (optionally snapped to the encoder grid) and
    // the recorded nominal shift schedule 2*pi*k/N.
    std::vector<double> rotation_deg(static_cast<std::size_t>(n));
    std::vector<double> recorded(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double rot = theta * k / n;
        if (config.quantize_stage)
            rot = std::round(rot / projector.stage_resolution_deg) * projector.stage_resolution_deg;
        rotation_deg[static_cast<std::size_t>(k)] = rot;
        recorded[static_cast<std::size_t>(k)] = kTwoPi * k / n;
    }

    RenderOutput out;
    out.depth = field.depth;
    out.true_phase = ScalarMap(camera.width, camera.height, 0.0, false);
    out.true_phase.mask = field.gamma_deg.mask;

    // Retrieval-convention ground truth: the arctangent formula applied to
    // this stack recovers the wrap of -(2*pi*gamma/theta + pi).
    for (std::int64_t i = 0; i < out.true_phase.size(); ++i) {
        if (!out.true_phase.valid(i)) continue;
        const auto idx = static_cast<std::size_t>(i);
        out.true_phase.values[idx] = -kTwoPi * field.gamma_deg.values[idx] / theta - kPi;
    }

    out.stack.frequency = tag;
    out.stack.shifts = recorded;
    out.stack.wavelength = theta;  // unwrapping wavelengths are taken proportional to theta
    out.stack.frames.assign(static_cast<std::size_t>(n),
                            ScalarMap(camera.width, camera.height, 0.0, false));
    for (auto& f : out.stack.frames) f.mask = field.gamma_deg.mask;

    const std::uint64_t freq_salt = tag == FrequencyTag::High ? 0x68u : 0x6Cu;
    const auto total = out.true_phase.size();

    for (int k = 0; k < n; ++k) {
        ScalarMap& frame = out.stack.frames[static_cast<std::size_t>(k)];
        const double rot = rotation_deg[static_cast<std::size_t>(k)];
        const std::uint64_t stream = (freq_salt << 32) | static_cast<std::uint64_t>(k);

        parallel_for(0, total, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                if (!frame.valid(i)) continue;
                const double gamma = field.gamma_deg.values[idx];
                double intensity;
                if (config.fidelity == RenderConfig::Fidelity::IdealSinusoid) {
                    // Dark fringe at the pattern origin: 0.5 - 0.5*cos.
                    const double phase = kTwoPi * (gamma - rot) / theta;
                    intensity = scene.ambient +
                                scene.reflectance * (0.5 - 0.5 * std::cos(phase));
                } else {
                    intensity = scene.ambient +
                                scene.reflectance *
                                    slot_transmittance(gamma - rot, theta, config.blur_sigma_deg);
                }
                if (config.noise_sigma > 0.0) {
                    intensity += config.noise_sigma *
                                 detail::gaussian(config.seed, stream,
                                                  static_cast<std::uint64_t>(i));
                    if (intensity < 0.0) intensity = 0.0;
                }
                frame.values[idx] = intensity;
            }
        });
    }

    return out;
}

}  // namespace fringeforge
