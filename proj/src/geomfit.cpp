#include "fringeforge/geomfit.hpp"

#include <algorithm>
#include <cmath>

#include "fringeforge/errors.hpp"
#include "small_linalg.hpp"

namespace fringeforge {

namespace {

Vec3 centroid(std::span<const Vec3> points) {
    Vec3 c;
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
}

/// Algebraic sphere estimate (Coope): ||p||^2 = 2 c.p + (r^2 - ||c||^2) is
/// linear in (c, rho). Used to seed the geometric iterations.
Sphere algebraic_sphere(std::span<const Vec3> points) {
    std::array<double, 16> ata{};
    std::array<double, 4> atb{};
    for (const auto& p : points) {
        const std::array<double, 4> row{2.0 * p.x, 2.0 * p.y, 2.0 * p.z, 1.0};
        const double b = dot(p, p);
        for (int r = 0; r < 4; ++r) {
            atb[static_cast<std::size_t>(r)] += row[static_cast<std::size_t>(r)] * b;
            for (int c = 0; c < 4; ++c)
                ata[static_cast<std::size_t>(4 * r + c)] +=
                    row[static_cast<std::size_t>(r)] * row[static_cast<std::size_t>(c)];
        }
    }
    if (!detail::solve_linear<4>(ata, atb))
        throw DegenerateInput("sphere fit: points are degenerate (coplanar or coincident)");

    Sphere s;
    s.center = {atb[0], atb[1], atb[2]};
    const double r2 = atb[3] + dot(s.center, s.center);
    if (!(r2 > 0.0)) throw DegenerateInput("sphere fit: non-positive algebraic radius");
    s.radius = std::sqrt(r2);
    return s;
}

}  // namespace

Plane fit_plane(std::span<const Vec3> points) {
    if (points.size() < 3) throw DegenerateInput("fit_plane: need at least 3 points");

    const Vec3 c = centroid(points);
    std::array<double, 9> scatter{};
    for (const auto& p : points) {
        const Vec3 d = p - c;
        scatter[0] += d.x * d.x;
        scatter[1] += d.x * d.y;
        scatter[2] += d.x * d.z;
        scatter[4] += d.y * d.y;
        scatter[5] += d.y * d.z;
        scatter[8] += d.z * d.z;
    }
    scatter[3] = scatter[1];
    scatter[6] = scatter[2];
    scatter[7] = scatter[5];

    const auto eig = detail::jacobi_eigen_sym3(scatter);
    // Collinear (or coincident) samples leave two near-zero eigenvalues.
    if (!(eig.values[1] > 1e-12 * std::max(eig.values[2], 1e-300)))
        throw DegenerateInput("fit_plane: points are collinear");

    Plane plane;
    plane.normal = normalized({eig.vectors[0][0], eig.vectors[0][1], eig.vectors[0][2]});
    plane.offset = dot(plane.normal, c);

    if (plane.offset < 0.0 ||
        (plane.offset == 0.0 &&
         (plane.normal.z < 0.0 ||
          (plane.normal.z == 0.0 &&
           (plane.normal.y < 0.0 || (plane.normal.y == 0.0 && plane.normal.x < 0.0)))))) {
        plane.normal = -plane.normal;
        plane.offset = -plane.offset;
    }
    return plane;
}

Vec3 fit_sphere_center(std::span<const Vec3> points, double radius) {
    if (!(radius > 0.0)) throw DomainError("fit_sphere_center: radius must be positive");
    if (points.size() < 3) throw DegenerateInput("fit_sphere_center: need at least 3 points");

    Vec3 center = algebraic_sphere(points).center;

    for (int iter = 0; iter < 100; ++iter) {
        std::array<double, 9> jtj{};
        std::array<double, 3> jtr{};
        for (const auto& p : points) {
            const Vec3 d = p - center;
            const double len = norm(d);
            if (len < 1e-12) continue;
            const Vec3 u = d / len;  // d residual / d center = -u
            const double r = len - radius;
            jtj[0] += u.x * u.x;
            jtj[1] += u.x * u.y;
            jtj[2] += u.x * u.z;
            jtj[4] += u.y * u.y;
            jtj[5] += u.y * u.z;
            jtj[8] += u.z * u.z;
            jtr[0] += u.x * r;
            jtr[1] += u.y * r;
            jtr[2] += u.z * r;
        }
        jtj[3] = jtj[1];
        jtj[6] = jtj[2];
        jtj[7] = jtj[5];

        if (!detail::solve_linear<3>(jtj, jtr, 1e-14))
            throw DegenerateInput("fit_sphere_center: normal matrix is singular "
                                  "(cap covers too little of the sphere)");

        const Vec3 step{jtr[0], jtr[1], jtr[2]};
        center += step;
        if (norm(step) < 1e-9) return center;
    }
    throw NoConvergence("fit_sphere_center: no convergence within 100 iterations");
}

Sphere fit_sphere_free(std::span<const Vec3> points) {
    if (points.size() < 4) throw DegenerateInput("fit_sphere_free: need at least 4 points");

    Sphere s = algebraic_sphere(points);

    for (int iter = 0; iter < 100; ++iter) {
        std::array<double, 16> jtj{};
        std::array<double, 4> jtr{};
        for (const auto& p : points) {
            const Vec3 d = p - s.center;
            const double len = norm(d);
            if (len < 1e-12) continue;
            const Vec3 u = d / len;
            const double r = len - s.radius;
            const std::array<double, 4> row{u.x, u.y, u.z, 1.0};  // negated jacobian row
            for (int rr = 0; rr < 4; ++rr) {
                jtr[static_cast<std::size_t>(rr)] += row[static_cast<std::size_t>(rr)] * r;
                for (int cc = 0; cc < 4; ++cc)
                    jtj[static_cast<std::size_t>(4 * rr + cc)] +=
                        row[static_cast<std::size_t>(rr)] * row[static_cast<std::size_t>(cc)];
            }
        }
        if (!detail::solve_linear<4>(jtj, jtr, 1e-14))
            throw DegenerateInput("fit_sphere_free: normal matrix is singular "
                                  "(cap covers too little of the sphere)");

        s.center += Vec3{jtr[0], jtr[1], jtr[2]};
        s.radius += jtr[3];
        if (!(s.radius > 0.0)) throw DegenerateInput("fit_sphere_free: radius collapsed");

        const double step = std::sqrt(jtr[0] * jtr[0] + jtr[1] * jtr[1] + jtr[2] * jtr[2] +
                                      jtr[3] * jtr[3]);
        if (step < 1e-9) return s;
    }
    throw NoConvergence("fit_sphere_free: no convergence within 100 iterations");
}

ErrorStats error_stats(std::span<const double> errors, const HistogramOptions& options) {
    if (errors.empty()) throw EmptyInput("error_stats: no samples");
    if (options.bins < 1 || !(options.half_range_mm > 0.0))
        throw DomainError("error_stats: invalid histogram options");

    ErrorStats s;
    s.count = static_cast<std::int64_t>(errors.size());
    double sum = 0.0, ss = 0.0;
    for (const double e : errors) {
        sum += e;
        ss += e * e;
    }
    const double n = static_cast<double>(s.count);
    s.mean = sum / n;
    s.rmse = std::sqrt(ss / n);
    const double var_pop = std::max(0.0, ss / n - s.mean * s.mean);
    s.std_population = std::sqrt(var_pop);
    s.std_sample = s.count > 1 ? std::sqrt(var_pop * n / (n - 1.0)) : 0.0;

    s.histogram.lo = -options.half_range_mm;
    s.histogram.hi = options.half_range_mm;
    s.histogram.counts.assign(static_cast<std::size_t>(options.bins), 0);
    const double width = (s.histogram.hi - s.histogram.lo) / options.bins;
    for (const double e : errors) {
        auto bin = static_cast<std::int64_t>(std::floor((e - s.histogram.lo) / width));
        bin = std::clamp<std::int64_t>(bin, 0, options.bins - 1);
        ++s.histogram.counts[static_cast<std::size_t>(bin)];
    }
    return s;
}

namespace {

template <typename Surface>
SurfaceErrorMap error_map_impl(const ScalarMap& x, const ScalarMap& y, const ScalarMap& z,
                               const Surface& surface, const HistogramOptions& options) {
    if (!x.same_shape(y) || !x.same_shape(z))
        throw DimensionMismatch("error_map: coordinate maps differ in size");

    SurfaceErrorMap out;
    out.error = ScalarMap(x.width, x.height, 0.0, false);
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(x.size()));
    for (std::int64_t i = 0; i < x.size(); ++i) {
        if (!x.valid(i) || !y.valid(i) || !z.valid(i)) continue;
        const auto idx = static_cast<std::size_t>(i);
        const Vec3 p{x.values[idx], y.values[idx], z.values[idx]};
        const double e = surface.signed_distance(p);
        out.error.values[idx] = e;
        out.error.mask[idx] = 1;
        samples.push_back(e);
    }
    if (samples.empty()) throw EmptyInput("error_map: no valid points");
    out.stats = error_stats(samples, options);
    return out;
}

}  // namespace

SurfaceErrorMap error_map(const ScalarMap& x, const ScalarMap& y, const ScalarMap& z,
                          const Plane& plane, const HistogramOptions& options) {
    return error_map_impl(x, y, z, plane, options);
}

SurfaceErrorMap error_map(const ScalarMap& x, const ScalarMap& y, const ScalarMap& z,
                          const Sphere& sphere, const HistogramOptions& options) {
    return error_map_impl(x, y, z, sphere, options);
}

RegionalRmse regional_rmse(const ScalarMap& error, ImageAxis axis, double central_fraction,
                           double outer_fraction) {
    if (!(central_fraction > 0.0) || !(outer_fraction > 0.0) ||
        central_fraction + outer_fraction > 1.0 + 1e-12)
        throw DomainError("regional_rmse: fractions must be positive and sum to at most 1");

    const int extent = axis == ImageAxis::U ? error.width : error.height;
    if (extent <= 0) throw EmptyRegion("regional_rmse: empty image");

    // Band boundaries in pixels along the chosen axis.
    const double half_central = 0.5 * central_fraction * extent;
    const double edge = 0.5 * outer_fraction * extent;  // width of each outer band
    const double mid = 0.5 * extent;

    double central_ss = 0.0, outer_ss = 0.0;
    std::int64_t central_n = 0, outer_n = 0;
    for (int yy = 0; yy < error.height; ++yy) {
        for (int xx = 0; xx < error.width; ++xx) {
            if (!error.valid(xx, yy)) continue;
            const double pos = (axis == ImageAxis::U ? xx : yy) + 0.5;
            const double e = error.at(xx, yy);
            if (std::abs(pos - mid) <= half_central) {
                central_ss += e * e;
                ++central_n;
            } else if (pos <= edge || pos >= extent - edge) {
                outer_ss += e * e;
                ++outer_n;
            }
        }
    }
    if (central_n == 0) throw EmptyRegion("regional_rmse: central band has no valid pixels");
    if (outer_n == 0) throw EmptyRegion("regional_rmse: outer bands have no valid pixels");

    return {std::sqrt(central_ss / static_cast<double>(central_n)),
            std::sqrt(outer_ss / static_cast<double>(outer_n))};
}

}  // namespace fringeforge
