#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#ifdef FRINGEFORGE_HAVE_EIGEN
#include <Eigen/Dense>
#endif

#include "fringeforge/errors.hpp"
#include "fringeforge/geomfit.hpp"

using namespace fringeforge;

namespace {

std::vector<Vec3> plane_grid(double z, int nx = 20, int ny = 15) {
    std::vector<Vec3> pts;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            pts.push_back({x * 2.0 - nx, y * 2.0 - ny, z});
    return pts;
}

std::vector<Vec3> sphere_points(const Vec3& center, double radius, int n, std::uint64_t seed,
                                double noise = 0.0, bool cap_only = false) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    while (static_cast<int>(pts.size()) < n) {
        Vec3 d{gauss(gen), gauss(gen), gauss(gen)};
        const double len = norm(d);
        if (len < 1e-6) continue;
        d = d / len;
        if (cap_only && d.z >= 0.0) continue;  // keep the camera-facing half
        const double r = radius + (noise > 0.0 ? noise * gauss(gen) : 0.0);
        pts.push_back(center + d * r);
    }
    return pts;
}

double plane_ssr(std::span<const Vec3> pts, const Plane& plane) {
    double ss = 0.0;
    for (const auto& p : pts) {
        const double d = plane.signed_distance(p);
        ss += d * d;
    }
    return ss;
}

double sphere_ssr(std::span<const Vec3> pts, const Sphere& s) {
    double ss = 0.0;
    for (const auto& p : pts) {
        const double d = s.signed_distance(p);
        ss += d * d;
    }
    return ss;
}

// Independent algebraic sphere estimate: linear least squares on
// |p|^2 = 2 c.p + (r^2 - |c|^2), solved with plain Gaussian elimination.
Sphere algebraic_sphere(std::span<const Vec3> pts) {
    double m[4][5] = {};
    for (const auto& p : pts) {
        const double row[4] = {2 * p.x, 2 * p.y, 2 * p.z, 1.0};
        const double rhs = dot(p, p);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) m[i][j] += row[i] * row[j];
            m[i][4] += row[i] * rhs;
        }
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        for (int c = 0; c < 5; ++c) std::swap(m[col][c], m[piv][c]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
        }
    }
    Sphere s;
    s.center = {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2]};
    const double d = m[3][4] / m[3][3];
    s.radius = std::sqrt(d + dot(s.center, s.center));
    return s;
}

}  // namespace

TEST_CASE("plane through exact data") {
    auto plane = fit_plane(plane_grid(600.0));
    CHECK(plane.normal.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(plane.normal.y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(plane.normal.z == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(plane.offset == doctest::Approx(600.0).epsilon(1e-12));
    CHECK(std::abs(plane.signed_distance({3.0, -7.0, 600.0})) < 1e-9);
}

TEST_CASE("plane degeneracies") {
    CHECK_THROWS_AS(fit_plane(std::vector<Vec3>{{0, 0, 0}, {1, 1, 1}}), DegenerateInput);
    std::vector<Vec3> collinear;
    for (int i = 0; i < 10; ++i) collinear.push_back({i * 1.0, i * 2.0, i * 3.0});
    CHECK_THROWS_AS(fit_plane(collinear), DegenerateInput);
}

TEST_CASE("plane residuals track the injected noise level") {
    std::mt19937_64 gen(404);
    std::normal_distribution<double> gauss(0.0, 0.05);
    std::uniform_real_distribution<double> span(-50.0, 50.0);
    std::vector<Vec3> pts;
    const int n = 100000;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.push_back({span(gen), span(gen), 600.0 + gauss(gen)});
    auto plane = fit_plane(pts);
    const double rmse = std::sqrt(plane_ssr(pts, plane) / n);
    CHECK(rmse > 0.8 * 0.05);
    CHECK(rmse < 1.2 * 0.05);
}

#ifdef FRINGEFORGE_HAVE_EIGEN
TEST_CASE("plane matches the scatter-matrix eigenvector reference") {
    std::mt19937_64 gen(777);
    std::uniform_real_distribution<double> coord(-30.0, 30.0);
    std::normal_distribution<double> jitter(0.0, 0.2);
    std::uniform_real_distribution<double> tilt(-0.4, 0.4);

    for (int trial = 0; trial < 100; ++trial) {
        const double a = tilt(gen), b = tilt(gen);
        const double d = 400.0 + 40.0 * tilt(gen);
        const int n = 10 + static_cast<int>(40 * std::abs(tilt(gen)));
        std::vector<Vec3> pts;
        for (int i = 0; i < n; ++i) {
            const double x = coord(gen), y = coord(gen);
            pts.push_back({x, y, d + a * x + b * y + jitter(gen)});
        }

        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        for (const auto& p : pts) centroid += Eigen::Vector3d(p.x, p.y, p.z);
        centroid /= static_cast<double>(pts.size());
        Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
        for (const auto& p : pts) {
            Eigen::Vector3d q = Eigen::Vector3d(p.x, p.y, p.z) - centroid;
            scatter += q * q.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
        Eigen::Vector3d n_ref = eig.eigenvectors().col(0);

        auto plane = fit_plane(pts);
        Eigen::Vector3d n_fit(plane.normal.x, plane.normal.y, plane.normal.z);
        // sin(angle) via the cross product: acos of a near-1 dot product
        // cannot resolve angles below ~1.5e-8.
        const double angle = n_ref.cross(n_fit).norm();
        CHECK(angle < 1e-8);
        CHECK(std::abs(std::abs(n_ref.dot(centroid)) - std::abs(plane.offset)) < 1e-9);
    }
}
#endif

TEST_CASE("no small tilt of the fitted plane lowers the residual") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> jitter(0.0, 0.3);
    std::vector<Vec3> pts;
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
            pts.push_back({x * 5.0, y * 5.0, 580.0 + 0.1 * x - 0.05 * y + jitter(gen)});
    auto plane = fit_plane(pts);
    const double best = plane_ssr(pts, plane);

    const Vec3 axis_a = normalized(cross(plane.normal, Vec3{1, 0, 0}));
    const Vec3 axis_b = normalized(cross(plane.normal, axis_a));
    for (double eps : {1e-3, -1e-3}) {
        for (const Vec3& axis : {axis_a, axis_b}) {
            Plane tilted = plane;
            tilted.normal = normalized(plane.normal + axis * eps);
            // Re-optimize the offset for the tilted normal (best case for it).
            double mean = 0.0;
            for (const auto& p : pts) mean += dot(tilted.normal, p);
            tilted.offset = mean / static_cast<double>(pts.size());
            CHECK(plane_ssr(pts, tilted) >= best * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("plane fitting commutes with rigid motions") {
    std::mt19937_64 gen(15);
    std::normal_distribution<double> jitter(0.0, 0.25);
    std::vector<Vec3> pts;
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x)
            pts.push_back({x * 4.0 - 20.0, y * 4.0 - 20.0, 550.0 + jitter(gen)});
    auto base = fit_plane(pts);

    const double ang = 0.3;
    const Vec3 t{12.0, -7.0, 30.0};
    auto rotate = [&](const Vec3& p) {
        return Vec3{p.x * std::cos(ang) - p.z * std::sin(ang), p.y,
                    p.x * std::sin(ang) + p.z * std::cos(ang)};
    };
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(rotate(p) + t);
    auto transformed = fit_plane(moved);

    const Vec3 n_expected = rotate(base.normal);
    const double d_expected = base.offset + dot(n_expected, t);
    const double sign = dot(n_expected, transformed.normal) >= 0.0 ? 1.0 : -1.0;
    CHECK(norm(transformed.normal - n_expected * sign) < 1e-9);
    CHECK(std::abs(transformed.offset * sign - d_expected) < 1e-8);
    // Residuals are invariant regardless of orientation bookkeeping.
    CHECK(std::abs(plane_ssr(moved, transformed) - plane_ssr(pts, base)) < 1e-8);
}

TEST_CASE("sphere fits recover exact synthetic data") {
    const Vec3 center{5.0, -12.0, 620.0};
    auto pts = sphere_points(center, 50.0, 400, 21);

    SUBCASE("fixed radius") {
        Vec3 c = fit_sphere_center(pts, 50.0);
        CHECK(norm(c - center) < 1e-9);
    }
    SUBCASE("free radius") {
        Sphere s = fit_sphere_free(pts);
        CHECK(norm(s.center - center) < 1e-9);
        CHECK(s.radius == doctest::Approx(50.0).epsilon(1e-11));
    }
}

TEST_CASE("sphere fit degeneracies") {
    auto flat = plane_grid(600.0, 8, 8);
    CHECK_THROWS_AS(fit_sphere_free(flat), DegenerateInput);
    CHECK_THROWS_AS(fit_sphere_center(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}}, 10.0),
                    DegenerateInput);
    CHECK_THROWS_AS(fit_sphere_center(plane_grid(600.0, 4, 4), -1.0), DomainError);
}

TEST_CASE("partial-cap center recovery under noise") {
    const Vec3 center{0.0, 0.0, 600.0};
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto pts = sphere_points(center, 50.0, 4000, seed, 0.1, /*cap_only=*/true);
        Vec3 c = fit_sphere_center(pts, 50.0);
        CHECK(norm(c - center) < 0.05);
    }
}

TEST_CASE("geometric refinement never loses to the algebraic estimate") {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 10; ++trial) {
        auto pts = sphere_points({2.0, 3.0, 590.0}, 40.0, 600, 100 + trial, 0.4,
                                 /*cap_only=*/trial % 2 == 0);
        Sphere geo = fit_sphere_free(pts);
        Sphere alg = algebraic_sphere(pts);
        CHECK(sphere_ssr(pts, geo) <= sphere_ssr(pts, alg) * (1.0 + 1e-12));
    }
}

TEST_CASE("error statistics identities") {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> gauss(0.03, 0.2);
    std::vector<double> errors;
    for (int i = 0; i < 5000; ++i) errors.push_back(gauss(gen));
    auto stats = error_stats(errors);
    CHECK(stats.count == 5000);
    CHECK(stats.rmse * stats.rmse ==
          doctest::Approx(stats.mean * stats.mean + stats.std_population * stats.std_population)
              .epsilon(1e-9));
    CHECK(stats.std_sample > stats.std_population);

    // Independent extended-precision accumulation.
    long double sum = 0.0L, ss = 0.0L;
    for (double e : errors) {
        sum += e;
        ss += static_cast<long double>(e) * e;
    }
    const double mean_ref = static_cast<double>(sum / errors.size());
    const double rmse_ref = static_cast<double>(std::sqrt(ss / errors.size()));
    CHECK(stats.mean == doctest::Approx(mean_ref).epsilon(1e-12));
    CHECK(stats.rmse == doctest::Approx(rmse_ref).epsilon(1e-12));

    CHECK_THROWS_AS(error_stats({}), EmptyInput);
}

TEST_CASE("histogram counts and edge clamping") {
    HistogramOptions opt;
    opt.bins = 5;
    opt.half_range_mm = 1.0;
    std::vector<double> errors = {-5.0, -0.9, -0.1, 0.0, 0.1, 0.9, 5.0, 0.05};
    auto stats = error_stats(errors, opt);
    std::int64_t total = 0;
    for (auto c : stats.histogram.counts) total += c;
    CHECK(total == static_cast<std::int64_t>(errors.size()));
    CHECK(stats.histogram.counts.size() == 5);
    CHECK(stats.histogram.counts.front() >= 2);  // -5.0 clamps into the first bin
    CHECK(stats.histogram.counts.back() >= 2);   // +5.0 clamps into the last bin
    CHECK_THROWS_AS(error_stats(errors, HistogramOptions{0, 1.0}), DomainError);
}

TEST_CASE("surface error maps") {
    const int w = 12, h = 10;
    ScalarMap x(w, h), y(w, h), z(w, h);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            x.at(u, v) = u * 3.0;
            y.at(u, v) = v * 3.0;
            z.at(u, v) = 600.0;
        }
    }
    Plane plane{{0, 0, 1}, 600.0};

    SUBCASE("points on the surface give a zero map") {
        auto m = error_map(x, y, z, plane);
        for (std::int64_t i = 0; i < m.error.size(); ++i)
            CHECK(std::abs(m.error.values[static_cast<std::size_t>(i)]) < 1e-12);
        CHECK(m.stats.rmse < 1e-12);
    }
    SUBCASE("sign follows the signed plane distance") {
        auto z2 = z;
        z2.at(3, 3) += 0.3;
        auto m = error_map(x, y, z2, plane);
        CHECK(m.error.at(3, 3) == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("sphere errors are outward positive") {
        Sphere s{{0, 0, 0}, 10.0};
        ScalarMap sx(1, 1, 10.3), sy(1, 1, 0.0), sz(1, 1, 0.0);
        auto m = error_map(sx, sy, sz, s);
        CHECK(m.error.values[0] == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("masked pixels are skipped") {
        auto z2 = z;
        z2.mask[5] = 0;
        auto m = error_map(x, y, z2, plane);
        CHECK(!m.error.valid(5));
        CHECK(m.stats.count == w * h - 1);
    }
    SUBCASE("size mismatches throw") {
        CHECK_THROWS_AS(error_map(x, y, ScalarMap(3, 3), plane), DimensionMismatch);
    }
}

TEST_CASE("regional RMSE splits the field along an axis") {
    const int w = 100, h = 20;
    ScalarMap error(w, h);

    SUBCASE("uniform error gives equal bands") {
        for (auto& v : error.values) v = -0.25;
        auto r = regional_rmse(error, ImageAxis::U, 0.2, 0.2);
        CHECK(r.central == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(r.outer == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("edge-heavy error shows up in the outer band") {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                error.at(x, y) = 0.01 * std::abs(x - (w - 1) / 2.0);
        auto r = regional_rmse(error, ImageAxis::U, 0.2, 0.2);
        CHECK(r.outer > r.central);
        auto rv = regional_rmse(error, ImageAxis::V, 0.2, 0.2);
        CHECK(rv.outer == doctest::Approx(rv.central).epsilon(0.2));
    }
    SUBCASE("invalid fractions") {
        CHECK_THROWS_AS(regional_rmse(error, ImageAxis::U, 0.0, 0.2), DomainError);
        CHECK_THROWS_AS(regional_rmse(error, ImageAxis::U, 0.6, 0.6), DomainError);
    }
    SUBCASE("empty bands throw") {
        ScalarMap masked(w, h, 0.0, false);
        CHECK_THROWS_AS(regional_rmse(masked, ImageAxis::U, 0.2, 0.2), EmptyRegion);
    }
}
