#include "fringeforge/calib.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fringeforge/errors.hpp"
#include "fringeforge/parallel.hpp"
#include "json.hpp"
#include "small_linalg.hpp"

namespace fringeforge {

namespace {

/// Expands p(q) with q = (phi - m)/s into raw phase powers.
std::array<double, 4> uncenter_cubic(const std::array<double, 4>& ch, double m, double s) {
    // Horner on polynomial coefficients: out = ((c3*q + c2)*q + c1)*q + c0.
    std::array<double, 4> out{};
    for (int j = 3; j >= 0; --j) {
        // out = out * (phi - m)/s
        std::array<double, 4> next{};
        for (int d = 0; d < 3; ++d) {
            next[static_cast<std::size_t>(d + 1)] += out[static_cast<std::size_t>(d)] / s;
            next[static_cast<std::size_t>(d)] -= out[static_cast<std::size_t>(d)] * m / s;
        }
        next[0] += ch[static_cast<std::size_t>(j)];
        out = next;
    }
    return out;
}

double eval_cubic(const double* c0, const double* c1, const double* c2, const double* c3,
                  std::size_t i, double phi) {
    return ((c3[i] * phi + c2[i]) * phi + c1[i]) * phi + c0[i];
}

}  // namespace

CalibResult fit_calibration(std::span<const CalibPose> poses, const CalibOptions& options) {
    const int p = static_cast<int>(poses.size());
    if (p < options.min_poses)
        throw InsufficientPoses("fit_calibration: need at least " +
                                std::to_string(options.min_poses) + " poses, got " +
                                std::to_string(p));
    if (!(options.working_range_min_mm < options.working_range_max_mm))
        throw DomainError("fit_calibration: invalid working range");

    const int w = poses[0].phase.width;
    const int h = poses[0].phase.height;
    for (const auto& pose : poses) {
        if (pose.phase.width != w || pose.phase.height != h || !pose.phase.same_shape(pose.x) ||
            !pose.phase.same_shape(pose.y) || !pose.phase.same_shape(pose.z))
            throw DimensionMismatch("fit_calibration: pose maps differ in size");
        for (std::int64_t i = 0; i < pose.z.size(); ++i) {
            if (!pose.z.valid(i)) continue;
            const double z = pose.z.values[static_cast<std::size_t>(i)];
            if (z < options.working_range_min_mm - 1e-9 ||
                z > options.working_range_max_mm + 1e-9)
                throw DomainError("fit_calibration: pose '" + pose.id +
                                  "' has reference depths outside the working range");
        }
    }

    CalibResult result;
    PolyCalibration& calib = result.calibration;
    calib.width = w;
    calib.height = h;
    calib.working_range_min_mm = options.working_range_min_mm;
    calib.working_range_max_mm = options.working_range_max_mm;
    const auto total = static_cast<std::size_t>(calib.size());
    for (int j = 0; j < 4; ++j) {
        calib.a[static_cast<std::size_t>(j)].assign(total, 0.0);
        calib.b[static_cast<std::size_t>(j)].assign(total, 0.0);
        calib.c[static_cast<std::size_t>(j)].assign(total, 0.0);
    }
    calib.valid.assign(total, 0);
    calib.phase_min.assign(total, 0.0);
    calib.phase_max.assign(total, 0.0);

    parallel_for(0, calib.size(), [&](std::int64_t lo, std::int64_t hi) {
        std::vector<double> phi(static_cast<std::size_t>(p));
        std::vector<double> rx(static_cast<std::size_t>(p));
        std::vector<double> ry(static_cast<std::size_t>(p));
        std::vector<double> rz(static_cast<std::size_t>(p));

        for (std::int64_t i = lo; i < hi; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            int m = 0;
            for (const auto& pose : poses) {
                if (!pose.phase.valid(i) || !pose.x.valid(i) || !pose.y.valid(i) ||
                    !pose.z.valid(i))
                    continue;
                phi[static_cast<std::size_t>(m)] = pose.phase.values[idx];
                rx[static_cast<std::size_t>(m)] = pose.x.values[idx];
                ry[static_cast<std::size_t>(m)] = pose.y.values[idx];
                rz[static_cast<std::size_t>(m)] = pose.z.values[idx];
                ++m;
            }
            if (m < 4) continue;

            double pmin = phi[0], pmax = phi[0];
            for (int j = 1; j < m; ++j) {
                pmin = std::min(pmin, phi[static_cast<std::size_t>(j)]);
                pmax = std::max(pmax, phi[static_cast<std::size_t>(j)]);
            }
            const double center = 0.5 * (pmin + pmax);
            const double scale = 0.5 * (pmax - pmin);
            if (!(scale > 1e-12)) continue;  // all poses saw the same phase

            // Normal equations on the centered/scaled Vandermonde basis.
            std::array<double, 16> g{};
            std::array<double, 4> bx{}, by{}, bz{};
            for (int j = 0; j < m; ++j) {
                const double q = (phi[static_cast<std::size_t>(j)] - center) / scale;
                const std::array<double, 4> row{1.0, q, q * q, q * q * q};
                for (int r = 0; r < 4; ++r) {
                    const double rv = row[static_cast<std::size_t>(r)];
                    bx[static_cast<std::size_t>(r)] += rv * rx[static_cast<std::size_t>(j)];
                    by[static_cast<std::size_t>(r)] += rv * ry[static_cast<std::size_t>(j)];
                    bz[static_cast<std::size_t>(r)] += rv * rz[static_cast<std::size_t>(j)];
                    for (int cc = 0; cc < 4; ++cc)
                        g[static_cast<std::size_t>(4 * r + cc)] +=
                            rv * row[static_cast<std::size_t>(cc)];
                }
            }
            auto gx = g, gy = g;
            if (!detail::solve_linear<4>(gx, bx, 1e-10)) continue;
            if (!detail::solve_linear<4>(gy, by, 1e-10)) continue;
            if (!detail::solve_linear<4>(g, bz, 1e-10)) continue;

            const auto ax = uncenter_cubic(bx, center, scale);
            const auto ay = uncenter_cubic(by, center, scale);
            const auto az = uncenter_cubic(bz, center, scale);
            for (int j = 0; j < 4; ++j) {
                calib.a[static_cast<std::size_t>(j)][idx] = ax[static_cast<std::size_t>(j)];
                calib.b[static_cast<std::size_t>(j)][idx] = ay[static_cast<std::size_t>(j)];
                calib.c[static_cast<std::size_t>(j)][idx] = az[static_cast<std::size_t>(j)];
            }
            calib.phase_min[idx] = pmin;
            calib.phase_max[idx] = pmax;
            calib.valid[idx] = 1;
        }
    });

    // Per-pose residuals evaluated with the stored raw coefficients, so the
    // recorded numbers are reproducible from the container byte for byte.
    CalibReport& report = result.report;
    report.poses = p;
    for (const auto& pose : poses) {
        double ssx = 0.0, ssy = 0.0, ssz = 0.0;
        std::int64_t count = 0;
        for (std::int64_t i = 0; i < calib.size(); ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!calib.pixel_valid(i) || !pose.phase.valid(i) || !pose.x.valid(i) ||
                !pose.y.valid(i) || !pose.z.valid(i))
                continue;
            const double phi = pose.phase.values[idx];
            const double ex =
                eval_cubic(calib.a[0].data(), calib.a[1].data(), calib.a[2].data(),
                           calib.a[3].data(), idx, phi) - pose.x.values[idx];
            const double ey =
                eval_cubic(calib.b[0].data(), calib.b[1].data(), calib.b[2].data(),
                           calib.b[3].data(), idx, phi) - pose.y.values[idx];
            const double ez =
                eval_cubic(calib.c[0].data(), calib.c[1].data(), calib.c[2].data(),
                           calib.c[3].data(), idx, phi) - pose.z.values[idx];
            ssx += ex * ex;
            ssy += ey * ey;
            ssz += ez * ez;
            ++count;
        }
        report.pose_ids.push_back(pose.id);
        report.pose_pixel_count.push_back(count);
        const double denom = count > 0 ? static_cast<double>(count) : 1.0;
        report.rmse_x.push_back(std::sqrt(ssx / denom));
        report.rmse_y.push_back(std::sqrt(ssy / denom));
        report.rmse_z.push_back(std::sqrt(ssz / denom));
    }

    // Pooled depth residual (Eq-style sigma over every pose and valid pixel).
    double pooled_ss = 0.0;
    std::int64_t pooled_n = 0;
    for (std::size_t j = 0; j < poses.size(); ++j) {
        pooled_ss += report.rmse_z[j] * report.rmse_z[j] *
                     static_cast<double>(report.pose_pixel_count[j]);
        pooled_n += report.pose_pixel_count[j];
    }
    report.sigma_cal_mm = pooled_n > 0 ? std::sqrt(pooled_ss / static_cast<double>(pooled_n)) : 0.0;

    std::int64_t valid_px = 0;
    for (const auto v : calib.valid) valid_px += (v != 0);
    report.valid_pixels = valid_px;

    std::vector<ScalarMap> pose_phases;
    pose_phases.reserve(poses.size());
    for (const auto& pose : poses) pose_phases.push_back(pose.phase);
    report.s_eff_mm_per_rad = effective_sensitivity(calib, pose_phases);

    return result;
}

double pooled_rmse(std::span<const ScalarMap> residual_maps) {
    double ss = 0.0;
    std::int64_t n = 0;
    for (const auto& map : residual_maps) {
        for (std::int64_t i = 0; i < map.size(); ++i) {
            if (!map.valid(i)) continue;
            const double r = map.values[static_cast<std::size_t>(i)];
            ss += r * r;
            ++n;
        }
    }
    if (n == 0) throw EmptyInput("pooled_rmse: no valid residuals");
    return std::sqrt(ss / static_cast<double>(n));
}

EvaluatedPoints evaluate_points(const PolyCalibration& calib, const ScalarMap& phase) {
    if (phase.width != calib.width || phase.height != calib.height)
        throw DimensionMismatch("evaluate_points: phase map size differs from calibration");

    EvaluatedPoints out;
    out.x = ScalarMap(calib.width, calib.height, 0.0, false);
    out.y = ScalarMap(calib.width, calib.height, 0.0, false);
    out.z = ScalarMap(calib.width, calib.height, 0.0, false);
    out.out_of_domain.assign(static_cast<std::size_t>(calib.size()), 0);

    parallel_for(0, calib.size(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!calib.pixel_valid(i) || !phase.valid(i)) continue;
            const double phi = phase.values[idx];
            out.x.values[idx] = eval_cubic(calib.a[0].data(), calib.a[1].data(),
                                           calib.a[2].data(), calib.a[3].data(), idx, phi);
            out.y.values[idx] = eval_cubic(calib.b[0].data(), calib.b[1].data(),
                                           calib.b[2].data(), calib.b[3].data(), idx, phi);
            out.z.values[idx] = eval_cubic(calib.c[0].data(), calib.c[1].data(),
                                           calib.c[2].data(), calib.c[3].data(), idx, phi);
            out.x.mask[idx] = out.y.mask[idx] = out.z.mask[idx] = 1;
            if (phi < calib.phase_min[idx] || phi > calib.phase_max[idx])
                out.out_of_domain[idx] = 1;
        }
    });
    return out;
}

double effective_sensitivity(const PolyCalibration& calib,
                             std::span<const ScalarMap> pose_phases) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (const auto& phase : pose_phases) {
        if (phase.width != calib.width || phase.height != calib.height)
            throw DimensionMismatch("effective_sensitivity: phase map size mismatch");
        for (std::int64_t i = 0; i < calib.size(); ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (!calib.pixel_valid(i) || !phase.valid(i)) continue;
            const double phi = phase.values[idx];
            const double d =
                calib.c[1][idx] + 2.0 * calib.c[2][idx] * phi + 3.0 * calib.c[3][idx] * phi * phi;
            sum += std::abs(d);
            ++n;
        }
    }
    if (n == 0) throw EmptyInput("effective_sensitivity: no valid samples");
    return sum / static_cast<double>(n);
}

namespace {

void write_raw(std::ofstream& f, const void* data, std::size_t bytes) {
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

}  // namespace

void save_calibration(const std::string& path, const PolyCalibration& calib) {
    nlohmann::json header;
    header["format"] = "fringeforge-calibration";
    header["version"] = 1;
    header["width"] = calib.width;
    header["height"] = calib.height;
    header["coefficient_layout"] = {"a0", "a1", "a2", "a3", "b0", "b1",
                                    "b2", "b3", "c0", "c1", "c2", "c3"};
    header["scalar"] = "float64-le";
    header["phase_domain_planes"] = true;
    header["working_range_mm"] = {calib.working_range_min_mm, calib.working_range_max_mm};

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_calibration: cannot open '" + path + "' for writing");
    const std::string text = header.dump(2);
    write_raw(f, text.data(), text.size());
    const char sep[2] = {'\n', '\0'};
    write_raw(f, sep, 2);

    const auto total = static_cast<std::size_t>(calib.size());
    const auto plane_bytes = total * sizeof(double);
    for (const auto& plane : calib.a) write_raw(f, plane.data(), plane_bytes);
    for (const auto& plane : calib.b) write_raw(f, plane.data(), plane_bytes);
    for (const auto& plane : calib.c) write_raw(f, plane.data(), plane_bytes);
    write_raw(f, calib.valid.data(), total);
    write_raw(f, calib.phase_min.data(), plane_bytes);
    write_raw(f, calib.phase_max.data(), plane_bytes);
    if (!f) throw IoError("save_calibration: write failed for '" + path + "'");
}

PolyCalibration load_calibration(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_calibration: cannot open '" + path + "'");

    std::string header_text;
    char ch;
    bool terminated = false;
    while (f.get(ch)) {
        if (ch == '\0' && !header_text.empty() && header_text.back() == '\n') {
            header_text.pop_back();
            terminated = true;
            break;
        }
        header_text.push_back(ch);
        if (header_text.size() > (1u << 20))
            throw IoError("load_calibration: header terminator not found in '" + path + "'");
    }
    if (!terminated) throw IoError("load_calibration: truncated header in '" + path + "'");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_calibration: bad header in '" + path + "': " + e.what());
    }
    if (header.value("format", "") != "fringeforge-calibration")
        throw IoError("load_calibration: '" + path + "' is not a calibration container");

    PolyCalibration calib;
    calib.width = header.at("width").get<int>();
    calib.height = header.at("height").get<int>();
    if (calib.width <= 0 || calib.height <= 0)
        throw IoError("load_calibration: invalid dimensions in '" + path + "'");
    const auto range = header.at("working_range_mm");
    calib.working_range_min_mm = range.at(0).get<double>();
    calib.working_range_max_mm = range.at(1).get<double>();

    const auto total = static_cast<std::size_t>(calib.size());
    auto read_plane = [&](std::vector<double>& plane) {
        plane.resize(total);
        f.read(reinterpret_cast<char*>(plane.data()),
               static_cast<std::streamsize>(total * sizeof(double)));
        if (!f) throw IoError("load_calibration: truncated data in '" + path + "'");
    };
    for (auto& plane : calib.a) read_plane(plane);
    for (auto& plane : calib.b) read_plane(plane);
    for (auto& plane : calib.c) read_plane(plane);
    calib.valid.resize(total);
    f.read(reinterpret_cast<char*>(calib.valid.data()), static_cast<std::streamsize>(total));
    if (!f) throw IoError("load_calibration: truncated validity plane in '" + path + "'");
    read_plane(calib.phase_min);
    read_plane(calib.phase_max);
    return calib;
}

}  // namespace fringeforge
