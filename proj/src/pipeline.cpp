#include "fringeforge/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <span>
#include <vector>

#include "fringeforge/calib.hpp"
#include "fringeforge/errors.hpp"
#include "fringeforge/geomfit.hpp"
#include "fringeforge/io.hpp"
#include "fringeforge/metrology.hpp"
#include "fringeforge/parallel.hpp"
#include "fringeforge/phase.hpp"
#include "fringeforge/unwrap.hpp"

namespace fringeforge {
namespace {

using nlohmann::json;

// ---- config helpers ---------------------------------------------------

const json* find_section(const PipelineConfig& cfg, const char* name) {
    const auto it = cfg.doc.find(name);
    if (it == cfg.doc.end()) return nullptr;
    if (!it->is_object())
        throw ConfigError(std::string("config section '") + name + "' must be an object");
    return &*it;
}

const json& require_section(const PipelineConfig& cfg, const char* name) {
    const json* sec = find_section(cfg, name);
    if (!sec) throw ConfigError(std::string("missing config section '") + name + "'");
    return *sec;
}

[[noreturn]] void bad_field(const std::string& key, const char* expected) {
    throw ConfigError("config field '" + key + "' must be " + expected);
}

double get_num(const json& sec, const std::string& key, double def) {
    const auto it = sec.find(key);
    if (it == sec.end()) return def;
    if (!it->is_number()) bad_field(key, "a number");
    return it->get<double>();
}

double require_num(const json& sec, const std::string& key) {
    const auto it = sec.find(key);
    if (it == sec.end()) throw ConfigError("missing config field '" + key + "'");
    if (!it->is_number()) bad_field(key, "a number");
    return it->get<double>();
}

int get_int(const json& sec, const std::string& key, int def) {
    const auto it = sec.find(key);
    if (it == sec.end()) return def;
    if (!it->is_number_integer()) bad_field(key, "an integer");
    return it->get<int>();
}

bool get_bool(const json& sec, const std::string& key, bool def) {
    const auto it = sec.find(key);
    if (it == sec.end()) return def;
    if (!it->is_boolean()) bad_field(key, "a boolean");
    return it->get<bool>();
}

std::string get_str(const json& sec, const std::string& key, const std::string& def) {
    const auto it = sec.find(key);
    if (it == sec.end()) return def;
    if (!it->is_string()) bad_field(key, "a string");
    return it->get<std::string>();
}

std::string require_str(const json& sec, const std::string& key) {
    const auto it = sec.find(key);
    if (it == sec.end()) throw ConfigError("missing config field '" + key + "'");
    if (!it->is_string()) bad_field(key, "a string");
    return it->get<std::string>();
}

Vec3 get_vec3(const json& sec, const std::string& key, const Vec3& def) {
    const auto it = sec.find(key);
    if (it == sec.end()) return def;
    if (!it->is_array() || it->size() != 3) bad_field(key, "an array of 3 numbers");
    Vec3 v;
    double* comps[3] = {&v.x, &v.y, &v.z};
    for (int i = 0; i < 3; ++i) {
        const auto& e = (*it)[static_cast<std::size_t>(i)];
        if (!e.is_number()) bad_field(key, "an array of 3 numbers");
        *comps[i] = e.get<double>();
    }
    return v;
}

Mat3 get_mat3(const json& sec, const std::string& key, const Mat3& def) {
    const auto it = sec.find(key);
    if (it == sec.end()) return def;
    if (!it->is_array() || it->size() != 3) bad_field(key, "a 3x3 array of numbers");
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
        const auto& row = (*it)[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != 3) bad_field(key, "a 3x3 array of numbers");
        for (int c = 0; c < 3; ++c) {
            const auto& e = row[static_cast<std::size_t>(c)];
            if (!e.is_number()) bad_field(key, "a 3x3 array of numbers");
            m(r, c) = e.get<double>();
        }
    }
    return m;
}

std::filesystem::path resolve(const PipelineConfig& cfg, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : cfg.base_dir / path;
}

std::filesystem::path output_dir(const PipelineConfig& cfg, const CommandOptions& opts) {
    if (opts.out_dir) return *opts.out_dir;
    return resolve(cfg, get_str(cfg.doc, "output_dir", "out"));
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

const char* freq_stem(FrequencyTag tag) { return tag == FrequencyTag::High ? "high" : "low"; }

std::filesystem::path manifest_path(const PipelineConfig& cfg, const CommandOptions& opts,
                                    FrequencyTag tag) {
    const char* key = tag == FrequencyTag::High ? "high_manifest" : "low_manifest";
    if (const json* stacks = find_section(cfg, "stacks")) {
        const std::string given = get_str(*stacks, key, "");
        if (!given.empty()) return resolve(cfg, given);
    }
    return output_dir(cfg, opts) / (std::string("manifest_") + freq_stem(tag) + ".json");
}

WrapOptions wrap_options_from_config(const PipelineConfig& cfg) {
    WrapOptions opts;
    if (const json* sec = find_section(cfg, "wrap")) {
        opts.modulation_floor_fraction =
            get_num(*sec, "modulation_floor_fraction", opts.modulation_floor_fraction);
        opts.numeric_floor = get_num(*sec, "numeric_floor", opts.numeric_floor);
    }
    return opts;
}

void write_run_meta(const std::filesystem::path& out, const char* command,
                    const PipelineConfig& cfg, std::optional<std::uint64_t> seed) {
    json meta;
    meta["command"] = command;
    meta["config_hash"] = cfg.hash;
    meta["threads"] = worker_count();
    if (seed) meta["seed"] = *seed;
    char stamp[32] = {};
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    meta["created_utc"] = stamp;
    write_text_file(out / "run_meta.json", meta.dump(2) + "\n");
}

std::string fixed_decimals(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

ScalarMap order_as_map(const IndexMap& order) {
    ScalarMap map(order.width, order.height);
    for (std::size_t i = 0; i < order.values.size(); ++i) {
        map.values[i] = static_cast<double>(order.values[i]);
        map.mask[i] = order.mask[i];
    }
    return map;
}

// ---- unwrap plumbing shared by unwrap/calibrate/reconstruct ------------

struct UnwrapInputs {
    std::filesystem::path high_manifest;
    std::filesystem::path low_manifest;
};

struct UnwrapProducts {
    WrappedPhaseMap high;
    WrappedPhaseMap low;
    ScalarMap eq;
    AbsolutePhaseMap abs;
};

double manifest_wavelength(const PipelineConfig& cfg, const char* override_key,
                           const FringeStack& stack, const std::filesystem::path& origin) {
    if (const json* sec = find_section(cfg, "unwrap")) {
        const double given = get_num(*sec, override_key, 0.0);
        if (given > 0.0) return given;
    }
    if (stack.wavelength && *stack.wavelength > 0.0) return *stack.wavelength;
    throw ConfigError("no fringe wavelength available for " + origin.string() +
                      "; set unwrap." + override_key);
}

UnwrapProducts run_unwrap(const PipelineConfig& cfg, const UnwrapInputs& in) {
    const WrapOptions wopts = wrap_options_from_config(cfg);
    const FringeStack high = load_stack(in.high_manifest);
    const FringeStack low = load_stack(in.low_manifest);
    const double lambda_h = manifest_wavelength(cfg, "wavelength_high", high, in.high_manifest);
    const double lambda_l = manifest_wavelength(cfg, "wavelength_low", low, in.low_manifest);

    UnwrapProducts p;
    p.high = wrapped_phase(high, wopts);
    p.low = wrapped_phase(low, wopts);
    p.eq = equivalent_phase(p.high.phase, p.low.phase);
    p.abs = unwrap_two_frequency(p.high.phase, p.low.phase, lambda_h, lambda_l);
    return p;
}

void write_unwrap_products(const std::filesystem::path& out, const UnwrapProducts& p) {
    write_pfm(out / "wrapped_high.pfm", p.high.phase);
    write_pfm(out / "wrapped_low.pfm", p.low.phase);
    write_pfm(out / "eq_phase.pfm", p.eq);
    write_pfm(out / "abs_phase.pfm", p.abs.phase);
    write_pfm(out / "fringe_order.pfm", order_as_map(p.abs.fringe_order));
    IndexMap quality(p.abs.phase.width, p.abs.phase.height);
    for (std::size_t i = 0; i < quality.values.size(); ++i) {
        quality.values[i] = p.abs.quality[i];
        quality.mask[i] = p.abs.phase.mask[i];
    }
    write_pgm16_raw(out / "quality.pgm", quality);
}

}  // namespace

// ---- config loading -----------------------------------------------------

PipelineConfig load_config(const std::filesystem::path& path) {
    PipelineConfig cfg;
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    try {
        cfg.doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
    }
    if (!cfg.doc.is_object())
        throw ConfigError("config root must be a JSON object: " + path.string());
    const std::string format = get_str(cfg.doc, "format", "");
    if (format != "fringeforge-config/1")
        throw ConfigError("unrecognized config schema '" + format +
                          "' (expected fringeforge-config/1)");
    cfg.base_dir = std::filesystem::absolute(path).parent_path();
    cfg.hash = fnv1a_hex(cfg.doc.dump());
    return cfg;
}

CylindricalProjector projector_from_config(const PipelineConfig& cfg) {
    CylindricalProjector p;
    if (const json* sec = find_section(cfg, "projector")) {
        p.theta_h_deg = get_num(*sec, "theta_high_deg", p.theta_h_deg);
        p.theta_l_deg = get_num(*sec, "theta_low_deg", p.theta_l_deg);
        p.cylinder_radius_mm = get_num(*sec, "cylinder_radius_mm", p.cylinder_radius_mm);
        p.axis_origin = get_vec3(*sec, "axis_origin_mm", Vec3{-150, 0, 0});
        p.axis_dir = get_vec3(*sec, "axis_dir", p.axis_dir);
        p.azimuth_ref = get_vec3(*sec, "azimuth_ref", p.azimuth_ref);
        p.rotation_offset_deg = get_num(*sec, "rotation_offset_deg", p.rotation_offset_deg);
        p.stage_resolution_deg = get_num(*sec, "stage_resolution_deg", p.stage_resolution_deg);
    } else {
        p.axis_origin = Vec3{-150, 0, 0};
    }
    try {
        p.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("projector config: ") + e.what());
    }
    return p;
}

CameraModel camera_from_config(const PipelineConfig& cfg) {
    CameraModel cam;
    cam.width = 1000;
    cam.height = 800;
    cam.fx = cam.fy = 1400.0;
    if (const json* sec = find_section(cfg, "camera")) {
        cam.width = get_int(*sec, "width_px", cam.width);
        cam.height = get_int(*sec, "height_px", cam.height);
        cam.fx = get_num(*sec, "fx_px", cam.fx);
        cam.fy = get_num(*sec, "fy_px", cam.fy);
        cam.cx = get_num(*sec, "cx_px", (cam.width - 1) / 2.0);
        cam.cy = get_num(*sec, "cy_px", (cam.height - 1) / 2.0);
        cam.rotation = get_mat3(*sec, "rotation", Mat3::identity());
        cam.translation = get_vec3(*sec, "translation_mm", Vec3{0, 0, 0});
    } else {
        cam.cx = (cam.width - 1) / 2.0;
        cam.cy = (cam.height - 1) / 2.0;
        cam.rotation = Mat3::identity();
    }
    try {
        cam.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("camera config: ") + e.what());
    }
    return cam;
}

SceneSurface scene_from_config(const PipelineConfig& cfg) {
    SceneSurface scene = SceneSurface::plane(Vec3{0, 0, 600}, Vec3{0, 0, 1});
    if (const json* sec = find_section(cfg, "scene")) {
        const std::string kind = get_str(*sec, "kind", "plane");
        if (kind == "plane") {
            const json empty = json::object();
            const json& pl = sec->contains("plane") ? sec->at("plane") : empty;
            const Vec3 normal = normalized(get_vec3(pl, "normal", Vec3{0, 0, 1}));
            const double offset = get_num(pl, "offset_mm", 600.0);
            scene = SceneSurface::plane(normal * offset, normal);
        } else if (kind == "sphere") {
            const json empty = json::object();
            const json& sp = sec->contains("sphere") ? sec->at("sphere") : empty;
            scene = SceneSurface::sphere(get_vec3(sp, "center_mm", Vec3{0, 0, 640}),
                                         get_num(sp, "radius_mm", 40.0));
        } else if (kind == "heightmap") {
            if (!sec->contains("heightmap"))
                throw ConfigError("scene kind 'heightmap' needs a 'heightmap' object");
            const json& hm = sec->at("heightmap");
            HeightGrid grid;
            grid.x0 = require_num(hm, "origin_x_mm");
            grid.y0 = require_num(hm, "origin_y_mm");
            grid.spacing = require_num(hm, "spacing_mm");
            // grid heights come from a float image file; every sample must be set
            const ScalarMap z = read_pfm(resolve(cfg, require_str(hm, "z_file")));
            grid.cols = z.width;
            grid.rows = z.height;
            grid.z = z.values;
            for (const auto m : z.mask)
                if (!m) throw ConfigError("heightmap z_file must have no masked pixels");
            scene = SceneSurface::height_grid(std::move(grid));
        } else {
            throw ConfigError("unknown scene kind '" + kind + "'");
        }
        scene.reflectance = get_num(*sec, "reflectance", scene.reflectance);
        scene.ambient = get_num(*sec, "ambient", scene.ambient);
    }
    try {
        scene.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("scene config: ") + e.what());
    }
    return scene;
}

RenderConfig render_from_config(const PipelineConfig& cfg) {
    RenderConfig rc;
    if (const json* sec = find_section(cfg, "render")) {
        rc.steps = get_int(*sec, "steps", rc.steps);
        const std::string fidelity = get_str(*sec, "fidelity", "ideal");
        if (fidelity == "ideal")
            rc.fidelity = RenderConfig::Fidelity::IdealSinusoid;
        else if (fidelity == "slot")
            rc.fidelity = RenderConfig::Fidelity::SlotTransmission;
        else
            throw ConfigError("render.fidelity must be 'ideal' or 'slot'");
        rc.blur_sigma_deg = get_num(*sec, "blur_sigma_deg", rc.blur_sigma_deg);
        rc.noise_sigma = get_num(*sec, "noise_sigma", rc.noise_sigma);
        rc.quantize_stage = get_bool(*sec, "quantize_stage", rc.quantize_stage);
        rc.seed = static_cast<std::uint64_t>(get_num(*sec, "seed", 0.0));
    }
    try {
        rc.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("render config: ") + e.what());
    }
    return rc;
}

// ---- subcommands ----------------------------------------------------------

void cmd_simulate(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const CylindricalProjector projector = projector_from_config(cfg);
    const CameraModel camera = camera_from_config(cfg);
    const SceneSurface scene = scene_from_config(cfg);
    RenderConfig render = render_from_config(cfg);
    if (opts.seed) render.seed = *opts.seed;
    ensure_dir(out);

    for (const FrequencyTag tag : {FrequencyTag::High, FrequencyTag::Low}) {
        const RenderOutput result = render_fringe_stack(projector, camera, scene, tag, render);
        const std::string stem = freq_stem(tag);

        StackManifest manifest;
        manifest.frequency = tag;
        manifest.shifts = result.stack.shifts;
        manifest.wavelength = result.stack.wavelength.value_or(0.0);
        manifest.intensity_lo = 0.0;
        manifest.intensity_hi = 1.0;
        manifest.seed = render.seed;
        manifest.config_hash = cfg.hash;
        for (std::size_t k = 0; k < result.stack.frames.size(); ++k) {
            char name[64];
            std::snprintf(name, sizeof(name), "stack_%s/frame_%02zu.pgm", stem.c_str(), k);
            write_pgm16(out / name, result.stack.frames[k], manifest.intensity_lo,
                        manifest.intensity_hi);
            manifest.frame_files.emplace_back(name);
        }
        save_manifest(out / ("manifest_" + stem + ".json"), manifest);

        if (tag == FrequencyTag::High) {
            write_pfm(out / "gt_phase.pfm", result.true_phase);
            write_pfm(out / "gt_depth.pfm", result.depth);
        }
    }
    write_run_meta(out, "simulate", cfg, render.seed);
}

void cmd_wrap(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const FrequencyTag tag = opts.frequency.value_or(FrequencyTag::High);
    const FringeStack stack = load_stack(manifest_path(cfg, opts, tag));
    const WrappedPhaseMap wrapped = wrapped_phase(stack, wrap_options_from_config(cfg));
    ensure_dir(out);
    const std::string stem = freq_stem(tag);
    write_pfm(out / ("wrapped_" + stem + ".pfm"), wrapped.phase);
    write_pfm(out / ("modulation_" + stem + ".pfm"), wrapped.modulation);
    write_pfm(out / ("average_" + stem + ".pfm"), wrapped.average);
    write_run_meta(out, "wrap", cfg, std::nullopt);
}

void cmd_unwrap(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const UnwrapInputs in{manifest_path(cfg, opts, FrequencyTag::High),
                          manifest_path(cfg, opts, FrequencyTag::Low)};
    const UnwrapProducts products = run_unwrap(cfg, in);
    ensure_dir(out);
    write_unwrap_products(out, products);
    write_run_meta(out, "unwrap", cfg, std::nullopt);
}

namespace {

std::filesystem::path calibration_file_path(const PipelineConfig& cfg,
                                            const CommandOptions& opts) {
    if (const json* sec = find_section(cfg, "calibration")) {
        const std::string given = get_str(*sec, "calibration_file", "");
        if (!given.empty()) return resolve(cfg, given);
    }
    return output_dir(cfg, opts) / "calibration.ffc";
}

// Reference coordinates of a pose: either explicit X/Y/Z float images, or a
// depth image backprojected through the camera (the simulator's ground-truth
// depth is in camera-frame z, so backprojection reproduces the world points
// the renderer actually hit).
void pose_reference(const PipelineConfig& cfg, const json& entry, const CameraModel& camera,
                    CalibPose* pose) {
    if (entry.contains("reference_xyz_maps")) {
        const auto& arr = entry.at("reference_xyz_maps");
        if (!arr.is_array() || arr.size() != 3)
            bad_field("reference_xyz_maps", "an array of 3 file paths");
        pose->x = read_pfm(resolve(cfg, arr[0].get<std::string>()));
        pose->y = read_pfm(resolve(cfg, arr[1].get<std::string>()));
        pose->z = read_pfm(resolve(cfg, arr[2].get<std::string>()));
        return;
    }
    const std::string depth_file = get_str(entry, "reference_depth_map", "");
    if (depth_file.empty())
        throw ConfigError("calibration pose '" + pose->id +
                          "' needs reference_depth_map or reference_xyz_maps");
    const ScalarMap depth = read_pfm(resolve(cfg, depth_file));
    pose->x = ScalarMap(depth.width, depth.height);
    pose->y = ScalarMap(depth.width, depth.height);
    pose->z = ScalarMap(depth.width, depth.height);
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const std::size_t i = depth.index(u, v);
            if (!depth.mask[i]) continue;
            const Vec3 p = camera.backproject(u, v, depth.values[i]);
            pose->x.values[i] = p.x;
            pose->y.values[i] = p.y;
            pose->z.values[i] = p.z;
            pose->x.mask[i] = pose->y.mask[i] = pose->z.mask[i] = 1;
        }
    }
}

// Optional denoising pre-step for external references: replace the points by
// their projection onto the least-squares plane along each camera ray.
void flatten_reference(const CameraModel& camera, CalibPose* pose) {
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < pose->z.values.size(); ++i)
        if (pose->x.mask[i] && pose->y.mask[i] && pose->z.mask[i])
            pts.push_back(Vec3{pose->x.values[i], pose->y.values[i], pose->z.values[i]});
    const Plane plane = fit_plane(pts);
    const Vec3 center = camera.camera_center();
    const double center_term = plane.offset - dot(plane.normal, center);
    for (int v = 0; v < pose->z.height; ++v) {
        for (int u = 0; u < pose->z.width; ++u) {
            const std::size_t i = pose->z.index(u, v);
            if (!(pose->x.mask[i] && pose->y.mask[i] && pose->z.mask[i])) continue;
            const Vec3 dir = camera.ray_direction(u, v);
            const double denom = dot(plane.normal, dir);
            if (std::fabs(denom) < 1e-12) {
                pose->x.mask[i] = pose->y.mask[i] = pose->z.mask[i] = 0;
                continue;
            }
            const Vec3 p = center + dir * (center_term / denom);
            pose->x.values[i] = p.x;
            pose->y.values[i] = p.y;
            pose->z.values[i] = p.z;
        }
    }
}

}  // namespace

void cmd_calibrate(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const json& sec = require_section(cfg, "calibration");

    CalibOptions copts;
    if (sec.contains("working_range_mm")) {
        const auto& range = sec.at("working_range_mm");
        if (!range.is_array() || range.size() != 2 || !range[0].is_number() ||
            !range[1].is_number())
            bad_field("working_range_mm", "an array [min, max] in millimeters");
        copts.working_range_min_mm = range[0].get<double>();
        copts.working_range_max_mm = range[1].get<double>();
    }
    copts.min_poses = get_int(sec, "min_poses", copts.min_poses);
    const bool flatten = get_bool(sec, "fit_reference_plane", false);

    const auto it = sec.find("poses");
    if (it == sec.end() || !it->is_array() || it->empty())
        throw ConfigError("calibration.poses must be a non-empty array");

    const CameraModel camera = camera_from_config(cfg);
    std::vector<CalibPose> poses;
    int index = 0;
    for (const auto& entry : *it) {
        if (!entry.is_object()) bad_field("calibration.poses", "an array of objects");
        CalibPose pose;
        pose.id = get_str(entry, "id", "pose" + std::to_string(index));
        const UnwrapInputs in{resolve(cfg, require_str(entry, "high_manifest")),
                              resolve(cfg, require_str(entry, "low_manifest"))};
        UnwrapProducts products = run_unwrap(cfg, in);
        pose.phase = std::move(products.abs.phase);
        pose_reference(cfg, entry, camera, &pose);
        if (!pose.phase.same_shape(pose.z))
            throw DimensionMismatch("pose '" + pose.id +
                                    "': phase and reference dimensions differ");
        if (flatten) flatten_reference(camera, &pose);
        poses.push_back(std::move(pose));
        ++index;
    }

    const CalibResult result = fit_calibration(poses, copts);
    ensure_dir(out);
    save_calibration(calibration_file_path(cfg, opts).string(), result.calibration);

    json report;
    report["format"] = "fringeforge-calib-report/1";
    report["pose_ids"] = result.report.pose_ids;
    report["rmse_x_mm"] = result.report.rmse_x;
    report["rmse_y_mm"] = result.report.rmse_y;
    report["rmse_z_mm"] = result.report.rmse_z;
    report["pose_pixel_count"] = result.report.pose_pixel_count;
    report["sigma_cal_mm"] = result.report.sigma_cal_mm;
    report["s_eff_mm_per_rad"] = result.report.s_eff_mm_per_rad;
    report["valid_pixels"] = result.report.valid_pixels;
    report["poses"] = result.report.poses;
    write_text_file(out / "calib_report.json", report.dump(2) + "\n");
    write_run_meta(out, "calibrate", cfg, std::nullopt);
}

void cmd_reconstruct(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const PolyCalibration calib = load_calibration(calibration_file_path(cfg, opts).string());
    const UnwrapInputs in{manifest_path(cfg, opts, FrequencyTag::High),
                          manifest_path(cfg, opts, FrequencyTag::Low)};
    const UnwrapProducts products = run_unwrap(cfg, in);
    if (calib.width != products.abs.phase.width || calib.height != products.abs.phase.height)
        throw DimensionMismatch("calibration is " + std::to_string(calib.width) + "x" +
                                std::to_string(calib.height) + " but the stacks are " +
                                std::to_string(products.abs.phase.width) + "x" +
                                std::to_string(products.abs.phase.height));

    const EvaluatedPoints eval = evaluate_points(calib, products.abs.phase);
    ensure_dir(out);
    write_unwrap_products(out, products);
    write_pfm(out / "x.pfm", eval.x);
    write_pfm(out / "y.pfm", eval.y);
    write_pfm(out / "z.pfm", eval.z);

    // Per-point quality byte: unwrap code (0 ok, 1/2 clamped order) plus 4
    // when the phase fell outside the pixel's calibrated domain.
    std::vector<CloudPoint> cloud;
    IndexMap quality(eval.z.width, eval.z.height);
    for (int v = 0; v < eval.z.height; ++v) {
        for (int u = 0; u < eval.z.width; ++u) {
            const std::size_t i = eval.z.index(u, v);
            if (!products.abs.phase.mask[i]) continue;
            const std::uint8_t q = static_cast<std::uint8_t>(
                products.abs.quality[i] + (eval.out_of_domain[i] ? 4 : 0));
            quality.values[i] = q;
            quality.mask[i] = 1;
            if (eval.z.mask[i])
                cloud.push_back(CloudPoint{{eval.x.values[i], eval.y.values[i], eval.z.values[i]}, q});
        }
    }
    write_pgm16_raw(out / "quality.pgm", quality);
    write_ply(out / "cloud.ply", cloud);
    write_run_meta(out, "reconstruct", cfg, std::nullopt);
}

namespace {

struct FitInput {
    std::vector<Vec3> points;
    bool grid = false;
    ScalarMap x, y, z;  // set in grid mode
};

FitInput fit_input(const PipelineConfig& cfg, const CommandOptions& opts, const json& sec) {
    FitInput in;
    if (sec.contains("input_cloud")) {
        const auto cloud = read_ply(resolve(cfg, require_str(sec, "input_cloud")));
        in.points.reserve(cloud.size());
        for (const auto& p : cloud) in.points.push_back(p.position);
        return in;
    }
    std::filesystem::path files[3];
    if (sec.contains("input_xyz_maps")) {
        const auto& arr = sec.at("input_xyz_maps");
        if (!arr.is_array() || arr.size() != 3)
            bad_field("input_xyz_maps", "an array of 3 file paths");
        for (int i = 0; i < 3; ++i) files[i] = resolve(cfg, arr[static_cast<std::size_t>(i)].get<std::string>());
    } else {
        const auto out = output_dir(cfg, opts);
        files[0] = out / "x.pfm";
        files[1] = out / "y.pfm";
        files[2] = out / "z.pfm";
    }
    in.grid = true;
    in.x = read_pfm(files[0]);
    in.y = read_pfm(files[1]);
    in.z = read_pfm(files[2]);
    if (!in.x.same_shape(in.y) || !in.x.same_shape(in.z))
        throw DimensionMismatch("x/y/z maps differ in size");
    for (std::size_t i = 0; i < in.z.values.size(); ++i)
        if (in.x.mask[i] && in.y.mask[i] && in.z.mask[i])
            in.points.push_back(Vec3{in.x.values[i], in.y.values[i], in.z.values[i]});
    return in;
}

json stats_json(const ErrorStats& stats) {
    json j;
    j["rmse_mm"] = stats.rmse;
    j["mean_mm"] = stats.mean;
    j["std_sample_mm"] = stats.std_sample;
    j["std_population_mm"] = stats.std_population;
    j["count"] = stats.count;
    return j;
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"bin_center_mm", "count"});
    const std::size_t bins = hist.counts.size();
    const double width = (hist.hi - hist.lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const double center = hist.lo + (static_cast<double>(b) + 0.5) * width;
        rows.push_back({fixed_decimals(center, 6), std::to_string(hist.counts[b])});
    }
    write_csv(path, rows);
}

void write_profile_csv(const std::filesystem::path& path, const ScalarMap& error) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"column", "count", "rmse_mm"});
    for (int u = 0; u < error.width; ++u) {
        double ss = 0.0;
        std::int64_t n = 0;
        for (int v = 0; v < error.height; ++v) {
            const std::size_t i = error.index(u, v);
            if (!error.mask[i]) continue;
            ss += error.values[i] * error.values[i];
            ++n;
        }
        const std::string rmse =
            n > 0 ? fixed_decimals(std::sqrt(ss / static_cast<double>(n)), 6) : "";
        rows.push_back({std::to_string(u), std::to_string(n), rmse});
    }
    write_csv(path, rows);
}

}  // namespace

void cmd_fit(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const json& sec = require_section(cfg, "fitting");
    const FitInput in = fit_input(cfg, opts, sec);

    HistogramOptions hopts;
    hopts.bins = get_int(sec, "histogram_bins", hopts.bins);
    hopts.half_range_mm = get_num(sec, "histogram_half_range_mm", hopts.half_range_mm);

    json result;
    result["format"] = "fringeforge-fit/1";
    result["points"] = in.points.size();

    const std::string shape = get_str(sec, "shape", "plane");
    SurfaceErrorMap surface;
    std::vector<double> residuals;
    if (shape == "plane") {
        const Plane plane = fit_plane(in.points);
        result["shape"] = "plane";
        result["normal"] = {plane.normal.x, plane.normal.y, plane.normal.z};
        result["offset_mm"] = plane.offset;
        if (in.grid) {
            surface = error_map(in.x, in.y, in.z, plane, hopts);
        } else {
            for (const auto& p : in.points) residuals.push_back(plane.signed_distance(p));
        }
    } else if (shape == "sphere" || shape == "sphere_free") {
        Sphere sphere;
        if (shape == "sphere") {
            sphere.radius = require_num(sec, "sphere_radius_mm");
            sphere.center = fit_sphere_center(in.points, sphere.radius);
        } else {
            sphere = fit_sphere_free(in.points);
        }
        result["shape"] = shape;
        result["center_mm"] = {sphere.center.x, sphere.center.y, sphere.center.z};
        result["radius_mm"] = sphere.radius;
        if (in.grid) {
            surface = error_map(in.x, in.y, in.z, sphere, hopts);
        } else {
            for (const auto& p : in.points) residuals.push_back(sphere.signed_distance(p));
        }
    } else {
        throw ConfigError("fitting.shape must be 'plane', 'sphere' or 'sphere_free'");
    }

    ensure_dir(out);
    if (in.grid) {
        result["stats"] = stats_json(surface.stats);
        write_pfm(out / "error_map.pfm", surface.error);
        write_histogram_csv(out / "histogram.csv", surface.stats.histogram);
        write_profile_csv(out / "rmse_profile.csv", surface.error);
        if (get_bool(sec, "regional", true)) {
            const RegionalRmse regional =
                regional_rmse(surface.error, ImageAxis::U,
                              get_num(sec, "regional_central_fraction", 0.2),
                              get_num(sec, "regional_edge_fraction", 0.2));
            result["regional"] = {{"central_rmse_mm", regional.central},
                                  {"outer_rmse_mm", regional.outer}};
        }
    } else {
        const ErrorStats stats = error_stats(residuals, hopts);
        result["stats"] = stats_json(stats);
        write_histogram_csv(out / "histogram.csv", stats.histogram);
    }
    write_text_file(out / "fit.json", result.dump(2) + "\n");
    write_run_meta(out, "fit", cfg, std::nullopt);
}

void cmd_uncertainty(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const json& sec = require_section(cfg, "uncertainty");
    const double coverage = get_num(sec, "coverage_factor", 2.0);
    const int dp = get_int(sec, "component_rounding_dp", 3);
    if (dp < 0) throw ConfigError("component_rounding_dp must be >= 0");

    const auto it = sec.find("components");
    if (it == sec.end() || !it->is_array() || it->empty())
        throw ConfigError("uncertainty.components must be a non-empty array");

    std::vector<UncertaintyComponent> components;
    json comp_json = json::array();
    for (const auto& entry : *it) {
        if (!entry.is_object()) bad_field("uncertainty.components", "an array of objects");
        const std::string kind = require_str(entry, "kind");
        const std::string name = get_str(entry, "name", kind);
        UncertaintyComponent comp;
        json extra = json::object();
        if (kind == "type_a_series") {
            const auto& values = entry.at("values_mm");
            if (!values.is_array() || values.empty()) bad_field("values_mm", "a non-empty array");
            MeasurementSeries series{name, values.get<std::vector<double>>()};
            comp = type_a_uncertainty(series);
        } else if (kind == "type_a_std") {
            comp = type_a_from_std(name, require_num(entry, "std_dev_mm"),
                                   get_int(entry, "count", 0));
        } else if (kind == "type_b_uniform") {
            comp = type_b_uniform(name, require_num(entry, "half_width_mm"));
        } else if (kind == "stage") {
            const StageUncertainty stage = stage_uncertainty(
                require_num(entry, "s_eff_mm_per_rad"), require_num(entry, "theta_high_deg"),
                require_num(entry, "stage_resolution_deg"));
            comp.name = name;
            comp.type = UncertaintyType::B;
            comp.u = stage.u_stage;
            extra["dz_eff_mm"] = round_reported(stage.dz_eff, dp);
        } else if (kind == "direct") {
            comp.name = name;
            comp.type = UncertaintyType::A;
            comp.u = require_num(entry, "u_mm");
        } else {
            throw ConfigError("unknown uncertainty component kind '" + kind + "'");
        }
        comp.name = name;
        comp.symbol = get_str(entry, "symbol", comp.symbol);
        comp.note = get_str(entry, "note", comp.note);
        const std::string type_override = get_str(entry, "type", "");
        if (type_override == "A")
            comp.type = UncertaintyType::A;
        else if (type_override == "B")
            comp.type = UncertaintyType::B;
        else if (!type_override.empty())
            bad_field("type", "\"A\" or \"B\"");

        // Component values are rounded to reporting precision before the
        // root-sum-of-squares so the emitted table is self-consistent.
        comp.u = round_reported(comp.u, dp);
        json cj;
        cj["name"] = comp.name;
        cj["symbol"] = comp.symbol;
        cj["type"] = to_string(comp.type);
        cj["u_mm"] = comp.u;
        if (!comp.note.empty()) cj["note"] = comp.note;
        cj.update(extra);
        comp_json.push_back(cj);
        components.push_back(std::move(comp));
    }

    const UncertaintyBudget budget = combine_budget(components, coverage);
    json doc;
    doc["format"] = "fringeforge-budget/1";
    doc["coverage_factor"] = coverage;
    doc["component_rounding_dp"] = dp;
    doc["components"] = comp_json;
    doc["u_c_mm"] = round_reported(budget.combined, dp);
    doc["expanded_u_mm"] = round_reported(budget.expanded, dp);
    doc["u_c_full_mm"] = budget.combined;
    doc["expanded_u_full_mm"] = budget.expanded;

    ensure_dir(out);
    write_text_file(out / "budget.json", doc.dump(2) + "\n");

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"name", "symbol", "type", "u_mm"});
    for (const auto& comp : components)
        rows.push_back({comp.name, comp.symbol, to_string(comp.type),
                        fixed_decimals(comp.u, dp)});
    rows.push_back({"combined standard uncertainty", "u_c", "",
                    fixed_decimals(round_reported(budget.combined, dp), dp)});
    rows.push_back({"expanded uncertainty", "U", "",
                    fixed_decimals(round_reported(budget.expanded, dp), dp)});
    write_csv(out / "budget.csv", rows);
    write_run_meta(out, "uncertainty", cfg, std::nullopt);
}

namespace {

double stats_field(const json& doc, const std::string& field, const std::filesystem::path& file) {
    const json* node = &doc;
    if (!node->contains(field) && node->contains("stats")) node = &node->at("stats");
    if (!node->contains(field) || !node->at(field).is_number())
        throw ConfigError("stats file " + file.string() + " has no numeric field '" + field + "'");
    return node->at(field).get<double>();
}

}  // namespace

void cmd_report(const PipelineConfig& cfg, const CommandOptions& opts) {
    const auto out = output_dir(cfg, opts);
    const json& sec = require_section(cfg, "report");
    const int dp = get_int(sec, "rounding_dp", 3);

    const auto it = sec.find("series");
    if (it == sec.end() || !it->is_array() || it->empty())
        throw ConfigError("report.series must be a non-empty array");

    struct SeriesEntry {
        std::string name;
        std::vector<double> values;
        SeriesSummary summary;
    };
    std::vector<SeriesEntry> series;
    for (const auto& entry : *it) {
        if (!entry.is_object()) bad_field("report.series", "an array of objects");
        SeriesEntry se;
        se.name = require_str(entry, "name");
        if (entry.contains("values_mm")) {
            const auto& values = entry.at("values_mm");
            if (!values.is_array() || values.empty()) bad_field("values_mm", "a non-empty array");
            se.values = values.get<std::vector<double>>();
        } else if (entry.contains("stats_files")) {
            const std::string field = get_str(entry, "field", "rmse_mm");
            for (const auto& f : entry.at("stats_files")) {
                const auto file = resolve(cfg, f.get<std::string>());
                json doc;
                try {
                    doc = json::parse(read_text_file(file));
                } catch (const json::exception& e) {
                    throw IoError("cannot parse stats file " + file.string() + ": " + e.what());
                }
                se.values.push_back(stats_field(doc, field, file));
            }
        } else {
            throw ConfigError("report series '" + se.name +
                              "' needs values_mm or stats_files");
        }
        se.summary = series_summary(MeasurementSeries{se.name, se.values});
        series.push_back(std::move(se));
    }

    json doc;
    doc["format"] = "fringeforge-report/1";
    json sj = json::array();
    for (const auto& se : series) {
        json j;
        j["name"] = se.name;
        j["values_mm"] = se.values;
        j["count"] = se.summary.count;
        j["mean_mm"] = se.summary.mean;
        j["std_dev_mm"] = se.summary.std_dev;
        j["min_mm"] = se.summary.min;
        j["max_mm"] = se.summary.max;
        sj.push_back(j);
    }
    doc["series"] = sj;
    const std::string budget_file = get_str(sec, "budget_file", "");
    if (!budget_file.empty()) {
        const auto file = resolve(cfg, budget_file);
        try {
            doc["budget"] = json::parse(read_text_file(file));
        } catch (const json::exception& e) {
            throw IoError("cannot parse budget file " + file.string() + ": " + e.what());
        }
    }

    ensure_dir(out);
    write_text_file(out / "report.json", doc.dump(2) + "\n");

    std::size_t longest = 0;
    for (const auto& se : series) longest = std::max(longest, se.values.size());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"pose"};
    for (const auto& se : series) header.push_back(se.name);
    rows.push_back(header);
    for (std::size_t r = 0; r < longest; ++r) {
        std::vector<std::string> row{std::to_string(r + 1)};
        for (const auto& se : series)
            row.push_back(r < se.values.size() ? fixed_decimals(se.values[r], dp) : "");
        rows.push_back(row);
    }
    std::vector<std::string> mean_row{"mean"};
    std::vector<std::string> std_row{"std"};
    for (const auto& se : series) {
        mean_row.push_back(fixed_decimals(round_reported(se.summary.mean, dp), dp));
        std_row.push_back(std::isnan(se.summary.std_dev)
                              ? ""
                              : fixed_decimals(round_reported(se.summary.std_dev, dp), dp));
    }
    rows.push_back(mean_row);
    rows.push_back(std_row);
    write_csv(out / "report.csv", rows);
    write_run_meta(out, "report", cfg, std::nullopt);
}

}  // namespace fringeforge
