#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fringeforge/projector.hpp"

namespace fringeforge {

/// Parsed pipeline configuration. Relative paths inside the document resolve
/// against the directory containing the config file; products land in the
/// output directory (config `output_dir`, overridable on the command line).
struct PipelineConfig {
    nlohmann::json doc;
    std::filesystem::path base_dir;
    std::string hash;  // content hash of the canonical document
};

/// Loads and schema-checks a config file (`"format": "fringeforge-config/1"`).
PipelineConfig load_config(const std::filesystem::path& path);

// Section builders; defaults fill missing fields, malformed values raise
// ConfigError naming the offending field.
CylindricalProjector projector_from_config(const PipelineConfig& cfg);
CameraModel camera_from_config(const PipelineConfig& cfg);
SceneSurface scene_from_config(const PipelineConfig& cfg);
RenderConfig render_from_config(const PipelineConfig& cfg);

struct CommandOptions {
    std::optional<std::uint64_t> seed;               // overrides render.seed
    std::optional<std::filesystem::path> out_dir;    // overrides output_dir
    std::optional<FrequencyTag> frequency;           // wrap only
};

void cmd_simulate(const PipelineConfig& cfg, const CommandOptions& opts);
void cmd_wrap(const PipelineConfig& cfg, const CommandOptions& opts);
void cmd_unwrap(const PipelineConfig& cfg, const CommandOptions& opts);
void cmd_calibrate(const PipelineConfig& cfg, const CommandOptions& opts);
void cmd_reconstruct(const PipelineConfig& cfg, const CommandOptions& opts);
void cmd_fit(const PipelineConfig& cfg, const CommandOptions& opts);
void cmd_uncertainty(const PipelineConfig& cfg, const CommandOptions& opts);
void cmd_report(const PipelineConfig& cfg, const CommandOptions& opts);

}  // namespace fringeforge
