#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatsim/camera.hpp"
#include "splatsim/engine.hpp"
#include "splatsim/internal_fill.hpp"
#include "splatsim/materials.hpp"
#include "splatsim/types.hpp"

namespace splatsim {

// Axis-aligned region selector; "all" matches everything.
struct Region {
    bool all = false;
    Box3 box;

    bool contains(const Vec3& p) const { return all || box.contains(p); }
};

struct MaterialAssignment {
    Region region;
    std::string model_name; // scene-file material name
    Material material;
};

struct VelocityEdit {
    enum class Kind { Linear, Angular };
    Kind kind = Kind::Linear;
    Region region;
    Vec3 velocity = Vec3::Zero();      // Linear
    Vec3 axis = Vec3::UnitZ();         // Angular: unit axis
    Vec3 center = Vec3::Zero();        // Angular: point on the axis
    double omega = 0.0;                // Angular: rad/s
};

struct CameraConfig {
    Vec3 position = Vec3::Zero();
    Vec3 look_at = Vec3::Zero();
    Vec3 up = Vec3::UnitZ();
    double fov_y_deg = 60.0;
    int width = 512;
    int height = 512;
    double near = 0.01;

    Camera build() const {
        return Camera::look_at(position, look_at, up, fov_y_deg, width, height, near);
    }
};

struct RenderSettings {
    bool enabled = false;
    int every = 1; // render every n-th frame
    bool write_ppm = true;
    bool write_png = true;
    std::optional<CameraConfig> camera;
    std::string camera_path; // JSON-lines camera file, one camera per frame
};

struct FillSettings {
    bool enabled = false;
    FillConfig config;
};

struct SceneConfig {
    std::string input_ply;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    // Either a region normalized to the edge-2 cube, or an explicit domain.
    std::optional<Box3> sim_region; // defaults to the cloud bounds
    bool normalize = true;
    std::optional<Box3> domain;     // used when normalize is false

    int grid_resolution = 32; // cells across the domain's largest edge
    int margin_cells = 3;     // extra cells beyond the domain on each side

    double dt = 1e-4;
    double fps = 24.0;
    int frames = 1;
    double cfl = 0.5;
    Vec3 gravity = Vec3::Zero();
    BoundaryFaces boundary = {BoundaryType::Sticky, BoundaryType::Sticky, BoundaryType::Sticky,
                              BoundaryType::Sticky, BoundaryType::Sticky, BoundaryType::Sticky};
    bool rpic_damping = false;

    std::vector<MaterialAssignment> materials;
    std::vector<VelocityEdit> velocity_edits;
    FillSettings fill;
    std::string kinematics_mode = "auto"; // auto | total | incremental
    std::optional<double> anisotropy_r;   // clamp applied when present
    bool export_ply = true;
    RenderSettings render;
};

// Parses the JSON scene file. Throws ParseError for syntax/schema problems;
// semantic checks live in validate_scene_config.
SceneConfig load_scene_config(const std::string& path);

struct ValidationIssue {
    bool is_error = true;
    std::string path;    // config key path, e.g. "materials[0].E"
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const {
        for (const auto& i : issues)
            if (i.is_error) return false;
        return true;
    }
    std::string to_json() const;
};

// Full static validation without running: parameter ranges, file existence,
// region/cloud intersection, CFL advisory on declared initial speeds.
ValidationReport validate_scene_config(const SceneConfig& cfg);

} // namespace splatsim
