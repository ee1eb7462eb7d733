#pragma once

#include <memory>
#include <string>
#include <vector>

#include "splatsim/engine.hpp"
#include "splatsim/gaussian_cloud.hpp"
#include "splatsim/kinematics.hpp"
#include "splatsim/scene_config.hpp"

namespace splatsim {

// Uniform similarity between input coordinates and simulation coordinates
// (the simulation region maps onto the edge-2 cube when normalizing).
struct NormalizeTransform {
    Vec3 center = Vec3::Zero();
    double scale = 1.0;

    Vec3 to_sim(const Vec3& p) const { return (p - center) * scale; }
    Vec3 to_input(const Vec3& p) const { return p / scale + center; }
    Box3 to_sim(const Box3& b) const { return {to_sim(b.min), to_sim(b.max)}; }
};

// Scene assembled up to (but excluding) time stepping: loaded, clamped,
// normalized, filled, materials assigned, velocities edited.
struct PreparedScene {
    GaussianCloud cloud; // simulation space; fill kernels appended at the end
    std::size_t original_count = 0;
    std::size_t fill_count = 0;
    NormalizeTransform transform;
    std::vector<Material> materials;
    std::vector<int> material_ids;
    EulerianGrid grid;
    SimConfig sim;
    std::vector<ParticleState> particles;
    KinematicsUpdater kinematics;
    double anisotropy_r = 1.0;
};

PreparedScene prepare_scene(const SceneConfig& cfg);

// Deformed kernels in input coordinates, ready for export or rendering.
// Factors are passed through untouched while no step has run, so frame 0
// reproduces the prepared input exactly; afterwards scale/rotation come from
// the eigendecomposition of the evolved world covariance.
GaussianCloud export_cloud(const PreparedScene& scene, const MpmEngine& engine,
                           bool any_steps_taken);

// Runs the full pipeline, writing per-frame splat files, optional renders
// and diagnostics.csv into cfg.output_dir.
void run_simulation(const SceneConfig& cfg);

// Per-field statistics between two exported frames (same kernel count/order).
struct FieldDiff {
    double max_abs = 0.0;
    double mean_abs = 0.0;
};
struct FrameDiff {
    std::size_t kernels = 0;
    FieldDiff position, scale, rotation, opacity, sh;

    std::string to_json() const;
};
FrameDiff diff_frames(const std::string& path_a, const std::string& path_b);
FrameDiff diff_frames(const GaussianCloud& a, const GaussianCloud& b);

} // namespace splatsim
