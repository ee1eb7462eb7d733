#pragma once

#include <array>
#include <functional>
#include <vector>

#include "splatsim/grid.hpp"
#include "splatsim/materials.hpp"
#include "splatsim/particles.hpp"
#include "splatsim/types.hpp"

namespace splatsim {

enum class BoundaryType { Sticky, Slip, None };

// Face order: x-, x+, y-, y+, z-, z+.
using BoundaryFaces = std::array<BoundaryType, 6>;

struct SimConfig {
    double dt = 1e-4;
    Vec3 gravity = Vec3::Zero();
    int bspline_degree = 2; // quadratic kernels only
    double cfl_limit = 0.5;
    BoundaryFaces boundary = {BoundaryType::Sticky, BoundaryType::Sticky, BoundaryType::Sticky,
                              BoundaryType::Sticky, BoundaryType::Sticky, BoundaryType::Sticky};
    int boundary_margin_cells = 2;
    int substeps_per_frame = 1;
    bool rpic_damping = false; // keep only the skew part of C
};

void validate_sim_config(const SimConfig& cfg);

// Explicit MPM stepper: scatter (P2G), grid momentum update, gather (G2P)
// with APIC transfers and per-step plastic return mapping. Parallel stages
// are bit-reproducible for a fixed worker count; a worker count of one is
// the single-threaded reference mode.
class MpmEngine {
public:
    MpmEngine(EulerianGrid grid, std::vector<ParticleState> particles,
              std::vector<Material> materials, SimConfig cfg);

    // Individual stages, exposed for testing. advance_step runs them in order.
    void p2g();
    void grid_update();
    void g2p();
    void advance_step();

    const EulerianGrid& grid() const { return grid_; }
    EulerianGrid& grid() { return grid_; }
    const std::vector<ParticleState>& particles() const { return particles_; }
    std::vector<ParticleState>& particles() { return particles_; }
    const std::vector<Material>& materials() const { return materials_; }
    const SimConfig& config() const { return cfg_; }

    long step_count() const { return step_; }
    double max_particle_speed() const { return max_speed_; }
    // dt * max|v| / dx; above cfl_limit means the CFL guideline is violated.
    double cfl_ratio() const;

    double total_mass() const;
    Vec3 total_particle_momentum() const;
    Vec3 total_grid_momentum() const;
    double kinetic_energy() const;
    double elastic_energy() const;

    // Invoked at the end of every advance_step (kernel kinematics hook).
    std::function<void(const MpmEngine&)> post_step_hook;

private:
    void apply_boundary_conditions();

    EulerianGrid grid_;
    std::vector<ParticleState> particles_;
    std::vector<Material> materials_;
    SimConfig cfg_;
    long step_ = 0;
    double max_speed_ = 0.0;
    bool cfl_warned_ = false;

    // Per-worker scatter buffers, reduced in worker order.
    struct ScatterBuffers {
        std::vector<std::vector<double>> mass;
        std::vector<std::vector<Vec3>> momentum;
        std::vector<std::vector<Vec3>> force;
    };
    ScatterBuffers scatter_;
    std::vector<Mat3> stress_v0_; // per-particle tau * V0 scratch
    void ensure_buffers(int workers);
};

} // namespace splatsim
