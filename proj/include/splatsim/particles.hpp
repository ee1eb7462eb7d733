#pragma once

#include <vector>

#include "splatsim/gaussian_cloud.hpp"
#include "splatsim/grid.hpp"
#include "splatsim/materials.hpp"
#include "splatsim/types.hpp"

namespace splatsim {

struct ParticleState {
    Vec3 x = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    double mass = 0.0;
    double volume0 = 0.0;
    Mat3 F_E = Mat3::Identity();
    Mat3 C = Mat3::Zero();      // APIC affine momentum
    Mat3 grad_v = Mat3::Zero(); // cached velocity gradient from the last gather
    int material_id = 0;
};

// Seeds one particle per kernel. Per occupied grid cell, the represented
// volume is the cell volume divided by the number of kernels in that cell;
// mass follows from the material density. Velocities start at zero.
// Throws OutOfDomainError listing offending kernels outside the grid.
std::vector<ParticleState> initialize_particles(const GaussianCloud& cloud,
                                                const std::vector<int>& material_ids,
                                                const std::vector<Material>& materials,
                                                const EulerianGrid& grid);

} // namespace splatsim
