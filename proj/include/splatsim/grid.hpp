#pragma once

#include <array>
#include <vector>

#include "splatsim/types.hpp"

namespace splatsim {

// Dense background grid of mass/velocity nodes. dims counts nodes per axis;
// cells number dims - 1 per axis.
struct EulerianGrid {
    Vec3 origin = Vec3::Zero();
    double dx = 1.0;
    Vec3i dims = Vec3i::Zero();

    std::vector<double> mass;
    std::vector<Vec3> velocity;

    EulerianGrid() = default;
    EulerianGrid(const Vec3& origin_, double dx_, const Vec3i& node_dims);

    std::size_t node_count() const {
        return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
    }
    std::size_t node_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims.y() + j) * dims.z() + k;
    }
    Vec3 node_position(int i, int j, int k) const {
        return origin + dx * Vec3(i, j, k);
    }
    Box3 node_bounds() const {
        return Box3{origin, origin + dx * (dims - Vec3i::Ones()).cast<double>()};
    }

    void clear();
};

// Quadratic B-spline stencil of a particle: 3 nodes per axis starting at
// base. w holds the 1D weights, dw their derivatives (1/dx included).
struct BsplineStencil {
    Vec3i base;
    std::array<std::array<double, 3>, 3> w;
    std::array<std::array<double, 3>, 3> dw;
};

// Throws OutOfDomainError when xp is closer than 1.5 dx to the grid bounds.
BsplineStencil bspline_stencil(const Vec3& xp, const EulerianGrid& grid,
                               long particle_index = -1);

struct WeightedNode {
    Vec3i node;
    double weight;
    Vec3 weight_gradient;
};

// The 27 (node, weight, gradient) triples of the stencil. Weights are
// nonnegative and sum to 1; gradients sum to 0; sum_i w_i x_i = xp.
std::array<WeightedNode, 27> bspline_weights(const Vec3& xp, const EulerianGrid& grid,
                                             long particle_index = -1);

} // namespace splatsim
