#include "splatsim/grid.hpp"

#include <cmath>
#include <sstream>

#include "splatsim/error.hpp"

namespace splatsim {

EulerianGrid::EulerianGrid(const Vec3& origin_, double dx_, const Vec3i& node_dims)
    : origin(origin_), dx(dx_), dims(node_dims) {
    if (!(dx > 0.0)) throw ParameterError("grid spacing must be positive");
    if (dims.minCoeff() < 4)
        throw ParameterError("grid needs at least 4 nodes per axis for quadratic kernels");
    mass.assign(node_count(), 0.0);
    velocity.assign(node_count(), Vec3::Zero());
}

void EulerianGrid::clear() {
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(velocity.begin(), velocity.end(), Vec3::Zero());
}

BsplineStencil bspline_stencil(const Vec3& xp, const EulerianGrid& grid, long particle_index) {
    BsplineStencil st;
    const double inv_dx = 1.0 / grid.dx;
    for (int a = 0; a < 3; ++a) {
        const double u = (xp[a] - grid.origin[a]) * inv_dx;
        if (!(u >= 1.5 && u <= static_cast<double>(grid.dims[a] - 1) - 1.5)) {
            std::ostringstream msg;
            msg << "particle";
            if (particle_index >= 0) msg << " " << particle_index;
            msg << " too close to the grid boundary (axis " << a << ", coord " << xp[a] << ")";
            throw OutOfDomainError(msg.str(), particle_index);
        }
        const int base = static_cast<int>(std::floor(u - 0.5));
        const double fx = u - base; // in [0.5, 1.5]
        st.base[a] = base;
        st.w[a][0] = 0.5 * (1.5 - fx) * (1.5 - fx);
        st.w[a][1] = 0.75 - (fx - 1.0) * (fx - 1.0);
        st.w[a][2] = 0.5 * (fx - 0.5) * (fx - 0.5);
        st.dw[a][0] = (fx - 1.5) * inv_dx;
        st.dw[a][1] = -2.0 * (fx - 1.0) * inv_dx;
        st.dw[a][2] = (fx - 0.5) * inv_dx;
    }
    return st;
}

std::array<WeightedNode, 27> bspline_weights(const Vec3& xp, const EulerianGrid& grid,
                                             long particle_index) {
    const BsplineStencil st = bspline_stencil(xp, grid, particle_index);
    std::array<WeightedNode, 27> out;
    std::size_t n = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                WeightedNode& wn = out[n++];
                wn.node = st.base + Vec3i(i, j, k);
                wn.weight = st.w[0][i] * st.w[1][j] * st.w[2][k];
                wn.weight_gradient = Vec3(st.dw[0][i] * st.w[1][j] * st.w[2][k],
                                          st.w[0][i] * st.dw[1][j] * st.w[2][k],
                                          st.w[0][i] * st.w[1][j] * st.dw[2][k]);
            }
    return out;
}

} // namespace splatsim
