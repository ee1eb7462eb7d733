#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splatsim/gaussian_cloud.hpp"
#include "splatsim/types.hpp"

namespace splatsim {

// Opacity density sampled at cell centers; dims counts cells per axis and
// cell (i,j,k) is centered at origin + (i+1/2, j+1/2, k+1/2) dx.
struct OpacityGrid {
    Vec3 origin = Vec3::Zero();
    double dx = 1.0;
    Vec3i dims = Vec3i::Zero();
    std::vector<double> values;

    std::size_t cell_count() const {
        return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
    }
    std::size_t cell_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims.y() + j) * dims.z() + k;
    }
    Vec3 cell_center(int i, int j, int k) const {
        return origin + dx * Vec3(i + 0.5, j + 0.5, k + 0.5);
    }
};

struct FillConfig {
    double sigma_th = 1.0;         // opacity threshold separating void from shell
    int particles_per_cell = 1;
    long max_fill = 2'000'000;     // safety cap on spawned kernels
    std::uint64_t seed = 0;
};

void validate_fill_config(const FillConfig& cfg);

// Sums sigma_p exp(-1/2 (x - x_p)^T A_p^{-1} (x - x_p)) over kernels at every
// cell center, truncating each kernel at Mahalanobis radius 3. Deterministic
// regardless of worker count. Warns when the grid margin around the cloud is
// thinner than 3 times the largest kernel scale.
OpacityGrid rasterize_opacity(const GaussianCloud& cloud, const Vec3& origin, double dx,
                              const Vec3i& cell_dims);

// Indices j of low-to-high threshold transitions: values[j] < sigma_th and
// values[j+1] > sigma_th. High-to-low transitions are not crossings.
std::vector<int> detect_intersection(std::span<const double> values, double sigma_th);

// A cell qualifies when its own value is below sigma_th, rays along all six
// axis directions each cross the surface at least once, and the +x ray
// crosses an odd number of times (interior parity test).
std::vector<Vec3i> select_fill_cells(const OpacityGrid& og, const FillConfig& cfg);

// One kernel per stratified jitter position in each selected cell; opacity
// and SH coefficients are inherited from the nearest source kernel, the
// radius follows from the represented volume dx^3 / particles_per_cell.
std::vector<GaussianKernel> spawn_fill_particles(const std::vector<Vec3i>& cells,
                                                 const OpacityGrid& og,
                                                 const GaussianCloud& cloud,
                                                 const FillConfig& cfg);

} // namespace splatsim
