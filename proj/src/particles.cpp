#include "splatsim/particles.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "splatsim/error.hpp"

namespace splatsim {

namespace {

// Cell of the grid lattice containing x; cells span [origin + c dx, origin + (c+1) dx).
bool cell_of(const Vec3& x, const EulerianGrid& grid, Vec3i& cell) {
    for (int a = 0; a < 3; ++a) {
        const double u = (x[a] - grid.origin[a]) / grid.dx;
        const int c = static_cast<int>(std::floor(u));
        if (c < 0 || c >= grid.dims[a] - 1) return false;
        cell[a] = c;
    }
    return true;
}

std::uint64_t cell_key(const Vec3i& c) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.x())) << 42) ^
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.y())) << 21) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.z()));
}

} // namespace

std::vector<ParticleState> initialize_particles(const GaussianCloud& cloud,
                                                const std::vector<int>& material_ids,
                                                const std::vector<Material>& materials,
                                                const EulerianGrid& grid) {
    if (cloud.empty()) throw DataError("cannot initialize particles from an empty cloud");
    if (material_ids.size() != cloud.size())
        throw DataError("material assignment count does not match kernel count");

    std::unordered_map<std::uint64_t, int> counts;
    counts.reserve(cloud.size());
    std::vector<std::uint64_t> keys(cloud.size());
    std::vector<std::size_t> outside;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Vec3i cell;
        if (!cell_of(cloud.kernels[i].center, grid, cell)) {
            outside.push_back(i);
            continue;
        }
        keys[i] = cell_key(cell);
        ++counts[keys[i]];
    }
    if (!outside.empty()) {
        std::ostringstream msg;
        msg << outside.size() << " kernel(s) outside the simulation domain, indices:";
        for (std::size_t j = 0; j < outside.size() && j < 16; ++j) msg << " " << outside[j];
        if (outside.size() > 16) msg << " ...";
        throw OutOfDomainError(msg.str(), static_cast<long>(outside.front()));
    }

    const double cell_volume = grid.dx * grid.dx * grid.dx;
    std::vector<ParticleState> particles(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        ParticleState& p = particles[i];
        p.x = cloud.kernels[i].center;
        p.material_id = material_ids[i];
        if (p.material_id < 0 || p.material_id >= static_cast<int>(materials.size()))
            throw DataError("material id out of range for kernel " + std::to_string(i));
        p.volume0 = cell_volume / counts[keys[i]];
        p.mass = materials[p.material_id].params.density * p.volume0;
    }
    return particles;
}

} // namespace splatsim
