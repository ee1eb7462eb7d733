#include "splatsim/internal_fill.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "splatsim/error.hpp"
#include "splatsim/log.hpp"
#include "splatsim/threading.hpp"

namespace splatsim {

void validate_fill_config(const FillConfig& cfg) {
    if (!(cfg.sigma_th > 0.0)) throw ParameterError("fill threshold must be positive");
    if (cfg.particles_per_cell < 1) throw ParameterError("particles_per_cell must be >= 1");
    if (cfg.max_fill < 1) throw ParameterError("max_fill must be positive");
}

OpacityGrid rasterize_opacity(const GaussianCloud& cloud, const Vec3& origin, double dx,
                              const Vec3i& cell_dims) {
    if (!(dx > 0.0)) throw ParameterError("opacity grid spacing must be positive");
    if (cell_dims.minCoeff() < 1) throw ParameterError("opacity grid must have cells");

    OpacityGrid og;
    og.origin = origin;
    og.dx = dx;
    og.dims = cell_dims;
    og.values.assign(og.cell_count(), 0.0);
    if (cloud.empty()) return og;

    double max_scale = 0.0;
    Box3 cloud_box = cloud.bounds();
    for (const auto& k : cloud.kernels) max_scale = std::max(max_scale, k.scale.maxCoeff());
    const Vec3 grid_max = origin + dx * cell_dims.cast<double>();
    const double margin = std::min((cloud_box.min - origin).minCoeff(),
                                   (grid_max - cloud_box.max).minCoeff());
    if (margin < 3.0 * max_scale)
        warn("opacity grid margin is thinner than 3x the largest kernel scale; "
             "the field will be truncated at the grid edge");

    struct KernelData {
        Vec3 center;
        Mat3 inv_cov;
        double opacity;
        Vec3i lo, hi; // inclusive cell index box
    };
    std::vector<KernelData> data;
    data.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& k = cloud.kernels[i];
        const Mat3 cov = covariance_from_factors(k);
        Eigen::LDLT<Mat3> ldlt(cov);
        if (ldlt.info() != Eigen::Success || !(cov.determinant() > 0.0)) {
            warn("skipping kernel " + std::to_string(i) + " with non-invertible covariance");
            continue;
        }
        KernelData kd;
        kd.center = k.center;
        kd.inv_cov = ldlt.solve(Mat3::Identity());
        kd.opacity = k.opacity;
        // Mahalanobis radius 3 fits inside the Euclidean radius 3 * max scale.
        const double r = 3.0 * k.scale.maxCoeff();
        for (int a = 0; a < 3; ++a) {
            kd.lo[a] = std::max(0, static_cast<int>(std::floor((k.center[a] - r - origin[a]) / dx - 0.5)));
            kd.hi[a] = std::min(cell_dims[a] - 1,
                                static_cast<int>(std::ceil((k.center[a] + r - origin[a]) / dx - 0.5)));
        }
        if ((kd.lo.array() > kd.hi.array()).any()) continue;
        data.push_back(kd);
    }

    // Kernels binned per x-slab so each slab accumulates its own cells in
    // kernel order: deterministic for any worker count.
    std::vector<std::vector<std::size_t>> slab_kernels(cell_dims.x());
    for (std::size_t ki = 0; ki < data.size(); ++ki)
        for (int i = data[ki].lo.x(); i <= data[ki].hi.x(); ++i) slab_kernels[i].push_back(ki);

    ErrorCollector errors;
#ifdef _OPENMP
#pragma omp parallel for num_threads(worker_count()) schedule(static)
#endif
    for (int i = 0; i < cell_dims.x(); ++i) {
        errors.guarded([&] {
            for (std::size_t ki : slab_kernels[i]) {
                const KernelData& kd = data[ki];
                for (int j = kd.lo.y(); j <= kd.hi.y(); ++j)
                    for (int k = kd.lo.z(); k <= kd.hi.z(); ++k) {
                        const Vec3 d = og.cell_center(i, j, k) - kd.center;
                        const double q = d.dot(kd.inv_cov * d);
                        if (q <= 9.0) og.values[og.cell_index(i, j, k)] += kd.opacity * std::exp(-0.5 * q);
                    }
            }
        });
    }
    errors.rethrow();
    return og;
}

std::vector<int> detect_intersection(std::span<const double> values, double sigma_th) {
    std::vector<int> crossings;
    for (std::size_t j = 0; j + 1 < values.size(); ++j) {
        if (values[j] < sigma_th && values[j + 1] > sigma_th)
            crossings.push_back(static_cast<int>(j));
    }
    return crossings;
}

namespace {

// Per-cell count of low-to-high crossings ahead of (and starting at) the
// cell along +axis / -axis, computed by one backward and one forward sweep.
struct CrossingCounts {
    std::vector<std::uint16_t> plus[3];
    std::vector<std::uint16_t> minus[3];
};

CrossingCounts count_crossings(const OpacityGrid& og, double th) {
    CrossingCounts cc;
    const std::size_t n = og.cell_count();
    for (int a = 0; a < 3; ++a) {
        cc.plus[a].assign(n, 0);
        cc.minus[a].assign(n, 0);
    }
    const Vec3i d = og.dims;
    auto idx = [&](int i, int j, int k) { return og.cell_index(i, j, k); };

    auto sweep_axis = [&](int axis) {
        const int n0 = d[(axis + 1) % 3];
        const int n1 = d[(axis + 2) % 3];
        const int len = d[axis];
        for (int u = 0; u < n0; ++u)
            for (int v = 0; v < n1; ++v) {
                auto cell = [&](int t) {
                    int ijk[3];
                    ijk[axis] = t;
                    ijk[(axis + 1) % 3] = u;
                    ijk[(axis + 2) % 3] = v;
                    return idx(ijk[0], ijk[1], ijk[2]);
                };
                // +axis: crossings in pairs (t, t+1) for t >= cell position
                int ahead = 0;
                for (int t = len - 2; t >= 0; --t) {
                    if (og.values[cell(t)] < th && og.values[cell(t + 1)] > th) ++ahead;
                    cc.plus[axis][cell(t)] = static_cast<std::uint16_t>(std::min(ahead, 65535));
                }
                // -axis: pairs (t, t-1) moving down
                ahead = 0;
                for (int t = 1; t < len; ++t) {
                    if (og.values[cell(t)] < th && og.values[cell(t - 1)] > th) ++ahead;
                    cc.minus[axis][cell(t)] = static_cast<std::uint16_t>(std::min(ahead, 65535));
                }
            }
    };
    for (int a = 0; a < 3; ++a) sweep_axis(a);
    return cc;
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    a ^= b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2);
    return a;
}

// Exact nearest kernel via a uniform spatial hash with expanding Chebyshev
// rings; after scanning ring radius k, any unscanned kernel is at least k*h
// away, so the search is provably exact when best <= k*h.
class NearestKernelIndex {
public:
    NearestKernelIndex(const GaussianCloud& cloud, double cell_size)
        : cloud_(cloud), h_(cell_size) {
        for (std::size_t i = 0; i < cloud.size(); ++i)
            cells_[key_of(cloud.kernels[i].center)].push_back(i);
    }

    std::size_t nearest(const Vec3& q) const {
        const Vec3i qc = coord_of(q);
        std::size_t best = static_cast<std::size_t>(-1);
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int ring = 0;; ++ring) {
            scan_ring(q, qc, ring, best, best_d2);
            if (best != static_cast<std::size_t>(-1) &&
                std::sqrt(best_d2) <= static_cast<double>(ring) * h_)
                return best;
            if (ring > max_ring_) {
                if (best != static_cast<std::size_t>(-1)) return best;
                // exhaustive fallback (empty hash region)
                for (std::size_t i = 0; i < cloud_.size(); ++i) {
                    const double d2 = (cloud_.kernels[i].center - q).squaredNorm();
                    if (d2 < best_d2) {
                        best_d2 = d2;
                        best = i;
                    }
                }
                return best;
            }
        }
    }

private:
    Vec3i coord_of(const Vec3& p) const {
        return Vec3i(static_cast<int>(std::floor(p.x() / h_)),
                     static_cast<int>(std::floor(p.y() / h_)),
                     static_cast<int>(std::floor(p.z() / h_)));
    }
    std::uint64_t key_of(const Vec3& p) const {
        const Vec3i c = coord_of(p);
        std::uint64_t k = 0xcbf29ce484222325ull;
        for (int a = 0; a < 3; ++a)
            k = hash_combine(k, static_cast<std::uint64_t>(static_cast<std::uint32_t>(c[a])));
        return k;
    }
    void scan_cell(const Vec3& q, const Vec3i& c, std::size_t& best, double& best_d2) const {
        std::uint64_t k = 0xcbf29ce484222325ull;
        for (int a = 0; a < 3; ++a)
            k = hash_combine(k, static_cast<std::uint64_t>(static_cast<std::uint32_t>(c[a])));
        auto it = cells_.find(k);
        if (it == cells_.end()) return;
        for (std::size_t i : it->second) {
            const double d2 = (cloud_.kernels[i].center - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
                best_d2 = d2;
                best = i;
            }
        }
    }
    void scan_ring(const Vec3& q, const Vec3i& qc, int ring, std::size_t& best,
                   double& best_d2) const {
        if (ring == 0) {
            scan_cell(q, qc, best, best_d2);
            return;
        }
        for (int dx = -ring; dx <= ring; ++dx)
            for (int dy = -ring; dy <= ring; ++dy)
                for (int dz = -ring; dz <= ring; ++dz) {
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
                    scan_cell(q, qc + Vec3i(dx, dy, dz), best, best_d2);
                }
    }

    const GaussianCloud& cloud_;
    double h_;
    int max_ring_ = 64;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

} // namespace

std::vector<Vec3i> select_fill_cells(const OpacityGrid& og, const FillConfig& cfg) {
    validate_fill_config(cfg);
    const CrossingCounts cc = count_crossings(og, cfg.sigma_th);
    std::vector<Vec3i> selected;
    const Vec3i d = og.dims;
    for (int i = 0; i < d.x(); ++i)
        for (int j = 0; j < d.y(); ++j)
            for (int k = 0; k < d.z(); ++k) {
                const std::size_t ci = og.cell_index(i, j, k);
                if (!(og.values[ci] < cfg.sigma_th)) continue;
                bool all_hit = true;
                for (int a = 0; a < 3 && all_hit; ++a)
                    all_hit = cc.plus[a][ci] >= 1 && cc.minus[a][ci] >= 1; // condition 1
                if (!all_hit) continue;
                if (cc.plus[0][ci] % 2 == 0) continue; // condition 2: odd +x parity
                selected.emplace_back(i, j, k);
            }
    const long spawned = static_cast<long>(selected.size()) * cfg.particles_per_cell;
    if (spawned > cfg.max_fill) {
        std::ostringstream msg;
        msg << "internal fill would spawn " << spawned << " kernels (cap " << cfg.max_fill
            << "); raise sigma_th or max_fill";
        throw ParameterError(msg.str());
    }
    return selected;
}

std::vector<GaussianKernel> spawn_fill_particles(const std::vector<Vec3i>& cells,
                                                 const OpacityGrid& og,
                                                 const GaussianCloud& cloud,
                                                 const FillConfig& cfg) {
    validate_fill_config(cfg);
    if (cloud.empty()) throw DataError("cannot inherit fill appearance from an empty cloud");

    const double volume0 = og.dx * og.dx * og.dx / cfg.particles_per_cell;
    const double radius = std::cbrt(3.0 * volume0 / (4.0 * M_PI));
    const int strata = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(cfg.particles_per_cell))));
    const double sub = og.dx / strata;

    NearestKernelIndex nn(cloud, og.dx);

    std::vector<GaussianKernel> out;
    out.reserve(cells.size() * cfg.particles_per_cell);
    for (const Vec3i& c : cells) {
        const Vec3 cell_min = og.origin + og.dx * c.cast<double>();
        const std::uint64_t cell_id =
            hash_combine(hash_combine(hash_combine(cfg.seed, static_cast<std::uint64_t>(c.x())),
                                      static_cast<std::uint64_t>(c.y())),
                         static_cast<std::uint64_t>(c.z()));
        std::mt19937_64 rng(cell_id);
        std::uniform_real_distribution<double> jitter(0.25, 0.75);
        int spawned = 0;
        for (int si = 0; si < strata && spawned < cfg.particles_per_cell; ++si)
            for (int sj = 0; sj < strata && spawned < cfg.particles_per_cell; ++sj)
                for (int sk = 0; sk < strata && spawned < cfg.particles_per_cell; ++sk) {
                    const Vec3 pos = cell_min + sub * (Vec3(si, sj, sk) +
                                                       Vec3(jitter(rng), jitter(rng), jitter(rng)));
                    GaussianKernel k;
                    k.center = pos;
                    k.scale = Vec3::Constant(radius);
                    k.rotation = Quat::Identity();
                    const std::size_t src = nn.nearest(pos);
                    k.opacity = cloud.kernels[src].opacity;
                    k.sh = cloud.kernels[src].sh;
                    out.push_back(std::move(k));
                    ++spawned;
                }
    }
    return out;
}

} // namespace splatsim
