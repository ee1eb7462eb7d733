#include "splatsim/engine.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "splatsim/error.hpp"
#include "splatsim/log.hpp"
#include "splatsim/threading.hpp"

namespace splatsim {

void validate_sim_config(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw ParameterError("dt must be positive");
    if (cfg.bspline_degree != 2) throw ParameterError("only quadratic B-splines are supported");
    if (!(cfg.cfl_limit > 0.0 && cfg.cfl_limit <= 1.0))
        throw ParameterError("cfl_limit must lie in (0, 1]");
    if (cfg.substeps_per_frame < 1) throw ParameterError("substeps_per_frame must be >= 1");
    if (cfg.boundary_margin_cells < 0) throw ParameterError("boundary margin must be >= 0");
}

MpmEngine::MpmEngine(EulerianGrid grid, std::vector<ParticleState> particles,
                     std::vector<Material> materials, SimConfig cfg)
    : grid_(std::move(grid)), particles_(std::move(particles)),
      materials_(std::move(materials)), cfg_(cfg) {
    validate_sim_config(cfg_);
    for (const auto& m : materials_) validate_model(m.model);
    for (std::size_t i = 0; i < particles_.size(); ++i) {
        const auto& p = particles_[i];
        if (!(p.mass > 0.0) || !(p.volume0 > 0.0))
            throw DataError("particle " + std::to_string(i) + " has non-positive mass or volume");
        if (p.material_id < 0 || p.material_id >= static_cast<int>(materials_.size()))
            throw DataError("particle " + std::to_string(i) + " has an invalid material id");
    }
}

void MpmEngine::ensure_buffers(int workers) {
    const std::size_t n = grid_.node_count();
    if (scatter_.mass.size() != static_cast<std::size_t>(workers) ||
        (workers > 0 && scatter_.mass[0].size() != n)) {
        scatter_.mass.assign(workers, std::vector<double>(n, 0.0));
        scatter_.momentum.assign(workers, std::vector<Vec3>(n, Vec3::Zero()));
        scatter_.force.assign(workers, std::vector<Vec3>(n, Vec3::Zero()));
    }
    stress_v0_.resize(particles_.size());
}

void MpmEngine::p2g() {
    const int workers = worker_count();
    ensure_buffers(workers);
    const std::size_t n_nodes = grid_.node_count();
    ErrorCollector errors;

#ifdef _OPENMP
#pragma omp parallel num_threads(workers)
#endif
    {
#ifdef _OPENMP
        const int t = omp_get_thread_num();
#else
        const int t = 0;
#endif
        auto& mass = scatter_.mass[t];
        auto& momentum = scatter_.momentum[t];
        std::fill(mass.begin(), mass.end(), 0.0);
        std::fill(momentum.begin(), momentum.end(), Vec3::Zero());
        const auto [begin, end] = worker_range(t, workers, particles_.size());
        errors.guarded([&] {
            for (std::size_t pi = begin; pi < end; ++pi) {
                const ParticleState& p = particles_[pi];
                const BsplineStencil st =
                    bspline_stencil(p.x, grid_, static_cast<long>(pi));
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        for (int k = 0; k < 3; ++k) {
                            const double w = st.w[0][i] * st.w[1][j] * st.w[2][k];
                            const std::size_t ni = grid_.node_index(
                                st.base.x() + i, st.base.y() + j, st.base.z() + k);
                            const Vec3 xi = grid_.node_position(
                                st.base.x() + i, st.base.y() + j, st.base.z() + k);
                            mass[ni] += w * p.mass;
                            momentum[ni] += w * p.mass * (p.v + p.C * (xi - p.x));
                        }
            }
        });
    }
    errors.rethrow();

#ifdef _OPENMP
#pragma omp parallel for num_threads(workers) schedule(static)
#endif
    for (long long ni = 0; ni < static_cast<long long>(n_nodes); ++ni) {
        double m = 0.0;
        Vec3 mom = Vec3::Zero();
        for (int t = 0; t < workers; ++t) {
            m += scatter_.mass[t][ni];
            mom += scatter_.momentum[t][ni];
        }
        grid_.mass[ni] = m;
        grid_.velocity[ni] = m > 0.0 ? Vec3(mom / m) : Vec3::Zero();
    }
}

void MpmEngine::grid_update() {
    const int workers = worker_count();
    ensure_buffers(workers);
    const std::size_t n_nodes = grid_.node_count();
    ErrorCollector errors;

#ifdef _OPENMP
#pragma omp parallel for num_threads(workers) schedule(static)
#endif
    for (long long pi = 0; pi < static_cast<long long>(particles_.size()); ++pi) {
        errors.guarded([&] {
            const ParticleState& p = particles_[pi];
            const Mat3 tau = kirchhoff_stress(p.F_E, materials_[p.material_id]);
            if (!tau.allFinite()) {
                throw NumericalBlowupError(
                    "non-finite stress on particle " + std::to_string(pi) +
                        " at step " + std::to_string(step_) + "; reduce dt",
                    step_, static_cast<long>(pi));
            }
            stress_v0_[pi] = tau * p.volume0;
        });
    }
    errors.rethrow();

#ifdef _OPENMP
#pragma omp parallel num_threads(workers)
#endif
    {
#ifdef _OPENMP
        const int t = omp_get_thread_num();
#else
        const int t = 0;
#endif
        auto& force = scatter_.force[t];
        std::fill(force.begin(), force.end(), Vec3::Zero());
        const auto [begin, end] = worker_range(t, workers, particles_.size());
        errors.guarded([&] {
            for (std::size_t pi = begin; pi < end; ++pi) {
                const ParticleState& p = particles_[pi];
                const BsplineStencil st =
                    bspline_stencil(p.x, grid_, static_cast<long>(pi));
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        for (int k = 0; k < 3; ++k) {
                            const Vec3 grad(st.dw[0][i] * st.w[1][j] * st.w[2][k],
                                            st.w[0][i] * st.dw[1][j] * st.w[2][k],
                                            st.w[0][i] * st.w[1][j] * st.dw[2][k]);
                            const std::size_t ni = grid_.node_index(
                                st.base.x() + i, st.base.y() + j, st.base.z() + k);
                            force[ni] -= stress_v0_[pi] * grad;
                        }
            }
        });
    }
    errors.rethrow();

    const double dt = cfg_.dt;
    const Vec3 g = cfg_.gravity;
#ifdef _OPENMP
#pragma omp parallel for num_threads(workers) schedule(static)
#endif
    for (long long ni = 0; ni < static_cast<long long>(n_nodes); ++ni) {
        if (!(grid_.mass[ni] > 0.0)) continue;
        Vec3 f = Vec3::Zero();
        for (int t = 0; t < workers; ++t) f += scatter_.force[t][ni];
        grid_.velocity[ni] += dt * (f / grid_.mass[ni]) + dt * g;
    }

    apply_boundary_conditions();
}

void MpmEngine::apply_boundary_conditions() {
    const int m = cfg_.boundary_margin_cells;
    if (m <= 0) return;
    const Vec3i d = grid_.dims;
    auto apply = [&](std::size_t ni, int axis, BoundaryType type) {
        if (type == BoundaryType::Sticky)
            grid_.velocity[ni].setZero();
        else if (type == BoundaryType::Slip)
            grid_.velocity[ni][axis] = 0.0;
    };
    for (int i = 0; i < d.x(); ++i)
        for (int j = 0; j < d.y(); ++j)
            for (int k = 0; k < d.z(); ++k) {
                const std::size_t ni = grid_.node_index(i, j, k);
                if (i < m) apply(ni, 0, cfg_.boundary[0]);
                if (i >= d.x() - m) apply(ni, 0, cfg_.boundary[1]);
                if (j < m) apply(ni, 1, cfg_.boundary[2]);
                if (j >= d.y() - m) apply(ni, 1, cfg_.boundary[3]);
                if (k < m) apply(ni, 2, cfg_.boundary[4]);
                if (k >= d.z() - m) apply(ni, 2, cfg_.boundary[5]);
            }
}

void MpmEngine::g2p() {
    const int workers = worker_count();
    const double dt = cfg_.dt;
    const double d_inverse = 4.0 / (grid_.dx * grid_.dx); // 12 / (dx^2 (b+1)), b = 2
    ErrorCollector errors;
    double max_speed2 = 0.0;

#ifdef _OPENMP
#pragma omp parallel for num_threads(workers) schedule(static) reduction(max : max_speed2)
#endif
    for (long long pi = 0; pi < static_cast<long long>(particles_.size()); ++pi) {
        errors.guarded([&] {
            ParticleState& p = particles_[pi];
            const BsplineStencil st = bspline_stencil(p.x, grid_, static_cast<long>(pi));
            Vec3 v_new = Vec3::Zero();
            Mat3 c_new = Mat3::Zero();
            Mat3 grad_v = Mat3::Zero();
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        const double w = st.w[0][i] * st.w[1][j] * st.w[2][k];
                        const Vec3 grad(st.dw[0][i] * st.w[1][j] * st.w[2][k],
                                        st.w[0][i] * st.dw[1][j] * st.w[2][k],
                                        st.w[0][i] * st.w[1][j] * st.dw[2][k]);
                        const int gi = st.base.x() + i;
                        const int gj = st.base.y() + j;
                        const int gk = st.base.z() + k;
                        const Vec3& vi = grid_.velocity[grid_.node_index(gi, gj, gk)];
                        const Vec3 xi = grid_.node_position(gi, gj, gk);
                        v_new += w * vi;
                        c_new += d_inverse * w * vi * (xi - p.x).transpose();
                        grad_v += vi * grad.transpose();
                    }
            if (cfg_.rpic_damping) c_new = 0.5 * (c_new - c_new.transpose()).eval();
            p.v = v_new;
            p.x += dt * v_new;
            p.C = c_new;
            p.grad_v = grad_v;
            const Mat3 f_trial = (Mat3::Identity() + dt * grad_v) * p.F_E;
            p.F_E = apply_return_map(f_trial, materials_[p.material_id], dt);
            if (!(p.F_E.determinant() > 0.0) || !p.F_E.allFinite())
                throw DegenerateDeformationError(
                    "non-positive det(F) on particle " + std::to_string(pi) + " at step " +
                        std::to_string(step_),
                    static_cast<long>(pi));
            max_speed2 = std::max(max_speed2, v_new.squaredNorm());
        });
    }
    errors.rethrow();
    max_speed_ = std::sqrt(max_speed2);
}

double MpmEngine::cfl_ratio() const {
    return max_speed_ * cfg_.dt / grid_.dx;
}

void MpmEngine::advance_step() {
    grid_.clear();
    p2g();
    grid_update();
    g2p();
    if (post_step_hook) post_step_hook(*this);
    ++step_;
    if (cfl_ratio() > cfg_.cfl_limit && !cfl_warned_) {
        std::ostringstream msg;
        msg << "CFL limit exceeded at step " << step_ << ": dt*max|v|/dx = " << cfl_ratio()
            << " > " << cfg_.cfl_limit << " (suggest dt <= "
            << cfg_.cfl_limit * grid_.dx / max_speed_ << ")";
        warn(msg.str());
        cfl_warned_ = true;
    }
}

double MpmEngine::total_mass() const {
    double m = 0.0;
    for (const auto& p : particles_) m += p.mass;
    return m;
}

Vec3 MpmEngine::total_particle_momentum() const {
    Vec3 mom = Vec3::Zero();
    for (const auto& p : particles_) mom += p.mass * p.v;
    return mom;
}

Vec3 MpmEngine::total_grid_momentum() const {
    Vec3 mom = Vec3::Zero();
    for (std::size_t i = 0; i < grid_.node_count(); ++i) mom += grid_.mass[i] * grid_.velocity[i];
    return mom;
}

double MpmEngine::kinetic_energy() const {
    double e = 0.0;
    for (const auto& p : particles_) e += 0.5 * p.mass * p.v.squaredNorm();
    return e;
}

double MpmEngine::elastic_energy() const {
    double e = 0.0;
    for (const auto& p : particles_)
        e += p.volume0 * strain_energy_density(p.F_E, materials_[p.material_id]);
    return e;
}

} // namespace splatsim
