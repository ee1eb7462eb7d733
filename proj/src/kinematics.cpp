#include "splatsim/kinematics.hpp"

#include <cmath>

#include "splatsim/error.hpp"
#include "splatsim/materials.hpp"
#include "splatsim/threading.hpp"

namespace splatsim {

namespace {

// Sylvester criterion on a symmetric 3x3.
bool is_spd(const Mat3& m) {
    if (!(m(0, 0) > 0.0)) return false;
    if (!(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) > 0.0)) return false;
    return m.determinant() > 0.0;
}

} // namespace

Mat3 deform_covariance_total(const Mat3& A0, const Mat3& F) {
    if (!(F.determinant() > 0.0))
        throw DegenerateDeformationError("covariance deformation: det(F) <= 0");
    const Mat3 a = F * A0 * F.transpose();
    return 0.5 * (a + a.transpose());
}

Mat3 deform_covariance_incremental(const Mat3& a, const Mat3& grad_v, double dt) {
    Mat3 out = a + dt * (grad_v * a + a * grad_v.transpose());
    out = 0.5 * (out + out.transpose()).eval();
    if (!is_spd(out))
        throw TimestepError("incremental covariance update left the SPD cone; reduce dt");
    return out;
}

Mat3 update_sh_rotation(const Mat3& R_prev, const Mat3& grad_v, double dt) {
    return polar_rotation((Mat3::Identity() + dt * grad_v) * R_prev);
}

Vec3 rotate_view_direction(const Vec3& d, const Mat3& R) {
    return R.transpose() * d;
}

void KinematicsUpdater::step(const std::vector<ParticleState>& particles, double dt) {
    if (particles.size() != states.size())
        throw DataError("kinematics state count does not match particle count");
    const bool periodic_reortho = reortho_interval > 0 && (steps_ + 1) % reortho_interval == 0;
    ErrorCollector errors;

#ifdef _OPENMP
#pragma omp parallel for num_threads(worker_count()) schedule(static)
#endif
    for (long long i = 0; i < static_cast<long long>(states.size()); ++i) {
        errors.guarded([&] {
            KernelKinematicState& s = states[i];
            const Mat3& g = particles[i].grad_v;
            if (s.mode == KinematicsMode::TotalF) {
                s.F_total = (Mat3::Identity() + dt * g) * s.F_total;
                s.a = deform_covariance_total(s.A0, s.F_total);
            } else {
                s.a = deform_covariance_incremental(s.a, g, dt);
            }
            s.R_sh = update_sh_rotation(s.R_sh, g, dt);
            const double drift = (s.R_sh.transpose() * s.R_sh - Mat3::Identity()).norm();
            if (periodic_reortho || drift > drift_tolerance) s.R_sh = polar_rotation(s.R_sh);
        });
    }
    errors.rethrow();
    ++steps_;
}

} // namespace splatsim
