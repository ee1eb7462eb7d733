#pragma once

#include <vector>

#include "splatsim/particles.hpp"
#include "splatsim/types.hpp"

namespace splatsim {

enum class KinematicsMode { TotalF, Incremental };

// Shape and appearance state of one kernel as it is carried by the flow.
struct KernelKinematicState {
    Mat3 A0 = Mat3::Identity();      // material-space covariance (SPD)
    Mat3 a = Mat3::Identity();       // world-space covariance (SPD)
    Mat3 F_total = Mat3::Identity(); // accumulated deformation gradient
    Mat3 R_sh = Mat3::Identity();    // accumulated SH orientation
    KinematicsMode mode = KinematicsMode::TotalF;
};

// F A0 F^T. Requires det(F) > 0.
Mat3 deform_covariance_total(const Mat3& A0, const Mat3& F);

// Forward-Euler rate-form update a + dt (G a + a G^T), symmetrized.
// Throws TimestepError if the result leaves the SPD cone.
Mat3 deform_covariance_incremental(const Mat3& a, const Mat3& grad_v, double dt);

// Rotation extracted from (I + dt G) R_prev by polar decomposition.
Mat3 update_sh_rotation(const Mat3& R_prev, const Mat3& grad_v, double dt);

// R^T d: evaluating the material-space SH basis at the inversely rotated
// view direction realizes the rotated appearance.
Vec3 rotate_view_direction(const Vec3& d, const Mat3& R);

// Steps the per-kernel states from the velocity gradients cached on the
// matching particles. Re-orthonormalizes R_sh every reortho_interval steps
// or whenever orthogonality drift exceeds drift_tolerance.
class KinematicsUpdater {
public:
    std::vector<KernelKinematicState> states;
    int reortho_interval = 64;
    double drift_tolerance = 1e-6;

    void step(const std::vector<ParticleState>& particles, double dt);
    long steps_taken() const { return steps_; }

private:
    long steps_ = 0;
};

} // namespace splatsim
