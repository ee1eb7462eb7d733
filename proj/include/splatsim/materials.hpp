#pragma once

#include <string>
#include <utility>

#include "splatsim/types.hpp"

namespace splatsim {

enum class Elasticity { FixedCorotated, StVK, NeoHookean, HerschelBulkley };
enum class Plasticity { None, DruckerPrager, VonMises, HerschelBulkley };

struct MaterialParams {
    double E = 0.0;      // Young's modulus
    double nu = 0.0;     // Poisson ratio
    double mu = 0.0;     // shear modulus
    double lambda = 0.0; // Lame modulus
    double kappa = 0.0;  // bulk modulus
    double density = 0.0;

    double friction_angle = 0.0; // radians (Drucker-Prager)
    double yield_stress = 0.0;   // tau_Y / sigma_Y (von Mises, Herschel-Bulkley)
    double viscosity = 0.0;      // eta (Herschel-Bulkley)
};

struct MaterialModel {
    Elasticity elasticity = Elasticity::FixedCorotated;
    Plasticity plasticity = Plasticity::None;
    // Paper-literal Neo-Hookean drops the lambda factor on the log(J) term.
    bool neo_hookean_literal = false;
};

struct Material {
    MaterialModel model;
    MaterialParams params;
};

// mu = E / (2(1+nu)), lambda = E nu / ((1+nu)(1-2nu)), kappa = E / (3(1-2nu)).
// Throws ParameterError for E <= 0 or nu outside [0, 0.5).
struct Moduli {
    double mu;
    double lambda;
    double kappa;
};
Moduli derive_moduli(double E, double nu);

MaterialParams make_material_params(double E, double nu, double density);

// Throws ParameterError on invalid elasticity/plasticity pairings.
void validate_model(const MaterialModel& model);

// Scene-file material names ("Fixed corotated", "StVK", "Neo-Hookean",
// "von Mises", "Drucker-Prager", "Herschel-Bulkley").
MaterialModel material_model_from_name(const std::string& name);

// SVD with rotation factors: F = U diag(sigma) V^T, det(U) = det(V) = +1.
// Sign corrections go into sigma, so at most one singular value is negative
// and only when det(F) < 0. Entries sorted by descending magnitude.
struct Svd3 {
    Mat3 U;
    Mat3 V;
    Vec3 sigma;
};
Svd3 svd3(const Mat3& f);

// Closest rotation R = U V^T. Requires det(F) > 0.
Mat3 polar_rotation(const Mat3& f);

// Kirchhoff stresses tau = (dPsi/dF) F^T of the hyperelastic models.
Mat3 kirchhoff_fixed_corotated(const Mat3& f_elastic, const MaterialParams& p);
Mat3 kirchhoff_stvk(const Mat3& f_elastic, const MaterialParams& p);
Mat3 kirchhoff_neo_hookean(const Mat3& f_elastic, const MaterialParams& p,
                           bool paper_literal = false);
Mat3 kirchhoff_herschel_bulkley(const Mat3& f_elastic, const MaterialParams& p);

// Plastic return mappings in Hencky (log singular value) space.
Mat3 return_map_drucker_prager(const Mat3& f_trial, const MaterialParams& p);
Mat3 return_map_von_mises(const Mat3& f_trial, const MaterialParams& p);

// Viscoplastic Herschel-Bulkley step (h = 1): deviatoric trial stress is
// relaxed toward the yield surface over dt; returns the updated elastic
// deformation gradient and its Kirchhoff stress.
std::pair<Mat3, Mat3> herschel_bulkley_step(const Mat3& f_trial, const MaterialParams& p,
                                            double dt);

// Dispatch helpers used by the MPM loop.
Mat3 apply_return_map(const Mat3& f_trial, const Material& mat, double dt);
Mat3 kirchhoff_stress(const Mat3& f_elastic, const Material& mat);
double strain_energy_density(const Mat3& f_elastic, const Material& mat);

} // namespace splatsim
