#include "splatsim/materials.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "splatsim/error.hpp"

namespace splatsim {

namespace {

constexpr double kTiny = 1e-14;

Mat3 recompose(const Mat3& u, const Vec3& sigma, const Mat3& v) {
    return u * sigma.asDiagonal() * v.transpose();
}

void require_positive_det(const Mat3& f, const char* who) {
    if (!(f.determinant() > 0.0))
        throw DegenerateDeformationError(std::string(who) + ": det(F) <= 0");
}

} // namespace

Moduli derive_moduli(double E, double nu) {
    if (!(E > 0.0)) throw ParameterError("Young's modulus must be positive");
    if (!(nu >= 0.0) || nu >= 0.5)
        throw ParameterError("Poisson ratio must lie in [0, 0.5); the incompressible limit "
                             "is not representable by these moduli");
    Moduli m;
    m.mu = E / (2.0 * (1.0 + nu));
    m.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    m.kappa = E / (3.0 * (1.0 - 2.0 * nu));
    return m;
}

MaterialParams make_material_params(double E, double nu, double density) {
    if (!(density > 0.0)) throw ParameterError("density must be positive");
    MaterialParams p;
    p.E = E;
    p.nu = nu;
    p.density = density;
    const Moduli m = derive_moduli(E, nu);
    p.mu = m.mu;
    p.lambda = m.lambda;
    p.kappa = m.kappa;
    return p;
}

void validate_model(const MaterialModel& model) {
    if (model.plasticity == Plasticity::HerschelBulkley &&
        model.elasticity != Elasticity::HerschelBulkley)
        throw ParameterError("Herschel-Bulkley plasticity requires the Herschel-Bulkley "
                             "elastic stress");
    if (model.elasticity == Elasticity::HerschelBulkley &&
        model.plasticity != Plasticity::HerschelBulkley && model.plasticity != Plasticity::None)
        throw ParameterError("Herschel-Bulkley elasticity cannot pair with another return map");
    if (model.plasticity == Plasticity::DruckerPrager && model.elasticity != Elasticity::StVK)
        throw ParameterError("Drucker-Prager pairs with the Hencky-strain (StVK) stress");
}

MaterialModel material_model_from_name(const std::string& name) {
    MaterialModel m;
    if (name == "Fixed corotated") {
        m.elasticity = Elasticity::FixedCorotated;
    } else if (name == "StVK") {
        m.elasticity = Elasticity::StVK;
    } else if (name == "Neo-Hookean") {
        m.elasticity = Elasticity::NeoHookean;
    } else if (name == "von Mises") {
        m.elasticity = Elasticity::StVK;
        m.plasticity = Plasticity::VonMises;
    } else if (name == "Drucker-Prager") {
        m.elasticity = Elasticity::StVK;
        m.plasticity = Plasticity::DruckerPrager;
    } else if (name == "Herschel-Bulkley") {
        m.elasticity = Elasticity::HerschelBulkley;
        m.plasticity = Plasticity::HerschelBulkley;
    } else {
        throw ParameterError("unknown material model '" + name + "'");
    }
    return m;
}

Svd3 svd3(const Mat3& f) {
    if (!f.allFinite()) throw DataError("svd3: non-finite matrix");
    Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Svd3 out;
    out.U = svd.matrixU();
    out.V = svd.matrixV();
    out.sigma = svd.singularValues();
    // Push reflections into the smallest singular value so U, V are rotations.
    if (out.U.determinant() < 0.0) {
        out.U.col(2) *= -1.0;
        out.sigma(2) *= -1.0;
    }
    if (out.V.determinant() < 0.0) {
        out.V.col(2) *= -1.0;
        out.sigma(2) *= -1.0;
    }
    return out;
}

Mat3 polar_rotation(const Mat3& f) {
    require_positive_det(f, "polar_rotation");
    const Svd3 s = svd3(f);
    return s.U * s.V.transpose();
}

Mat3 kirchhoff_fixed_corotated(const Mat3& f, const MaterialParams& p) {
    require_positive_det(f, "fixed corotated stress");
    const Svd3 s = svd3(f);
    const Mat3 r = s.U * s.V.transpose();
    const double j = f.determinant();
    return 2.0 * p.mu * (f - r) * f.transpose() +
           p.lambda * (j - 1.0) * j * Mat3::Identity();
}

Mat3 kirchhoff_stvk(const Mat3& f, const MaterialParams& p) {
    require_positive_det(f, "StVK stress");
    const Svd3 s = svd3(f);
    if (!(s.sigma.minCoeff() > 0.0))
        throw DegenerateDeformationError("StVK stress: zero singular value");
    const Vec3 eps = s.sigma.array().log();
    const Vec3 diag = 2.0 * p.mu * eps + Vec3::Constant(p.lambda * eps.sum());
    // tau = U diag U^T: the symmetric Kirchhoff stress of the Hencky energy.
    return s.U * diag.asDiagonal() * s.U.transpose();
}

Mat3 kirchhoff_neo_hookean(const Mat3& f, const MaterialParams& p, bool paper_literal) {
    require_positive_det(f, "Neo-Hookean stress");
    const double j = f.determinant();
    const double log_coeff = paper_literal ? 1.0 : p.lambda;
    return p.mu * (f * f.transpose() - Mat3::Identity()) +
           log_coeff * std::log(j) * Mat3::Identity();
}

Mat3 kirchhoff_herschel_bulkley(const Mat3& f, const MaterialParams& p) {
    require_positive_det(f, "Herschel-Bulkley stress");
    const double j = f.determinant();
    const Mat3 b = f * f.transpose();
    const Mat3 b_bar = std::pow(b.determinant(), -1.0 / 3.0) * b;
    return 0.5 * p.kappa * (j * j - 1.0) * Mat3::Identity() + p.mu * deviatoric(b_bar);
}

Mat3 return_map_drucker_prager(const Mat3& f_trial, const MaterialParams& p) {
    require_positive_det(f_trial, "Drucker-Prager return map");
    const Svd3 s = svd3(f_trial);
    const Vec3 eps = s.sigma.array().log();
    const Vec3 eps_hat = deviatoric(eps);
    const double eps_hat_norm = eps_hat.norm();
    const double tr = eps.sum();

    const double sin_phi = std::sin(p.friction_angle);
    const double alpha = std::sqrt(2.0 / 3.0) * 2.0 * sin_phi / (3.0 - sin_phi);
    const double d = 3.0;
    const double dgamma = eps_hat_norm + alpha * (d * p.lambda + 2.0 * p.mu) * tr / (2.0 * p.mu);

    if (tr > 0.0) return recompose(s.U, Vec3::Ones(), s.V); // expansion: project to apex
    if (dgamma <= 0.0) return f_trial;                      // inside the cone
    if (eps_hat_norm < kTiny) return f_trial;               // no deviatoric direction
    const Vec3 eps_proj = eps - dgamma * eps_hat / eps_hat_norm;
    return recompose(s.U, eps_proj.array().exp(), s.V);
}

Mat3 return_map_von_mises(const Mat3& f_trial, const MaterialParams& p) {
    require_positive_det(f_trial, "von Mises return map");
    const Svd3 s = svd3(f_trial);
    const Vec3 eps = s.sigma.array().log();
    const Vec3 eps_hat = deviatoric(eps);
    const double eps_hat_norm = eps_hat.norm();

    const double dgamma = eps_hat_norm - p.yield_stress / (2.0 * p.mu);
    if (dgamma <= 0.0) return f_trial;
    if (eps_hat_norm < kTiny) return f_trial;
    const Vec3 eps_proj = eps - dgamma * eps_hat / eps_hat_norm;
    return recompose(s.U, eps_proj.array().exp(), s.V);
}

std::pair<Mat3, Mat3> herschel_bulkley_step(const Mat3& f_trial, const MaterialParams& p,
                                            double dt) {
    require_positive_det(f_trial, "Herschel-Bulkley step");
    if (!(dt > 0.0)) throw ParameterError("Herschel-Bulkley step: dt must be positive");

    const double j = f_trial.determinant();
    const Mat3 b = f_trial * f_trial.transpose();
    const Mat3 b_bar = std::pow(b.determinant(), -1.0 / 3.0) * b;
    const Mat3 s_trial = p.mu * deviatoric(b_bar);
    const double s_trial_norm = s_trial.norm();
    const double yield = s_trial_norm - std::sqrt(2.0 / 3.0) * p.yield_stress;

    Mat3 f_elastic = f_trial;
    if (yield > 0.0 && s_trial_norm > kTiny) {
        const double s_new_norm = s_trial_norm - yield / (1.0 + p.viscosity / (2.0 * p.mu * dt));
        const Mat3 s_new = (s_new_norm / s_trial_norm) * s_trial;

        // Rebuild the unimodular left stretch from the relaxed deviator,
        // keeping the trial trace, then renormalize det to one.
        Mat3 b_bar_new = s_new / p.mu + (b_bar.trace() / 3.0) * Mat3::Identity();
        const double det_b = b_bar_new.determinant();
        if (!(det_b > 0.0))
            throw DegenerateDeformationError("Herschel-Bulkley step: stretch left the SPD cone");
        b_bar_new *= std::pow(det_b, -1.0 / 3.0);

        Eigen::SelfAdjointEigenSolver<Mat3> es(b_bar_new);
        if (!(es.eigenvalues().minCoeff() > 0.0))
            throw DegenerateDeformationError("Herschel-Bulkley step: stretch left the SPD cone");
        const Mat3 sqrt_b = es.operatorSqrt();
        const Mat3 rot = polar_rotation(f_trial);
        f_elastic = std::cbrt(j) * sqrt_b * rot; // preserves J and trial orientation
    }
    return {f_elastic, kirchhoff_herschel_bulkley(f_elastic, p)};
}

Mat3 apply_return_map(const Mat3& f_trial, const Material& mat, double dt) {
    switch (mat.model.plasticity) {
    case Plasticity::None:
        return f_trial;
    case Plasticity::DruckerPrager:
        return return_map_drucker_prager(f_trial, mat.params);
    case Plasticity::VonMises:
        return return_map_von_mises(f_trial, mat.params);
    case Plasticity::HerschelBulkley:
        return herschel_bulkley_step(f_trial, mat.params, dt).first;
    }
    return f_trial;
}

Mat3 kirchhoff_stress(const Mat3& f_elastic, const Material& mat) {
    switch (mat.model.elasticity) {
    case Elasticity::FixedCorotated:
        return kirchhoff_fixed_corotated(f_elastic, mat.params);
    case Elasticity::StVK:
        return kirchhoff_stvk(f_elastic, mat.params);
    case Elasticity::NeoHookean:
        return kirchhoff_neo_hookean(f_elastic, mat.params, mat.model.neo_hookean_literal);
    case Elasticity::HerschelBulkley:
        return kirchhoff_herschel_bulkley(f_elastic, mat.params);
    }
    return Mat3::Zero();
}

double strain_energy_density(const Mat3& f, const Material& mat) {
    const MaterialParams& p = mat.params;
    const double j = f.determinant();
    switch (mat.model.elasticity) {
    case Elasticity::FixedCorotated: {
        const Svd3 s = svd3(f);
        const Vec3 d = s.sigma - Vec3::Ones();
        return p.mu * d.squaredNorm() + 0.5 * p.lambda * (j - 1.0) * (j - 1.0);
    }
    case Elasticity::StVK: {
        const Svd3 s = svd3(f);
        const Vec3 eps = s.sigma.array().abs().log();
        return p.mu * eps.squaredNorm() + 0.5 * p.lambda * eps.sum() * eps.sum();
    }
    case Elasticity::NeoHookean: {
        const Mat3 b = f * f.transpose();
        const double log_j = std::log(j);
        const double log_coeff = mat.model.neo_hookean_literal ? 1.0 : p.lambda;
        return 0.5 * p.mu * (b.trace() - 3.0) - p.mu * log_j + 0.5 * log_coeff * log_j * log_j;
    }
    case Elasticity::HerschelBulkley: {
        const Mat3 b = f * f.transpose();
        const double tr_bar = std::pow(b.determinant(), -1.0 / 3.0) * b.trace();
        return 0.25 * p.kappa * (j * j - 1.0 - 2.0 * std::log(j)) +
               0.5 * p.mu * (tr_bar - 3.0);
    }
    }
    return 0.0;
}

} // namespace splatsim
