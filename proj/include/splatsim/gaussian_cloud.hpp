#pragma once

#include <vector>

#include "splatsim/types.hpp"

namespace splatsim {

// One anisotropic Gaussian splat kernel in engine (linear) units.
// File representation stores scale as log and opacity as logit; the
// loader/saver convert.
struct GaussianKernel {
    Vec3 center = Vec3::Zero();
    Vec3 scale = Vec3::Ones();       // per-axis standard deviations, > 0
    Quat rotation = Quat::Identity(); // unit quaternion, file order (w, x, y, z)
    double opacity = 1.0;            // [0, 1]
    std::vector<Vec3> sh;            // (L+1)^2 RGB coefficients, sh[0] is DC
};

struct GaussianCloud {
    std::vector<GaussianKernel> kernels;
    int sh_degree = 0;

    std::size_t size() const { return kernels.size(); }
    bool empty() const { return kernels.empty(); }

    Box3 bounds() const;
};

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Throws DataError if any kernel violates its invariants
// (positive scales, unit quaternion, opacity range, coefficient count).
void validate_cloud(const GaussianCloud& cloud);

// World covariance A = R diag(s^2) R^T. Symmetric positive definite with
// eigenvalues equal to the squared scales.
Mat3 covariance_from_factors(const GaussianKernel& kernel);

// Mean over kernels of max(max(s)/min(s), r) - r. Zero iff every kernel's
// major/minor axis ratio is at most r. Requires r >= 1.
double anisotropy_metric(const GaussianCloud& cloud, double r);

// Shrinks each kernel's larger axes so that every axis ratio is <= r; the
// smallest axis is never touched and nothing is ever inflated.
GaussianCloud clamp_anisotropy(const GaussianCloud& cloud, double r);

} // namespace splatsim
