#include "splatsim/gaussian_cloud.hpp"

#include <cmath>
#include <sstream>

#include "splatsim/error.hpp"

namespace splatsim {

Box3 GaussianCloud::bounds() const {
    Box3 b;
    for (const auto& k : kernels) b.expand(k.center);
    return b;
}

void validate_cloud(const GaussianCloud& cloud) {
    const int want = sh_coeff_count(cloud.sh_degree);
    if (cloud.sh_degree < 0 || cloud.sh_degree > 3)
        throw DataError("sh_degree must be in [0, 3]");
    for (std::size_t i = 0; i < cloud.kernels.size(); ++i) {
        const auto& k = cloud.kernels[i];
        std::ostringstream where;
        where << "kernel " << i << ": ";
        if (!(k.scale.array() > 0.0).all())
            throw DataError(where.str() + "non-positive scale");
        if (std::abs(k.rotation.norm() - 1.0) > 1e-6)
            throw DataError(where.str() + "quaternion not normalized");
        if (!(k.opacity >= 0.0 && k.opacity <= 1.0))
            throw DataError(where.str() + "opacity outside [0, 1]");
        if (static_cast<int>(k.sh.size()) != want)
            throw DataError(where.str() + "sh coefficient count mismatch");
        if (!k.center.allFinite() || !k.scale.allFinite())
            throw DataError(where.str() + "non-finite field");
    }
}

Mat3 covariance_from_factors(const GaussianKernel& kernel) {
    const Mat3 r = kernel.rotation.toRotationMatrix();
    return r * kernel.scale.array().square().matrix().asDiagonal() * r.transpose();
}

double anisotropy_metric(const GaussianCloud& cloud, double r) {
    if (r < 1.0) throw ParameterError("anisotropy ratio r must be >= 1");
    if (cloud.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& k : cloud.kernels) {
        const double ratio = k.scale.maxCoeff() / k.scale.minCoeff();
        sum += std::max(ratio, r) - r;
    }
    return sum / static_cast<double>(cloud.size());
}

GaussianCloud clamp_anisotropy(const GaussianCloud& cloud, double r) {
    if (r < 1.0) throw ParameterError("anisotropy ratio r must be >= 1");
    GaussianCloud out = cloud;
    for (auto& k : out.kernels) {
        const double cap = r * k.scale.minCoeff();
        k.scale = k.scale.cwiseMin(cap);
    }
    return out;
}

} // namespace splatsim
