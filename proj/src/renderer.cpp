#include "splatsim/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatsim/error.hpp"
#include "splatsim/threading.hpp"

namespace splatsim {

SplatDrawList SplatDrawList::from_cloud(const GaussianCloud& cloud) {
    SplatDrawList list;
    list.centers.reserve(cloud.size());
    list.covariances.reserve(cloud.size());
    list.opacities.reserve(cloud.size());
    for (const auto& k : cloud.kernels) {
        list.centers.push_back(k.center);
        list.covariances.push_back(covariance_from_factors(k));
        list.opacities.push_back(k.opacity);
    }
    list.sh_source = &cloud;
    return list;
}

std::optional<Splat2D> project_gaussian(const Vec3& center, const Mat3& cov_world,
                                        const Camera& cam) {
    const Vec3 xc = cam.R * center + cam.t;
    if (xc.z() <= cam.near) return std::nullopt;

    const double inv_z = 1.0 / xc.z();
    const Vec2 mean(cam.fx * xc.x() * inv_z + cam.cx, cam.fy * xc.y() * inv_z + cam.cy);

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx * inv_z, 0.0, -cam.fx * xc.x() * inv_z * inv_z,
           0.0, cam.fy * inv_z, -cam.fy * xc.y() * inv_z * inv_z;
    Mat2 cov = jac * (cam.R * cov_world * cam.R.transpose()) * jac.transpose();
    cov += 0.3 * Mat2::Identity(); // low-pass so every splat covers a pixel

    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double det = cov.determinant();
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double radius = 3.0 * std::sqrt(std::max(0.0, lambda_max));
    if (mean.x() + radius < 0.0 || mean.x() - radius > cam.width ||
        mean.y() + radius < 0.0 || mean.y() - radius > cam.height)
        return std::nullopt;

    Splat2D s;
    s.mean = mean;
    s.cov = cov;
    s.depth = xc.z();
    s.color = Vec3::Zero();
    s.opacity = 0.0;
    s.index = -1;
    return s;
}

Vec3 sh_eval(std::span<const Vec3> coeffs, const Vec3& d_in, const Mat3& R_sh) {
    const Vec3 d = (R_sh.transpose() * d_in).normalized();
    const double x = d.x(), y = d.y(), z = d.z();

    // Real SH basis constants in the splatting convention.
    static constexpr double C0 = 0.28209479177387814;
    static constexpr double C1 = 0.4886025119029199;
    static constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792,
                                     0.31539156525252005, -1.0925484305920792,
                                     0.5462742152960396};
    static constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554,
                                     -0.4570457994644658, 0.3731763325901154,
                                     -0.4570457994644658, 1.445305721320277,
                                     -0.5900435899266435};

    Vec3 color = Vec3::Constant(0.5) + C0 * coeffs[0];
    if (coeffs.size() >= 4) {
        color += -C1 * y * coeffs[1];
        color += C1 * z * coeffs[2];
        color += -C1 * x * coeffs[3];
    }
    if (coeffs.size() >= 9) {
        const double xx = x * x, yy = y * y, zz = z * z;
        color += C2[0] * x * y * coeffs[4];
        color += C2[1] * y * z * coeffs[5];
        color += C2[2] * (2.0 * zz - xx - yy) * coeffs[6];
        color += C2[3] * x * z * coeffs[7];
        color += C2[4] * (xx - yy) * coeffs[8];
    }
    if (coeffs.size() >= 16) {
        const double xx = x * x, yy = y * y, zz = z * z;
        color += C3[0] * y * (3.0 * xx - yy) * coeffs[9];
        color += C3[1] * x * y * z * coeffs[10];
        color += C3[2] * y * (4.0 * zz - xx - yy) * coeffs[11];
        color += C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * coeffs[12];
        color += C3[4] * x * (4.0 * zz - xx - yy) * coeffs[13];
        color += C3[5] * z * (xx - yy) * coeffs[14];
        color += C3[6] * x * (xx - 3.0 * yy) * coeffs[15];
    }
    return color.cwiseMax(0.0);
}

Image render(const SplatDrawList& list, const Camera& cam) {
    validate_camera(cam);
    if (!list.sh_source) throw DataError("draw list has no SH source cloud");
    if (list.covariances.size() != list.size() || list.opacities.size() != list.size() ||
        list.sh_source->size() != list.size())
        throw DataError("draw list arrays disagree in length");

    const Vec3 cam_pos = cam.position();
    std::vector<Splat2D> splats;
    splats.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto proj = project_gaussian(list.centers[i], list.covariances[i], cam);
        if (!proj) continue;
        const Mat3 rot = (list.rotate_sh && i < list.sh_rotations.size())
                             ? list.sh_rotations[i]
                             : Mat3::Identity();
        const Vec3 d = (list.centers[i] - cam_pos).normalized();
        proj->color = sh_eval(list.sh_source->kernels[i].sh, d, rot);
        proj->opacity = list.opacities[i];
        proj->index = static_cast<int>(i);
        splats.push_back(*proj);
    }
    std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });

    Image img = make_image(cam.width, cam.height);

    // Depth-ordered splat lists per 16x16 tile; tiles composite independently.
    constexpr int kTile = 16;
    const int tiles_x = (cam.width + kTile - 1) / kTile;
    const int tiles_y = (cam.height + kTile - 1) / kTile;
    std::vector<std::vector<int>> tile_splats(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (std::size_t si = 0; si < splats.size(); ++si) {
        const Splat2D& s = splats[si];
        const double mid = 0.5 * (s.cov(0, 0) + s.cov(1, 1));
        const double det = s.cov.determinant();
        const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        const double radius = 3.0 * std::sqrt(std::max(0.0, lambda_max));
        const int tx0 = std::max(0, static_cast<int>((s.mean.x() - radius) / kTile));
        const int tx1 = std::min(tiles_x - 1, static_cast<int>((s.mean.x() + radius) / kTile));
        const int ty0 = std::max(0, static_cast<int>((s.mean.y() - radius) / kTile));
        const int ty1 = std::min(tiles_y - 1, static_cast<int>((s.mean.y() + radius) / kTile));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                tile_splats[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(
                    static_cast<int>(si));
    }

#ifdef _OPENMP
#pragma omp parallel for num_threads(worker_count()) schedule(static)
#endif
    for (long long tile = 0; tile < static_cast<long long>(tile_splats.size()); ++tile) {
        const int tx = static_cast<int>(tile % tiles_x);
        const int ty = static_cast<int>(tile / tiles_x);
        const auto& ids = tile_splats[tile];
        if (ids.empty()) continue;
        const int x0 = tx * kTile, x1 = std::min(cam.width, x0 + kTile);
        const int y0 = ty * kTile, y1 = std::min(cam.height, y0 + kTile);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                const Vec2 pix(x + 0.5, y + 0.5);
                Vec3 color = Vec3::Zero();
                double transmittance = 1.0;
                for (int si : ids) {
                    const Splat2D& s = splats[si];
                    const Vec2 delta = pix - s.mean;
                    const double det = s.cov.determinant();
                    if (!(det > 0.0)) continue;
                    const Mat2 inv = s.cov.inverse();
                    const double q = delta.dot(inv * delta);
                    if (q > 9.0) continue; // 3 sigma support
                    const double alpha =
                        std::min(0.99, std::max(0.0, s.opacity * std::exp(-0.5 * q)));
                    color += transmittance * alpha * s.color;
                    transmittance *= 1.0 - alpha;
                    if (transmittance < 1e-12) break; // residual far below float pixel precision
                }
                float* px = img.pixel(x, y);
                px[0] = static_cast<float>(color.x());
                px[1] = static_cast<float>(color.y());
                px[2] = static_cast<float>(color.z());
            }
    }
    return img;
}

} // namespace splatsim
