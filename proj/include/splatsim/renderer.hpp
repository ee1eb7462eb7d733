#pragma once

#include <optional>
#include <span>
#include <vector>

#include "splatsim/camera.hpp"
#include "splatsim/gaussian_cloud.hpp"
#include "splatsim/image.hpp"
#include "splatsim/types.hpp"

namespace splatsim {

// Kernel projected to the image plane.
struct Splat2D {
    Vec2 mean;     // pixel coordinates
    Mat2 cov;      // pixel-space covariance, low-pass included
    double depth;  // camera-space z
    Vec3 color;    // SH-evaluated RGB
    double opacity;
    int index;     // source kernel, tie-break for the depth sort
};

// Everything the compositor needs per kernel: world center, world covariance,
// accumulated SH rotation, plus appearance shared with the source cloud.
struct SplatDrawList {
    std::vector<Vec3> centers;
    std::vector<Mat3> covariances;
    std::vector<Mat3> sh_rotations; // may be empty => identity
    std::vector<double> opacities;
    const GaussianCloud* sh_source = nullptr; // coefficient storage
    bool rotate_sh = true;

    static SplatDrawList from_cloud(const GaussianCloud& cloud);
    std::size_t size() const { return centers.size(); }
};

// EWA-style projection: perspective mean, 2D covariance J W a W^T J^T plus a
// 0.3-pixel low-pass. Returns nullopt when the kernel is behind the near
// plane or farther than 3 sigma outside the image.
std::optional<Splat2D> project_gaussian(const Vec3& center, const Mat3& cov_world,
                                        const Camera& cam);

// Real spherical harmonics (degree <= 3) evaluated at R^T d, dotted with the
// coefficients, plus the 0.5 DC offset; channels clamped to >= 0.
Vec3 sh_eval(std::span<const Vec3> coeffs, const Vec3& d, const Mat3& R_sh);

// Front-to-back alpha compositing over a global (depth, index) sort.
// Per-pixel support is truncated at 3 sigma and accumulation stops once
// transmittance drops below 1e-12; output is deterministic for fixed input.
Image render(const SplatDrawList& list, const Camera& cam);

} // namespace splatsim
