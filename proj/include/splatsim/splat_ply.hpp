#pragma once

#include <string>

#include "splatsim/gaussian_cloud.hpp"

namespace splatsim {

enum class PlyFormat { BinaryLittleEndian, Ascii };

// Reads a splat point cloud in the de-facto PLY convention
// (x y z, f_dc_0..2, f_rest_*, opacity, scale_0..2, rot_0..3).
// Stored log-scales are exponentiated, the opacity logit is passed through a
// sigmoid, and quaternions are normalized; kernel order follows the file.
// Unknown properties are skipped with a warning (nx/ny/nz silently).
GaussianCloud load_gaussian_ply(const std::string& path);

// Inverse of load_gaussian_ply: writes log scales, logit opacities (clamped to
// [1e-6, 1 - 1e-6] first) and zero normals, as float32 fields readable by
// standard splat viewers.
void save_gaussian_ply(const GaussianCloud& cloud, const std::string& path,
                       PlyFormat format = PlyFormat::BinaryLittleEndian);

} // namespace splatsim
