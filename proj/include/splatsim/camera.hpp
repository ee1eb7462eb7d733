#pragma once

#include "splatsim/types.hpp"

namespace splatsim {

// Pinhole camera; x_cam = R x_world + t, +z looks forward.
struct Camera {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    double near = 0.01;

    Vec3 position() const { return -(R.transpose() * t); }

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                          double fov_y_deg, int width, int height, double near = 0.01);
};

void validate_camera(const Camera& cam);

} // namespace splatsim
