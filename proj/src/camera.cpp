#include "splatsim/camera.hpp"

#include <cmath>

#include "splatsim/error.hpp"

namespace splatsim {

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg,
                       int width, int height, double near) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right); // +y runs down the image

    Camera cam;
    cam.R.row(0) = right;
    cam.R.row(1) = down;
    cam.R.row(2) = forward;
    cam.t = -(cam.R * eye);
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5 * height / std::tan(0.5 * fov_y_deg * M_PI / 180.0);
    cam.fx = cam.fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.near = near;
    validate_camera(cam);
    return cam;
}

void validate_camera(const Camera& cam) {
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) throw ParameterError("camera focal lengths must be positive");
    if (cam.width <= 0 || cam.height <= 0) throw ParameterError("camera image dims must be positive");
    if (!(cam.near > 0.0)) throw ParameterError("camera near plane must be positive");
    if ((cam.R * cam.R.transpose() - Mat3::Identity()).norm() > 1e-8)
        throw ParameterError("camera rotation is not orthogonal");
}

} // namespace splatsim
