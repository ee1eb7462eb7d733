#include <doctest.h>

#include <cmath>
#include <fstream>

#include "splatsim/image.hpp"
#include "splatsim/renderer.hpp"

#include "test_util.hpp"

using namespace splatsim;
using test_util::TempDir;

namespace {

Camera axis_camera(int size = 64, double fov = 60.0) {
    // at the origin looking down +z, +y down the image
    return Camera::look_at(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitY() * -1.0, fov, size, size);
}

GaussianCloud one_kernel(const Vec3& pos, double scale, double opacity, const Vec3& dc) {
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    GaussianKernel k;
    k.center = pos;
    k.scale = Vec3::Constant(scale);
    k.opacity = opacity;
    k.sh = {dc};
    cloud.kernels = {k};
    return cloud;
}

// direction such that SH color is view-independent: zero higher coefficients
constexpr double kC0 = 0.28209479177387814;

} // namespace

TEST_SUITE("renderer") {

TEST_CASE("projection of an on-axis isotropic kernel") {
    const Camera cam = axis_camera();
    const double z = 2.0, s = 0.05;
    const auto splat = project_gaussian(Vec3(0, 0, z), s * s * Mat3::Identity(), cam);
    REQUIRE(splat.has_value());
    CHECK(splat->depth == doctest::Approx(z));
    CHECK(splat->mean.x() == doctest::Approx(cam.cx));
    CHECK(splat->mean.y() == doctest::Approx(cam.cy));
    const double want = cam.fx * s / z; // pixel-space std dev
    const Mat2 no_lp = splat->cov - 0.3 * Mat2::Identity();
    CHECK(std::sqrt(no_lp(0, 0)) == doctest::Approx(want).epsilon(0.01));
    CHECK(std::sqrt(no_lp(1, 1)) == doctest::Approx(want).epsilon(0.01));
    CHECK(std::abs(no_lp(0, 1)) < 1e-9);
}

TEST_CASE("kernels behind the near plane are culled") {
    const Camera cam = axis_camera();
    CHECK(!project_gaussian(Vec3(0, 0, -1.0), 0.01 * Mat3::Identity(), cam).has_value());
    CHECK(!project_gaussian(Vec3(0, 0, 0.0), 0.01 * Mat3::Identity(), cam).has_value());
}

TEST_CASE("far off-screen kernels are culled, near-edge ones are kept") {
    const Camera cam = axis_camera();
    CHECK(!project_gaussian(Vec3(50.0, 0, 2.0), 1e-4 * Mat3::Identity(), cam).has_value());
    CHECK(project_gaussian(Vec3(0.1, 0, 2.0), 1e-4 * Mat3::Identity(), cam).has_value());
}

TEST_CASE("doubling the depth halves the projected deviation") {
    const Camera cam = axis_camera();
    const Mat3 cov = 0.05 * 0.05 * Mat3::Identity();
    const auto near_splat = project_gaussian(Vec3(0, 0, 2.0), cov, cam);
    const auto far_splat = project_gaussian(Vec3(0, 0, 4.0), cov, cam);
    REQUIRE(near_splat.has_value());
    REQUIRE(far_splat.has_value());
    const double sd_near = std::sqrt(near_splat->cov(0, 0) - 0.3);
    const double sd_far = std::sqrt(far_splat->cov(0, 0) - 0.3);
    CHECK(sd_near / sd_far == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("sh_eval: degree zero is view independent with the 0.5 offset") {
    std::vector<Vec3> coeffs = {Vec3(0.2, 0.4, -0.1)};
    std::mt19937_64 rng(3);
    const Vec3 want = (Vec3::Constant(0.5) + kC0 * coeffs[0]).cwiseMax(0.0);
    for (int i = 0; i < 20; ++i) {
        const Vec3 d = test_util::random_unit(rng);
        CHECK((sh_eval(coeffs, d, Mat3::Identity()) - want).norm() < 1e-14);
    }
}

TEST_CASE("sh_eval: colors are clamped nonnegative") {
    std::vector<Vec3> coeffs = {Vec3(-10.0, 0.0, 0.0)};
    const Vec3 c = sh_eval(coeffs, Vec3::UnitZ(), Mat3::Identity());
    CHECK(c.x() == 0.0);
    CHECK(c.y() == doctest::Approx(0.5));
}

TEST_CASE("sh_eval equivariance: rotating basis and direction together is invariant") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.5);
    for (int degree = 1; degree <= 3; ++degree) {
        std::vector<Vec3> coeffs(sh_coeff_count(degree));
        for (auto& c : coeffs) c = Vec3(n(rng), n(rng), n(rng));
        for (int i = 0; i < 20; ++i) {
            const Mat3 r = test_util::random_rotation(rng);
            const Vec3 d0 = test_util::random_unit(rng);
            const Vec3 a = sh_eval(coeffs, r * d0, r);
            const Vec3 b = sh_eval(coeffs, d0, Mat3::Identity());
            CHECK((a - b).norm() < 1e-12);
        }
    }
}

TEST_CASE("render: empty cloud gives a black image") {
    GaussianCloud empty;
    const Image img = render(SplatDrawList::from_cloud(empty), axis_camera(32));
    for (float v : img.rgb) CHECK(v == 0.0f);
}

TEST_CASE("render: single opaque splat at a pixel center") {
    const Camera cam = axis_camera(64);
    // place the kernel so its projected mean hits the center of pixel (32, 32)
    const double z = 2.0;
    const double px = 32.5, py = 32.5;
    const Vec3 pos((px - cam.cx) * z / cam.fx, (py - cam.cy) * z / cam.fy, z);
    const Vec3 dc((1.0 - 0.5) / kC0, (0.8 - 0.5) / kC0, (0.25 - 0.5) / kC0);
    const GaussianCloud cloud = one_kernel(pos, 0.1, 1.0, dc);
    const Image img = render(SplatDrawList::from_cloud(cloud), cam);
    const float* p = img.pixel(32, 32);
    // alpha clamps to 0.99 at the mean
    CHECK(p[0] == doctest::Approx(0.99 * 1.0).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.99 * 0.8).epsilon(1e-4));
    CHECK(p[2] == doctest::Approx(0.99 * 0.25).epsilon(1e-4));
}

TEST_CASE("render: two overlapping splats composite front to back") {
    const Camera cam = axis_camera(64);
    const double z1 = 2.0, z2 = 3.0;
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    GaussianKernel front;
    front.center = Vec3(0, 0, z1);
    front.scale = Vec3::Constant(0.08);
    front.opacity = 0.6;
    front.sh = {Vec3((1.0 - 0.5) / kC0, (0.0 - 0.5) / kC0, (0.0 - 0.5) / kC0)}; // red
    GaussianKernel back = front;
    back.center = Vec3(0.01, 0, z2);
    back.opacity = 0.7;
    back.sh = {Vec3((0.0 - 0.5) / kC0, (1.0 - 0.5) / kC0, (0.0 - 0.5) / kC0)}; // green
    cloud.kernels = {back, front}; // file order differs from depth order
    const Image img = render(SplatDrawList::from_cloud(cloud), cam);

    // hand-evaluated compositing at a probe pixel
    const int pxi = 33, pyi = 31;
    const Vec2 pix(pxi + 0.5, pyi + 0.5);
    auto alpha_at = [&](const GaussianKernel& k) {
        const auto splat = project_gaussian(k.center, covariance_from_factors(k), cam);
        REQUIRE(splat.has_value());
        const Vec2 d = pix - splat->mean;
        const double q = d.dot(splat->cov.inverse() * d);
        REQUIRE(q <= 9.0); // probe must lie inside both supports
        return std::min(0.99, k.opacity * std::exp(-0.5 * q));
    };
    const double a_front = alpha_at(front);
    const double a_back = alpha_at(back);
    const Vec3 c_front(1, 0, 0), c_back(0, 1, 0);
    const Vec3 want = a_front * c_front + (1.0 - a_front) * a_back * c_back;

    const float* p = img.pixel(pxi, pyi);
    CHECK(p[0] == doctest::Approx(want.x()).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(want.y()).epsilon(1e-5));
    CHECK(p[2] == doctest::Approx(want.z()).epsilon(1e-5));
}

TEST_CASE("render: compositing weights never sum above one") {
    std::mt19937_64 rng(11);
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    for (int i = 0; i < 60; ++i) {
        GaussianKernel k = test_util::random_kernel(rng, 0);
        k.center = Vec3(0.4 * k.center.x(), 0.4 * k.center.y(), 2.0 + 0.5 * k.center.z());
        k.scale = Vec3::Constant(0.1);
        k.sh = {Vec3::Constant(0.5 / kC0)}; // color exactly (1,1,1)
        cloud.kernels.push_back(k);
    }
    const Image img = render(SplatDrawList::from_cloud(cloud), axis_camera(48));
    for (float v : img.rgb) CHECK(v <= 1.0f + 1e-6f);
}

TEST_CASE("render: deterministic for identical input") {
    std::mt19937_64 rng(13);
    GaussianCloud cloud;
    cloud.sh_degree = 1;
    for (int i = 0; i < 40; ++i) {
        GaussianKernel k = test_util::random_kernel(rng, 1);
        k.center = Vec3(0.3 * k.center.x(), 0.3 * k.center.y(), 2.0 + 0.4 * k.center.z());
        cloud.kernels.push_back(k);
    }
    const Image a = render(SplatDrawList::from_cloud(cloud), axis_camera(48));
    const Image b = render(SplatDrawList::from_cloud(cloud), axis_camera(48));
    CHECK(a.rgb == b.rgb);
}

TEST_CASE("rigid-scene invariance and the fixed-harmonics ablation") {
    std::mt19937_64 rng(17);
    GaussianCloud cloud;
    cloud.sh_degree = 2;
    for (int i = 0; i < 50; ++i) {
        GaussianKernel k = test_util::random_kernel(rng, 2);
        k.center = Vec3(0.35 * k.center.x(), 0.35 * k.center.y(), 2.0 + 0.5 * k.center.z());
        cloud.kernels.push_back(k);
    }
    const Camera cam = axis_camera(64);
    SplatDrawList base = SplatDrawList::from_cloud(cloud);
    base.sh_rotations.assign(cloud.size(), Mat3::Identity());
    const Image img_base = render(base, cam);

    // rotate scene and camera together
    const Mat3 r = test_util::random_rotation(rng);
    GaussianCloud rotated = cloud;
    SplatDrawList rot_list;
    rot_list.sh_source = &rotated;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        rotated.kernels[i].center = r * cloud.kernels[i].center;
        rot_list.centers.push_back(rotated.kernels[i].center);
        rot_list.covariances.push_back(
            r * covariance_from_factors(cloud.kernels[i]) * r.transpose());
        rot_list.sh_rotations.push_back(r);
        rot_list.opacities.push_back(cloud.kernels[i].opacity);
    }
    Camera rotated_cam = cam;
    rotated_cam.R = cam.R * r.transpose();
    const Image img_rot = render(rot_list, rotated_cam);

    float max_diff = 0.0f;
    for (std::size_t i = 0; i < img_base.rgb.size(); ++i)
        max_diff = std::max(max_diff, std::abs(img_base.rgb[i] - img_rot.rgb[i]));
    CHECK(max_diff <= 1e-6f);

    // disabling SH rotation must change pixels (degree >= 1 coefficients)
    SplatDrawList fixed_harmonics = rot_list;
    fixed_harmonics.rotate_sh = false;
    const Image img_fixed = render(fixed_harmonics, rotated_cam);
    float ablation_diff = 0.0f;
    for (std::size_t i = 0; i < img_base.rgb.size(); ++i)
        ablation_diff = std::max(ablation_diff, std::abs(img_base.rgb[i] - img_fixed.rgb[i]));
    CHECK(ablation_diff > 1e-3f);
}

TEST_CASE("ppm round trip preserves bytes") {
    TempDir dir("img");
    Image img = make_image(7, 5);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : img.rgb) v = static_cast<float>(u(rng));
    write_ppm(img, dir.file("a.ppm"));
    const Image back = read_ppm(dir.file("a.ppm"));
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (std::size_t i = 0; i < img.rgb.size(); ++i)
        CHECK(float_to_byte(back.rgb[i]) == float_to_byte(img.rgb[i]));

    write_ppm(back, dir.file("b.ppm"));
    std::ifstream fa(dir.file("a.ppm"), std::ios::binary);
    std::ifstream fb(dir.file("b.ppm"), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("png writer emits a well-formed signature and chunks") {
    TempDir dir("img");
    Image img = make_image(9, 4);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = (i % 7) / 7.0f;
    write_png(img, dir.file("x.png"));
    std::ifstream in(dir.file("x.png"), std::ios::binary);
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(data.size() > 40);
    CHECK(static_cast<unsigned char>(data[0]) == 0x89);
    CHECK(data.substr(1, 3) == "PNG");
    CHECK(data.find("IHDR") != std::string::npos);
    CHECK(data.find("IDAT") != std::string::npos);
    CHECK(data.rfind("IEND") == data.size() - 8);
}

} // TEST_SUITE
