#include "splatsim/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include "splatsim/error.hpp"
#include "splatsim/internal_fill.hpp"
#include "splatsim/log.hpp"
#include "splatsim/renderer.hpp"
#include "splatsim/splat_ply.hpp"

namespace splatsim {

namespace fs = std::filesystem;

namespace {

std::string frame_name(int frame, const char* ext) {
    std::ostringstream ss;
    ss << "frame_" << std::setw(4) << std::setfill('0') << frame << "." << ext;
    return ss.str();
}

KinematicsMode mode_for_material(const Material& mat, const std::string& requested) {
    if (requested == "total") return KinematicsMode::TotalF;
    if (requested == "incremental") return KinematicsMode::Incremental;
    // auto: plastic flow invalidates the accumulated F, so integrate the rate form
    return mat.model.plasticity == Plasticity::None ? KinematicsMode::TotalF
                                                    : KinematicsMode::Incremental;
}

std::vector<Camera> load_camera_track(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open camera path '" + path + "'");
    std::vector<Camera> cams;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path + ": bad camera line: " + e.what());
        }
        CameraConfig c;
        auto vec = [&](const char* key) {
            const auto& a = j.at(key);
            return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
        };
        c.position = vec("position");
        c.look_at = vec("look_at");
        if (j.contains("up")) c.up = vec("up");
        c.fov_y_deg = j.value("fov_y_deg", c.fov_y_deg);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.near = j.value("near", c.near);
        cams.push_back(c.build());
    }
    if (cams.empty()) throw ParseError(path + ": camera path file is empty");
    return cams;
}

// Scale/rotation factors from a world covariance, det(+1) quaternion with a
// canonical sign so exports are reproducible.
void factors_from_covariance(const Mat3& cov, Vec3& scale, Quat& rotation) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (cov + cov.transpose()));
    Vec3 eig = es.eigenvalues().cwiseMax(1e-30);
    Mat3 q = es.eigenvectors();
    if (q.determinant() < 0.0) q.col(0) *= -1.0;
    scale = eig.cwiseSqrt();
    rotation = Quat(q);
    rotation.normalize();
    if (rotation.w() < 0.0) rotation.coeffs() *= -1.0;
}

} // namespace

PreparedScene prepare_scene(const SceneConfig& cfg) {
    ValidationReport report = validate_scene_config(cfg);
    if (!report.ok())
        throw ParameterError("scene config failed validation:\n" + report.to_json());

    PreparedScene scene;
    GaussianCloud cloud = load_gaussian_ply(cfg.input_ply);
    validate_cloud(cloud);

    scene.anisotropy_r = cfg.anisotropy_r.value_or(1.0);
    if (cfg.anisotropy_r) cloud = clamp_anisotropy(cloud, *cfg.anisotropy_r);

    // Simulation frame: either the region box mapped to the edge-2 cube, or
    // the explicit domain taken verbatim.
    Box3 domain;
    if (cfg.normalize) {
        const Box3 region = cfg.sim_region ? *cfg.sim_region : cloud.bounds();
        scene.transform.center = region.center();
        scene.transform.scale = 2.0 / std::max(region.extent().maxCoeff(), 1e-12);
        domain.min = Vec3::Constant(-1.0);
        domain.max = Vec3::Constant(1.0);
    } else {
        domain = *cfg.domain;
    }
    for (auto& k : cloud.kernels) {
        k.center = scene.transform.to_sim(k.center);
        k.scale *= scene.transform.scale;
    }

    const double dx = domain.extent().maxCoeff() / cfg.grid_resolution;
    Vec3i cells;
    for (int a = 0; a < 3; ++a)
        cells[a] = std::max(1, static_cast<int>(std::lround(domain.extent()[a] / dx))) +
                   2 * cfg.margin_cells;
    const Vec3 origin = domain.min - dx * Vec3::Constant(cfg.margin_cells);
    scene.grid = EulerianGrid(origin, dx, cells + Vec3i::Ones());

    scene.original_count = cloud.size();
    if (cfg.fill.enabled) {
        FillConfig fill_cfg = cfg.fill.config;
        // Thresholds are evaluated on the simulation-space field; kernel
        // scales shrink by the normalization, opacities do not.
        const OpacityGrid og = rasterize_opacity(cloud, origin, dx, cells);
        const auto selected = select_fill_cells(og, fill_cfg);
        auto added = spawn_fill_particles(selected, og, cloud, fill_cfg);
        scene.fill_count = added.size();
        cloud.kernels.insert(cloud.kernels.end(), std::make_move_iterator(added.begin()),
                             std::make_move_iterator(added.end()));
    }

    // Materials: later assignments win; fill kernels inherit by position.
    for (const auto& m : cfg.materials) scene.materials.push_back(m.material);
    scene.material_ids.assign(cloud.size(), -1);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (std::size_t m = 0; m < cfg.materials.size(); ++m) {
            Region region = cfg.materials[m].region;
            if (!region.all) region.box = scene.transform.to_sim(region.box);
            if (region.contains(cloud.kernels[i].center))
                scene.material_ids[i] = static_cast<int>(m);
        }
        if (scene.material_ids[i] < 0)
            throw ParameterError("kernel " + std::to_string(i) +
                                 " is not covered by any material region");
    }

    scene.sim.dt = cfg.dt;
    scene.sim.gravity = cfg.gravity * scene.transform.scale;
    scene.sim.cfl_limit = cfg.cfl;
    scene.sim.boundary = cfg.boundary;
    scene.sim.rpic_damping = cfg.rpic_damping;
    scene.sim.boundary_margin_cells = std::min(cfg.margin_cells, 2);
    scene.sim.substeps_per_frame =
        std::max(1, static_cast<int>(std::lround(1.0 / (cfg.fps * cfg.dt))));

    scene.particles = initialize_particles(cloud, scene.material_ids, scene.materials, scene.grid);
    for (auto& p : scene.particles) {
        const Vec3 x_input = scene.transform.to_input(p.x);
        for (const auto& edit : cfg.velocity_edits) {
            if (!edit.region.contains(x_input)) continue;
            if (edit.kind == VelocityEdit::Kind::Linear) {
                p.v = edit.velocity * scene.transform.scale;
            } else {
                const Vec3 rel = x_input - edit.center;
                p.v = edit.omega * edit.axis.cross(rel) * scene.transform.scale;
            }
        }
    }

    scene.kinematics.states.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        auto& s = scene.kinematics.states[i];
        s.A0 = covariance_from_factors(cloud.kernels[i]);
        s.a = s.A0;
        s.mode = mode_for_material(scene.materials[scene.material_ids[i]], cfg.kinematics_mode);
    }

    scene.cloud = std::move(cloud);
    return scene;
}

GaussianCloud export_cloud(const PreparedScene& scene, const MpmEngine& engine,
                           bool any_steps_taken) {
    GaussianCloud out = scene.cloud;
    const auto& particles = engine.particles();
    const double inv_s = 1.0 / scene.transform.scale;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.kernels[i].center = scene.transform.to_input(particles[i].x);
        if (any_steps_taken) {
            Vec3 scale;
            Quat rotation;
            factors_from_covariance(scene.kinematics.states[i].a, scale, rotation);
            out.kernels[i].scale = scale * inv_s;
            out.kernels[i].rotation = rotation;
        } else {
            out.kernels[i].scale *= inv_s;
        }
    }
    return out;
}

void run_simulation(const SceneConfig& cfg) {
    PreparedScene scene = prepare_scene(cfg);

    fs::create_directories(cfg.output_dir);

    std::vector<Camera> cameras;
    if (cfg.render.enabled) {
        if (!cfg.render.camera_path.empty())
            cameras = load_camera_track(cfg.render.camera_path);
        else
            cameras.push_back(cfg.render.camera->build());
    }

    MpmEngine engine(scene.grid, scene.particles, scene.materials, scene.sim);
    KinematicsUpdater& kin = scene.kinematics;
    engine.post_step_hook = [&](const MpmEngine& e) { kin.step(e.particles(), e.config().dt); };

    std::ofstream diag(fs::path(cfg.output_dir) / "diagnostics.csv");
    if (!diag) throw IoError("cannot write diagnostics.csv in " + cfg.output_dir);
    diag << "frame,time,mass,momentum_x,momentum_y,momentum_z,kinetic_energy,elastic_energy,"
            "max_speed,cfl_ratio,fill_count,anisotropy_metric\n";
    diag << std::setprecision(17);

    auto emit_frame = [&](int frame) {
        const GaussianCloud out = export_cloud(scene, engine, engine.step_count() > 0);
        if (cfg.export_ply)
            save_gaussian_ply(out, (fs::path(cfg.output_dir) / frame_name(frame, "ply")).string());

        if (cfg.render.enabled && frame % std::max(1, cfg.render.every) == 0) {
            SplatDrawList list;
            list.centers.reserve(out.size());
            const double inv_s2 = 1.0 / (scene.transform.scale * scene.transform.scale);
            for (std::size_t i = 0; i < out.size(); ++i) {
                list.centers.push_back(out.kernels[i].center);
                list.covariances.push_back(scene.kinematics.states[i].a * inv_s2);
                list.sh_rotations.push_back(scene.kinematics.states[i].R_sh);
                list.opacities.push_back(out.kernels[i].opacity);
            }
            list.sh_source = &out;
            const Camera& cam = cameras[std::min<std::size_t>(frame, cameras.size() - 1)];
            const Image img = render(list, cam);
            if (cfg.render.write_ppm)
                write_ppm(img, (fs::path(cfg.output_dir) / frame_name(frame, "ppm")).string());
            if (cfg.render.write_png)
                write_png(img, (fs::path(cfg.output_dir) / frame_name(frame, "png")).string());
        }

        const Vec3 mom = engine.total_particle_momentum();
        diag << frame << "," << engine.step_count() * scene.sim.dt << "," << engine.total_mass()
             << "," << mom.x() << "," << mom.y() << "," << mom.z() << ","
             << engine.kinetic_energy() << "," << engine.elastic_energy() << ","
             << engine.max_particle_speed() << "," << engine.cfl_ratio() << ","
             << scene.fill_count << "," << anisotropy_metric(out, std::max(1.0, scene.anisotropy_r))
             << "\n";
    };

    emit_frame(0);
    for (int frame = 1; frame < cfg.frames; ++frame) {
        for (int s = 0; s < scene.sim.substeps_per_frame; ++s) engine.advance_step();
        emit_frame(frame);
    }
    diag.flush();
    if (!diag) throw IoError("write failure on diagnostics.csv");
}

std::string FrameDiff::to_json() const {
    nlohmann::json j = {
        {"kernels", kernels},
        {"position", {{"max", position.max_abs}, {"mean", position.mean_abs}}},
        {"scale", {{"max", scale.max_abs}, {"mean", scale.mean_abs}}},
        {"rotation", {{"max", rotation.max_abs}, {"mean", rotation.mean_abs}}},
        {"opacity", {{"max", opacity.max_abs}, {"mean", opacity.mean_abs}}},
        {"sh", {{"max", sh.max_abs}, {"mean", sh.mean_abs}}},
    };
    return j.dump(2);
}

FrameDiff diff_frames(const GaussianCloud& a, const GaussianCloud& b) {
    if (a.size() != b.size() || a.sh_degree != b.sh_degree)
        throw DataError("frame diff: kernel count or SH degree mismatch");
    FrameDiff d;
    d.kernels = a.size();
    std::size_t n_sh = 0;
    auto track = [](FieldDiff& f, double abs_diff, std::size_t& count) {
        f.max_abs = std::max(f.max_abs, abs_diff);
        f.mean_abs += abs_diff;
        ++count;
    };
    std::size_t n_pos = 0, n_scale = 0, n_rot = 0, n_op = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& ka = a.kernels[i];
        const auto& kb = b.kernels[i];
        for (int c = 0; c < 3; ++c) {
            track(d.position, std::abs(ka.center[c] - kb.center[c]), n_pos);
            track(d.scale, std::abs(ka.scale[c] - kb.scale[c]), n_scale);
        }
        // Quaternions compared up to sign (q and -q are the same rotation).
        const double direct = (ka.rotation.coeffs() - kb.rotation.coeffs()).cwiseAbs().maxCoeff();
        const double flipped = (ka.rotation.coeffs() + kb.rotation.coeffs()).cwiseAbs().maxCoeff();
        track(d.rotation, std::min(direct, flipped), n_rot);
        track(d.opacity, std::abs(ka.opacity - kb.opacity), n_op);
        for (std::size_t s = 0; s < ka.sh.size(); ++s)
            for (int c = 0; c < 3; ++c) track(d.sh, std::abs(ka.sh[s][c] - kb.sh[s][c]), n_sh);
    }
    auto finish = [](FieldDiff& f, std::size_t n) {
        if (n > 0) f.mean_abs /= static_cast<double>(n);
    };
    finish(d.position, n_pos);
    finish(d.scale, n_scale);
    finish(d.rotation, n_rot);
    finish(d.opacity, n_op);
    finish(d.sh, n_sh);
    return d;
}

FrameDiff diff_frames(const std::string& path_a, const std::string& path_b) {
    return diff_frames(load_gaussian_ply(path_a), load_gaussian_ply(path_b));
}

} // namespace splatsim
