#include "splatsim/scene_config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "splatsim/error.hpp"
#include "splatsim/splat_ply.hpp"

namespace splatsim {

using nlohmann::json;

namespace {

Vec3 parse_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw ParseError(where + ": expected an array of 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Box3 parse_box(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("min") || !j.contains("max"))
        throw ParseError(where + ": expected {\"min\": [...], \"max\": [...]}");
    Box3 b;
    b.min = parse_vec3(j["min"], where + ".min");
    b.max = parse_vec3(j["max"], where + ".max");
    if (!(b.min.array() <= b.max.array()).all())
        throw ParseError(where + ": min must not exceed max");
    return b;
}

Region parse_region(const json& j, const std::string& where) {
    Region r;
    if (j.is_string() && j.get<std::string>() == "all") {
        r.all = true;
        return r;
    }
    r.box = parse_box(j, where);
    return r;
}

BoundaryType parse_boundary_type(const std::string& s, const std::string& where) {
    if (s == "sticky") return BoundaryType::Sticky;
    if (s == "slip") return BoundaryType::Slip;
    if (s == "none") return BoundaryType::None;
    throw ParseError(where + ": boundary must be sticky, slip or none");
}

CameraConfig parse_camera(const json& j, const std::string& where) {
    CameraConfig c;
    if (!j.contains("position") || !j.contains("look_at"))
        throw ParseError(where + ": camera needs position and look_at");
    c.position = parse_vec3(j["position"], where + ".position");
    c.look_at = parse_vec3(j["look_at"], where + ".look_at");
    if (j.contains("up")) c.up = parse_vec3(j["up"], where + ".up");
    c.fov_y_deg = j.value("fov_y_deg", c.fov_y_deg);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.near = j.value("near", c.near);
    return c;
}

} // namespace

SceneConfig load_scene_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene config '" + path + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }

    SceneConfig cfg;
    if (!j.contains("input"))
        throw ParseError(path + ": missing required key 'input'");
    cfg.input_ply = j["input"].get<std::string>();
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.seed = j.value("seed", cfg.seed);

    if (j.contains("sim_region")) cfg.sim_region = parse_box(j["sim_region"], "sim_region");
    cfg.normalize = j.value("normalize", cfg.normalize);
    if (j.contains("domain")) cfg.domain = parse_box(j["domain"], "domain");

    if (j.contains("grid")) {
        const auto& g = j["grid"];
        cfg.grid_resolution = g.value("resolution", cfg.grid_resolution);
        cfg.margin_cells = g.value("margin_cells", cfg.margin_cells);
    }
    if (j.contains("time")) {
        const auto& t = j["time"];
        cfg.dt = t.value("dt", cfg.dt);
        cfg.fps = t.value("fps", cfg.fps);
        cfg.frames = t.value("frames", cfg.frames);
        cfg.cfl = t.value("cfl", cfg.cfl);
    }
    if (j.contains("gravity")) cfg.gravity = parse_vec3(j["gravity"], "gravity");
    cfg.rpic_damping = j.value("rpic_damping", cfg.rpic_damping);

    if (j.contains("boundary")) {
        const auto& b = j["boundary"];
        if (b.is_string()) {
            cfg.boundary.fill(parse_boundary_type(b.get<std::string>(), "boundary"));
        } else if (b.is_object()) {
            if (b.contains("default"))
                cfg.boundary.fill(parse_boundary_type(b["default"].get<std::string>(),
                                                      "boundary.default"));
            static const char* faces[6] = {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"};
            for (int f = 0; f < 6; ++f)
                if (b.contains(faces[f]))
                    cfg.boundary[f] = parse_boundary_type(b[faces[f]].get<std::string>(),
                                                          std::string("boundary.") + faces[f]);
        } else {
            throw ParseError("boundary: expected a string or per-face object");
        }
    }

    if (j.contains("materials")) {
        if (!j["materials"].is_array()) throw ParseError("materials: expected an array");
        int idx = 0;
        for (const auto& m : j["materials"]) {
            std::ostringstream where;
            where << "materials[" << idx++ << "]";
            MaterialAssignment a;
            a.region = m.contains("region") ? parse_region(m["region"], where.str() + ".region")
                                            : Region{true, {}};
            if (!m.contains("model"))
                throw ParseError(where.str() + ": missing 'model'");
            a.model_name = m["model"].get<std::string>();
            a.material.model = material_model_from_name(a.model_name);
            if (!m.contains("E") || !m.contains("nu") || !m.contains("density"))
                throw ParseError(where.str() + ": materials need E, nu and density");
            // Out-of-range values are kept raw here and reported by validation.
            try {
                a.material.params = make_material_params(
                    m["E"].get<double>(), m["nu"].get<double>(), m["density"].get<double>());
            } catch (const ParameterError&) {
                a.material.params.E = m["E"].get<double>();
                a.material.params.nu = m["nu"].get<double>();
                a.material.params.density = m["density"].get<double>();
            }
            if (m.contains("friction_angle_deg"))
                a.material.params.friction_angle =
                    m["friction_angle_deg"].get<double>() * M_PI / 180.0;
            if (m.contains("yield_stress"))
                a.material.params.yield_stress = m["yield_stress"].get<double>();
            if (m.contains("viscosity"))
                a.material.params.viscosity = m["viscosity"].get<double>();
            if (m.contains("neo_hookean_literal"))
                a.material.model.neo_hookean_literal = m["neo_hookean_literal"].get<bool>();
            validate_model(a.material.model);
            cfg.materials.push_back(std::move(a));
        }
    }

    if (j.contains("velocity_edits")) {
        if (!j["velocity_edits"].is_array()) throw ParseError("velocity_edits: expected an array");
        int idx = 0;
        for (const auto& e : j["velocity_edits"]) {
            std::ostringstream where;
            where << "velocity_edits[" << idx++ << "]";
            VelocityEdit edit;
            edit.region = e.contains("region") ? parse_region(e["region"], where.str() + ".region")
                                               : Region{true, {}};
            if (e.contains("velocity")) {
                edit.kind = VelocityEdit::Kind::Linear;
                edit.velocity = parse_vec3(e["velocity"], where.str() + ".velocity");
            } else if (e.contains("angular_velocity")) {
                const auto& av = e["angular_velocity"];
                edit.kind = VelocityEdit::Kind::Angular;
                edit.axis = parse_vec3(av["axis"], where.str() + ".angular_velocity.axis");
                if (edit.axis.norm() == 0.0)
                    throw ParseError(where.str() + ": zero rotation axis");
                edit.axis.normalize();
                edit.center = parse_vec3(av["center"], where.str() + ".angular_velocity.center");
                edit.omega = av.value("omega", 0.0);
            } else {
                throw ParseError(where.str() + ": needs 'velocity' or 'angular_velocity'");
            }
            cfg.velocity_edits.push_back(edit);
        }
    }

    if (j.contains("fill")) {
        const auto& f = j["fill"];
        cfg.fill.enabled = f.value("enabled", true);
        cfg.fill.config.sigma_th = f.value("threshold", cfg.fill.config.sigma_th);
        cfg.fill.config.particles_per_cell =
            f.value("particles_per_cell", cfg.fill.config.particles_per_cell);
        cfg.fill.config.max_fill = f.value("max_fill", cfg.fill.config.max_fill);
        cfg.fill.config.seed = f.value("seed", cfg.seed);
    }

    if (j.contains("kinematics")) {
        cfg.kinematics_mode = j["kinematics"].value("mode", cfg.kinematics_mode);
        if (cfg.kinematics_mode != "auto" && cfg.kinematics_mode != "total" &&
            cfg.kinematics_mode != "incremental")
            throw ParseError("kinematics.mode: expected auto, total or incremental");
    }

    if (j.contains("anisotropy")) {
        const auto& a = j["anisotropy"];
        if (a.is_number()) {
            cfg.anisotropy_r = a.get<double>();
        } else if (a.is_object() && a.value("enabled", true)) {
            cfg.anisotropy_r = a.value("r", 4.0);
        }
    }

    if (j.contains("output")) {
        cfg.export_ply = j["output"].value("ply", cfg.export_ply);
    }

    if (j.contains("render")) {
        const auto& r = j["render"];
        cfg.render.enabled = r.value("enabled", true);
        cfg.render.every = r.value("every", cfg.render.every);
        cfg.render.write_ppm = r.value("ppm", cfg.render.write_ppm);
        cfg.render.write_png = r.value("png", cfg.render.write_png);
        if (r.contains("camera")) cfg.render.camera = parse_camera(r["camera"], "render.camera");
        cfg.render.camera_path = r.value("camera_path", cfg.render.camera_path);
    }
    return cfg;
}

std::string ValidationReport::to_json() const {
    json errors = json::array();
    json warnings = json::array();
    for (const auto& i : issues) {
        json entry = {{"path", i.path}, {"message", i.message}};
        (i.is_error ? errors : warnings).push_back(entry);
    }
    json root = {{"ok", ok()}, {"errors", errors}, {"warnings", warnings}};
    return root.dump(2);
}

ValidationReport validate_scene_config(const SceneConfig& cfg) {
    ValidationReport report;
    auto error = [&](const std::string& path, const std::string& msg) {
        report.issues.push_back({true, path, msg});
    };
    auto warning = [&](const std::string& path, const std::string& msg) {
        report.issues.push_back({false, path, msg});
    };

    Box3 cloud_bounds;
    bool have_cloud = false;
    if (cfg.input_ply.empty()) {
        error("input", "missing input splat path");
    } else if (!std::filesystem::exists(cfg.input_ply)) {
        error("input", "file does not exist: " + cfg.input_ply);
    } else {
        try {
            const GaussianCloud cloud = load_gaussian_ply(cfg.input_ply);
            if (cloud.empty()) {
                error("input", "splat file contains no kernels");
            } else {
                cloud_bounds = cloud.bounds();
                have_cloud = true;
            }
        } catch (const Error& e) {
            error("input", e.what());
        }
    }

    if (!(cfg.dt > 0.0)) error("time.dt", "dt must be positive");
    if (!(cfg.fps > 0.0)) error("time.fps", "fps must be positive");
    if (cfg.frames < 1) error("time.frames", "frames must be >= 1");
    if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0)) error("time.cfl", "cfl must lie in (0, 1]");
    if (cfg.grid_resolution < 4) error("grid.resolution", "need at least 4 cells across the domain");
    if (cfg.margin_cells < 2) warning("grid.margin_cells", "fewer than 2 margin cells leaves no "
                                                           "room for boundary conditions");
    if (!cfg.normalize && !cfg.domain)
        error("domain", "an explicit domain box is required when normalize is false");

    if (cfg.materials.empty()) error("materials", "at least one material assignment is required");
    for (std::size_t i = 0; i < cfg.materials.size(); ++i) {
        const auto& m = cfg.materials[i];
        std::ostringstream base;
        base << "materials[" << i << "]";
        try {
            derive_moduli(m.material.params.E, m.material.params.nu);
        } catch (const ParameterError& e) {
            error(base.str() + ".nu", e.what());
        }
        if (!(m.material.params.density > 0.0)) error(base.str() + ".density", "must be positive");
        if (m.material.params.friction_angle < 0.0)
            error(base.str() + ".friction_angle_deg", "must be nonnegative");
        if (m.material.params.yield_stress < 0.0)
            error(base.str() + ".yield_stress", "must be nonnegative");
        if (m.material.params.viscosity < 0.0)
            error(base.str() + ".viscosity", "must be nonnegative");
        if (have_cloud && !m.region.all && !m.region.box.intersects(cloud_bounds))
            error(base.str() + ".region", "region does not intersect the cloud bounds");
    }
    for (std::size_t i = 0; i < cfg.velocity_edits.size(); ++i) {
        const auto& e = cfg.velocity_edits[i];
        if (have_cloud && !e.region.all && !e.region.box.intersects(cloud_bounds)) {
            std::ostringstream base;
            base << "velocity_edits[" << i << "].region";
            error(base.str(), "region does not intersect the cloud bounds");
        }
    }
    if (have_cloud && cfg.sim_region && !cfg.sim_region->intersects(cloud_bounds))
        error("sim_region", "region does not intersect the cloud bounds");

    if (cfg.fill.enabled) {
        try {
            validate_fill_config(cfg.fill.config);
        } catch (const ParameterError& e) {
            error("fill", e.what());
        }
    }
    if (cfg.anisotropy_r && *cfg.anisotropy_r < 1.0)
        error("anisotropy.r", "ratio bound must be >= 1");
    if (cfg.render.enabled && !cfg.render.camera && cfg.render.camera_path.empty())
        error("render.camera", "rendering enabled but no camera given");
    if (!cfg.render.camera_path.empty() && !std::filesystem::exists(cfg.render.camera_path))
        error("render.camera_path", "file does not exist: " + cfg.render.camera_path);

    // CFL advisory against the declared initial speeds.
    double max_speed = 0.0;
    for (const auto& e : cfg.velocity_edits) {
        if (e.kind == VelocityEdit::Kind::Linear) {
            max_speed = std::max(max_speed, e.velocity.norm());
        } else if (have_cloud) {
            const Box3& b = e.region.all ? cloud_bounds : e.region.box;
            double reach = 0.0;
            for (int corner = 0; corner < 8; ++corner) {
                Vec3 p(corner & 1 ? b.max.x() : b.min.x(), corner & 2 ? b.max.y() : b.min.y(),
                       corner & 4 ? b.max.z() : b.min.z());
                const Vec3 rel = p - e.center;
                reach = std::max(reach, (rel - e.axis * rel.dot(e.axis)).norm());
            }
            max_speed = std::max(max_speed, std::abs(e.omega) * reach);
        }
    }
    if (max_speed > 0.0 && have_cloud) {
        Box3 dom;
        if (cfg.normalize) {
            dom.min = Vec3::Constant(-1.0);
            dom.max = Vec3::Constant(1.0);
            const Box3 region = cfg.sim_region ? *cfg.sim_region : cloud_bounds;
            const double s = 2.0 / std::max(region.extent().maxCoeff(), 1e-12);
            max_speed *= s; // edits are given in input units
        } else if (cfg.domain) {
            dom = *cfg.domain;
        }
        const double dx = dom.valid() ? dom.extent().maxCoeff() / cfg.grid_resolution : 0.0;
        if (dx > 0.0 && cfg.dt * max_speed > cfg.cfl * dx) {
            std::ostringstream msg;
            msg << "dt violates the CFL guideline at the declared initial speeds; suggest dt <= "
                << cfg.cfl * dx / max_speed;
            warning("time.dt", msg.str());
        }
    }
    return report;
}

} // namespace splatsim
