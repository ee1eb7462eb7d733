#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "splatsim/error.hpp"
#include "splatsim/internal_fill.hpp"
#include "splatsim/pipeline.hpp"
#include "splatsim/renderer.hpp"
#include "splatsim/scene_config.hpp"
#include "splatsim/splat_ply.hpp"
#include "splatsim/threading.hpp"

namespace fs = std::filesystem;
using namespace splatsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitBlowup = 3;

std::string frame_base(int frame) {
    std::ostringstream ss;
    ss << "frame_" << std::setw(4) << std::setfill('0') << frame;
    return ss.str();
}

int cmd_simulate(const std::string& config_path) {
    SceneConfig cfg = load_scene_config(config_path);
    const ValidationReport report = validate_scene_config(cfg);
    if (!report.ok()) {
        std::cerr << report.to_json() << "\n";
        return kExitValidation;
    }
    for (const auto& issue : report.issues)
        if (!issue.is_error) std::cerr << "[warn] " << issue.path << ": " << issue.message << "\n";
    run_simulation(cfg);
    std::cout << "wrote " << cfg.frames << " frame(s) to " << cfg.output_dir << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& config_path) {
    SceneConfig cfg = load_scene_config(config_path);
    const ValidationReport report = validate_scene_config(cfg);
    std::cout << report.to_json() << "\n";
    return report.ok() ? kExitOk : kExitValidation;
}

int cmd_fill(const std::string& config_path) {
    SceneConfig cfg = load_scene_config(config_path);
    cfg.fill.enabled = true;
    const ValidationReport report = validate_scene_config(cfg);
    if (!report.ok()) {
        std::cerr << report.to_json() << "\n";
        return kExitValidation;
    }
    PreparedScene scene = prepare_scene(cfg);
    GaussianCloud out = scene.cloud;
    const double inv_s = 1.0 / scene.transform.scale;
    for (auto& k : out.kernels) {
        k.center = scene.transform.to_input(k.center);
        k.scale *= inv_s;
    }
    fs::create_directories(cfg.output_dir);
    const std::string path = (fs::path(cfg.output_dir) / "filled.ply").string();
    save_gaussian_ply(out, path);
    std::cout << "{\"original\": " << scene.original_count << ", \"fill\": " << scene.fill_count
              << ", \"total\": " << out.size() << ", \"output\": \"" << path << "\"}\n";
    return kExitOk;
}

int cmd_render(const std::string& config_path, const std::string& range) {
    SceneConfig cfg = load_scene_config(config_path);
    if (!cfg.render.camera && cfg.render.camera_path.empty())
        throw ParameterError("render.camera missing in config");

    int first = 0, last = 0;
    const auto dash = range.find('-');
    if (dash == std::string::npos) {
        first = last = std::stoi(range);
    } else {
        first = std::stoi(range.substr(0, dash));
        last = std::stoi(range.substr(dash + 1));
    }
    if (first < 0 || last < first) throw ParameterError("bad frame range '" + range + "'");

    const Camera cam = cfg.render.camera->build();
    for (int frame = first; frame <= last; ++frame) {
        const std::string ply = (fs::path(cfg.output_dir) / (frame_base(frame) + ".ply")).string();
        if (!fs::exists(ply)) throw IoError("missing exported frame " + ply);
        const GaussianCloud cloud = load_gaussian_ply(ply);
        // Exported splats carry no SH orientation state; rendered as stored.
        const Image img = render(SplatDrawList::from_cloud(cloud), cam);
        if (cfg.render.write_ppm)
            write_ppm(img, (fs::path(cfg.output_dir) / (frame_base(frame) + ".ppm")).string());
        if (cfg.render.write_png)
            write_png(img, (fs::path(cfg.output_dir) / (frame_base(frame) + ".png")).string());
    }
    std::cout << "rendered frames " << first << ".." << last << "\n";
    return kExitOk;
}

int cmd_diff(const std::string& a, const std::string& b) {
    const FrameDiff d = diff_frames(a, b);
    std::cout << d.to_json() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-splat MPM simulation engine"};
    app.require_subcommand(1);

    int threads = 0;
    bool reference = false;
    app.add_option("--threads", threads, "worker count (default: SPLATSIM_THREADS or hardware)");
    app.add_flag("--reference", reference, "single-threaded reference mode");

    std::string config_path, range, diff_a, diff_b;

    auto* simulate = app.add_subcommand("simulate", "run the full pipeline");
    simulate->add_option("config", config_path, "scene config (JSON)")->required();

    auto* validate = app.add_subcommand("validate", "validate a scene config without running");
    validate->add_option("config", config_path, "scene config (JSON)")->required();

    auto* fill = app.add_subcommand("fill", "fill-only preview: write the filled cloud");
    fill->add_option("config", config_path, "scene config (JSON)")->required();

    auto* render = app.add_subcommand("render", "render previously exported frames");
    render->add_option("config", config_path, "scene config (JSON)")->required();
    render->add_option("range", range, "frame range, e.g. 0-24 or 3")->required();

    auto* diff = app.add_subcommand("diff", "per-field statistics between two splat files");
    diff->add_option("a", diff_a, "first .ply")->required();
    diff->add_option("b", diff_b, "second .ply")->required();

    CLI11_PARSE(app, argc, argv);

    if (reference)
        set_worker_count(1);
    else if (threads > 0)
        set_worker_count(threads);

    try {
        if (simulate->parsed()) return cmd_simulate(config_path);
        if (validate->parsed()) return cmd_validate(config_path);
        if (fill->parsed()) return cmd_fill(config_path);
        if (render->parsed()) return cmd_render(config_path, range);
        if (diff->parsed()) return cmd_diff(diff_a, diff_b);
    } catch (const NumericalBlowupError& e) {
        std::cerr << "numerical blowup: " << e.what() << "\n";
        return kExitBlowup;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
