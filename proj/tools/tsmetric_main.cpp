#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tsm/io.hpp"
#include "tsm/kernels.hpp"
#include "tsm/metric.hpp"
#include "tsm/phantom.hpp"
#include "tsm/selftest.hpp"
#include "tsm/svf.hpp"
#include "tsm/ts_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> parse_doubles(const std::string& list, const char* what) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string(what) + ": cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument(std::string(what) + ": empty list");
    return out;
}

tsm::GridGeom parse_dims(const std::string& arg) {
    std::vector<int> dims;
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, 'x')) dims.push_back(std::stoi(item));
    if (dims.size() == 2) return tsm::GridGeom::make2d(dims[0], dims[1]);
    if (dims.size() == 3) return tsm::GridGeom::make3d(dims[0], dims[1], dims[2]);
    throw std::invalid_argument("--dims: expected WxH or WxHxD, got '" + arg + "'");
}

// Minimal glob: '*' and '?' inside the filename component.
bool glob_match(const std::string& pattern, const std::string& name) {
    std::size_t p = 0, n = 0, star = std::string::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

// --frames accepts either a comma-separated list of paths or a glob over one
// directory. RAWJ pairs are collapsed onto their stem so `frame_*` does not
// yield every frame twice.
std::vector<fs::path> expand_frames(const std::string& arg) {
    std::vector<fs::path> paths;
    if (arg.find('*') != std::string::npos || arg.find('?') != std::string::npos) {
        const fs::path pattern(arg);
        const fs::path dir = pattern.has_parent_path() ? pattern.parent_path() : fs::path(".");
        const std::string leaf = pattern.filename().string();
        if (!fs::is_directory(dir))
            throw std::invalid_argument("--frames: no such directory: " + dir.string());
        for (const auto& entry : fs::directory_iterator(dir))
            if (glob_match(leaf, entry.path().filename().string()))
                paths.push_back(entry.path());
    } else {
        std::stringstream ss(arg);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) paths.emplace_back(item);
    }
    for (auto& p : paths) {
        const auto ext = p.extension();
        if (ext == ".json" || ext == ".bin") p.replace_extension();
    }
    std::sort(paths.begin(), paths.end());
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    if (paths.empty()) throw std::invalid_argument("--frames: no frames matched '" + arg + "'");
    return paths;
}

int run(int argc, char** argv) {
    CLI::App app{"Compare image time series by separating anatomy (shape) and process (path) differences"};
    app.require_subcommand(1);

    // ---- fit -------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "Fit a continuous model to an image time series");
    std::string fit_frames, fit_times, fit_mode = "longitudinal", fit_out;
    tsm::RegParams fit_reg;
    fit->add_option("--frames", fit_frames, "Comma-separated frame paths or a glob")->required();
    fit->add_option("--times", fit_times, "Comma-separated frame times")->required();
    fit->add_option("--mode", fit_mode, "longitudinal|template")
        ->check(CLI::IsMember({"longitudinal", "template"}));
    fit->add_option("--out", fit_out, "Output model directory")->required();
    fit->add_option("--levels", fit_reg.levels, "Registration pyramid levels");
    fit->add_option("--iters", fit_reg.iters_per_level, "Iterations per level");
    fit->add_option("--sigma-fluid", fit_reg.sigma_fluid, "Update smoothing (voxels)");
    fit->add_option("--sigma-diffusion", fit_reg.sigma_diffusion, "Velocity smoothing (voxels)");

    // ---- compare ----------------------------------------------------------
    auto* compare = app.add_subcommand("compare", "Distance between two fitted models");
    std::string cmp_a, cmp_b, cmp_interval, cmp_reference = "b", cmp_out;
    int cmp_samples = 101;
    compare->add_option("--model-a", cmp_a, "First model directory")->required();
    compare->add_option("--model-b", cmp_b, "Second model directory")->required();
    compare->add_option("--interval", cmp_interval, "Analysis interval ta,tb");
    compare->add_option("--samples", cmp_samples, "Time samples for the path distance");
    compare->add_option("--reference", cmp_reference, "Which model is the reference frame")
        ->check(CLI::IsMember({"a", "b"}));
    compare->add_option("--out", cmp_out, "Output report directory")->required();

    // ---- register -----------------------------------------------------------
    auto* reg_cmd = app.add_subcommand("register", "Velocity-field registration of two images");
    std::string reg_fixed, reg_moving, reg_out;
    tsm::RegParams reg_params;
    reg_cmd->add_option("--fixed", reg_fixed, "Fixed image")->required();
    reg_cmd->add_option("--moving", reg_moving, "Moving image")->required();
    reg_cmd->add_option("--out", reg_out, "Output velocity field (RAWJ)")->required();
    reg_cmd->add_option("--levels", reg_params.levels, "Registration pyramid levels");
    reg_cmd->add_option("--iters", reg_params.iters_per_level, "Iterations per level");
    reg_cmd->add_option("--sigma-fluid", reg_params.sigma_fluid, "Update smoothing (voxels)");
    reg_cmd->add_option("--sigma-diffusion", reg_params.sigma_diffusion, "Velocity smoothing (voxels)");

    // ---- simulate -------------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic phantom series pair");
    int sim_set = 1;
    tsm::SimConfig sim_cfg;
    std::string sim_dims = "128x128", sim_out;
    simulate->add_option("--set", sim_set, "1: shape only, 2: path only, 3: both")
        ->required()
        ->check(CLI::Range(1, 3));
    simulate->add_option("--seed", sim_cfg.seed, "RNG seed");
    simulate->add_option("--frames", sim_cfg.n_frames, "Frames per series");
    simulate->add_option("--shape-amp", sim_cfg.shape_amp, "Shape field amplitude (voxels)");
    simulate->add_option("--path-amp", sim_cfg.path_amp, "Path field amplitude (voxels)");
    simulate->add_option("--dims", sim_dims, "Grid size WxH or WxHxD");
    simulate->add_option("--out", sim_out, "Output directory")->required();

    // ---- evaluate ----------------------------------------------------------------
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Sample a fitted model at a time point");
    std::string eval_model, eval_out;
    double eval_t = 0.0;
    evaluate_cmd->add_option("--model", eval_model, "Model directory")->required();
    evaluate_cmd->add_option("--t", eval_t, "Time to evaluate at")->required();
    evaluate_cmd->add_option("--out", eval_out, "Output image path")->required();

    // ---- selftest -------------------------------------------------------------------
    auto* selftest = app.add_subcommand("selftest", "Run the built-in property checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (fit->parsed()) {
        const auto paths = expand_frames(fit_frames);
        const auto times = parse_doubles(fit_times, "--times");
        if (paths.size() != times.size())
            throw std::invalid_argument("--times: got " + std::to_string(times.size()) +
                                        " times for " + std::to_string(paths.size()) + " frames");
        std::vector<tsm::ScalarImage> frames;
        frames.reserve(paths.size());
        for (const auto& p : paths) frames.push_back(tsm::read_image(p));
        std::cerr << "fit: " << frames.size() << " frames, mode " << fit_mode << "\n";
        const auto mode = fit_mode == "template" ? tsm::ShapeMode::template_mean
                                                 : tsm::ShapeMode::longitudinal;
        const tsm::TsModel model = tsm::fit_ts_model(frames, times, mode, fit_reg);
        tsm::save_model(model, fit_out);
        std::cerr << "fit: model written to " << fit_out << "\n";
    } else if (compare->parsed()) {
        const tsm::TsModel model_a = tsm::load_model(cmp_a);
        const tsm::TsModel model_b = tsm::load_model(cmp_b);
        std::optional<std::pair<double, double>> interval;
        if (!cmp_interval.empty()) {
            const auto v = parse_doubles(cmp_interval, "--interval");
            if (v.size() != 2) throw std::invalid_argument("--interval: expected ta,tb");
            interval = std::make_pair(v[0], v[1]);
        }
        const tsm::RegParams reg = model_a.reg;
        // The second argument of the distance is the reference frame.
        tsm::DistanceReport report =
            cmp_reference == "b" ? tsm::total_distance(model_a, model_b, interval, reg, cmp_samples)
                                 : tsm::total_distance(model_b, model_a, interval, reg, cmp_samples);
        report.reference = cmp_reference;
        tsm::write_report(report, reg, cmp_out);
        std::cerr << "compare: ds=" << report.ds << " dp=" << report.dp
                  << " total=" << report.total << " -> " << cmp_out << "\n";
    } else if (reg_cmd->parsed()) {
        const tsm::ScalarImage fixed = tsm::read_image(reg_fixed);
        const tsm::ScalarImage moving = tsm::read_image(reg_moving);
        const tsm::VectorField v = tsm::register_svf(fixed, moving, reg_params);
        tsm::write_field(v, reg_out);
        std::cerr << "register: velocity written to " << reg_out << "\n";
    } else if (simulate->parsed()) {
        sim_cfg.geom = parse_dims(sim_dims);
        const tsm::SimSet sim = tsm::build_sim_set(sim_set, sim_cfg);
        const fs::path out(sim_out);
        char name[32];
        for (std::size_t k = 0; k < sim.frames_i.size(); ++k) {
            std::snprintf(name, sizeof(name), "frame_%02zu", k);
            tsm::write_image(sim.frames_i[k], out / "ts_i" / name);
            tsm::write_image(sim.frames_j[k], out / "ts_j" / name);
        }
        tsm::write_field(sim.v_shape, out / "generators" / "v_shape");
        tsm::write_field(sim.v_path, out / "generators" / "v_path");
        json dims = json::array();
        for (int a = 0; a < sim_cfg.geom.ndim; ++a) dims.push_back(sim_cfg.geom.dim[a]);
        const json meta{{"set", sim_set},
                        {"seed", sim_cfg.seed},
                        {"n_frames", sim_cfg.n_frames},
                        {"dims", dims},
                        {"shape_amp", sim_cfg.shape_amp},
                        {"path_amp", sim_cfg.path_amp},
                        {"sigma", sim_cfg.sigma},
                        {"times_i", sim.times_i},
                        {"times_j", sim.times_j},
                        {"gamma", sim.gamma}};
        std::ofstream mf(out / "sim.json");
        mf << meta.dump(2) << "\n";
        if (!mf) throw tsm::io_error("cannot write " + (out / "sim.json").string());
        std::cerr << "simulate: set " << sim_set << " written to " << sim_out << "\n";
    } else if (evaluate_cmd->parsed()) {
        const tsm::TsModel model = tsm::load_model(eval_model);
        tsm::write_image(tsm::evaluate(model, eval_t), eval_out);
        std::cerr << "evaluate: image at t=" << eval_t << " written to " << eval_out << "\n";
    } else if (selftest->parsed()) {
        if (!tsm::run_selftest(std::cout)) return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const tsm::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
