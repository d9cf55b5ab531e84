// Command-line front end: tactile image synthesis, pose estimation from
// images, single trials, the full ablation matrix, and trace replay.
#include "plate_align/harness.hpp"
#include "plate_align/tactile_pose.hpp"
#include "plate_align/tactile_sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace plate_align;

namespace {

constexpr double kDegToRad = M_PI / 180.0;

GripperCalibration load_calibration(const std::string& path) {
    GripperCalibration calib;
    if (path.empty()) return calib;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open calibration file: " + path);
    nlohmann::json j;
    f >> j;
    auto load_side = [&](const char* key, SensorPose& pose) {
        if (!j.contains(key)) return;
        const auto& s = j.at(key);
        if (s.contains("position")) {
            const auto& p = s.at("position");
            pose.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(),
                                 p.at(2).get<double>());
        }
        if (s.contains("mm_per_px")) pose.mm_per_px = s.at("mm_per_px").get<double>();
    };
    load_side("left", calib.left);
    load_side("right", calib.right);
    return calib;
}

AblationFlags flags_from_numbers(const std::vector<int>& nums) {
    AblationFlags f{};
    f.tactile_pose_estimation = false;
    f.groove_estimation = false;
    f.adaptive_finger = false;
    for (int n : nums) {
        switch (n) {
            case 1: f.finger_displacement_info = true; break;
            case 2: f.tactile_pose_estimation = true; break;
            case 3: f.groove_estimation = true; break;
            case 4: f.adaptive_finger = true; break;
            case 5: f.simple_placing = true; break;
            case 6: f.marker_injection = true; break;
            default: throw CLI::ValidationError("--ablate entries must be in 1..6");
        }
    }
    return f;
}

nlohmann::ordered_json trial_to_json(const TrialResult& r) {
    nlohmann::ordered_json j;
    j["success"] = r.success;
    j["failure"] = failure_name(r.reason);
    j["final_phase"] = phase_name(r.final_phase);
    j["holder_translation_mm"] = r.holder_translation;
    j["holder_rotation_deg"] = r.holder_rotation_deg;
    j["final_yaw_error_deg"] = r.final_yaw_error_deg;
    j["duration_s"] = r.duration;
    j["phases"] = nlohmann::ordered_json::array();
    for (const auto& e : r.phase_trace) {
        nlohmann::ordered_json je;
        je["phase"] = phase_name(e.phase);
        je["t"] = e.time;
        je["trigger"] = e.trigger;
        j["phases"].push_back(std::move(je));
    }
    return j;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write trace file: " + path);
    f << "t,phase,gripper_x,gripper_y,gripper_yaw,gripper_z,gripper_pitch,gripper_roll,"
         "plate_x,plate_y,plate_yaw,plate_z,fx,fy,fz,est_dir_deg,est_residual\n";
    for (const auto& row : trace) {
        f << row.t << ',' << phase_name(row.phase);
        for (double v : {row.gripper.x, row.gripper.y, row.gripper.yaw, row.gripper_z,
                         row.gripper_pitch, row.gripper_roll, row.plate.x, row.plate.y,
                         row.plate.yaw, row.plate_z, row.force.x(), row.force.y(),
                         row.force.z(), row.est_dir_deg, row.est_residual})
            f << ',' << v;
        f << '\n';
    }
}

int cmd_replay(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        std::cerr << "cannot open trace file: " << path << "\n";
        return 1;
    }
    std::string line;
    if (!std::getline(f, line)) {
        std::cerr << "empty trace file\n";
        return 1;
    }
    std::string last_phase;
    size_t rows = 0;
    double t = 0.0, max_force = 0.0;
    while (std::getline(f, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 15) continue;
        ++rows;
        t = std::stod(cells[0]);
        const std::string& phase = cells[1];
        if (phase != last_phase) {
            std::cout << "t=" << cells[0] << "s  -> " << phase << "\n";
            last_phase = phase;
        }
        const double fx = std::stod(cells[12]), fy = std::stod(cells[13]),
                     fz = std::stod(cells[14]);
        max_force = std::max(max_force, std::sqrt(fx * fx + fy * fy + fz * fz));
    }
    std::cout << rows << " rows, " << t << " s simulated, peak |F| " << max_force << " N\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tilt-insert-slide well-plate placing: simulation and experiments"};
    app.require_subcommand(1);

    // --- render-tactile ------------------------------------------------------
    auto* render = app.add_subcommand("render-tactile", "synthesize a fingertip image as PGM");
    double angle_deg = 0.0, offset_px = 0.0, press = 0.5;
    uint64_t render_seed = 0;
    std::string render_out = "tactile.pgm";
    bool raw = false;
    render->add_option("--angle-deg", angle_deg, "edge angle in the image, degrees");
    render->add_option("--offset-px", offset_px, "edge offset from the image center, pixels");
    render->add_option("--press", press, "press depth, mm");
    render->add_option("--seed", render_seed, "noise seed");
    render->add_option("--out", render_out, "output PGM path");
    render->add_flag("--raw", raw, "render the dot-textured raw image instead of depth");

    // --- estimate-pose -------------------------------------------------------
    auto* estimate = app.add_subcommand("estimate-pose", "plate pose from two depth images");
    std::string left_pgm, right_pgm, calib_path;
    estimate->add_option("left", left_pgm, "left fingertip depth PGM")->required();
    estimate->add_option("right", right_pgm, "right fingertip depth PGM")->required();
    estimate->add_option("--calibration", calib_path, "sensor calibration JSON");

    // --- run-trial -------------------------------------------------------------
    auto* trial = app.add_subcommand("run-trial", "run a single placing trial");
    std::string condition = "a";
    uint64_t trial_seed_opt = 1;
    bool want_trace = false;
    std::string trace_out = "trial_trace.csv";
    std::vector<int> ablate;
    trial->add_option("--condition", condition, "named condition from the default matrix");
    trial->add_option("--seed", trial_seed_opt, "trial seed");
    trial->add_flag("--trace", want_trace, "record and write a 20 Hz trace CSV");
    trial->add_option("--trace-out", trace_out, "trace CSV path");
    trial->add_option("--ablate", ablate,
                      "method switches to enable (1..6), overriding --condition");

    // --- run-ablation ------------------------------------------------------------
    auto* ablation = app.add_subcommand("run-ablation", "run the experiment matrix");
    std::string config_path, out_dir = "out";
    uint64_t base_seed = 1;
    int trials_override = 0;
    bool serial = false, traces = false;
    ablation->add_option("--config", config_path, "experiment config JSON");
    ablation->add_option("--seed", base_seed, "base seed");
    ablation->add_option("--out", out_dir, "output directory");
    ablation->add_option("--trials", trials_override, "override trials per condition");
    ablation->add_flag("--serial", serial, "disable trial-level parallelism");
    ablation->add_flag("--traces", traces, "write per-trial trace CSVs");

    // --- replay -----------------------------------------------------------------
    auto* replay = app.add_subcommand("replay", "summarize a recorded trace CSV");
    std::string replay_path;
    replay->add_option("--trace", replay_path, "trace CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (render->parsed()) {
            GraspContact g{angle_deg * kDegToRad, offset_px, press};
            SensorModel model;
            model.seed = render_seed;
            const DepthMap m = raw ? render_raw_image(g, model) : render_depth_map(g, model);
            write_pgm(m, render_out);
            std::cout << "wrote " << render_out << "\n";
            return 0;
        }
        if (estimate->parsed()) {
            const GripperCalibration calib = load_calibration(calib_path);
            const DepthMap dl = read_pgm(left_pgm), dr = read_pgm(right_pgm);
            const PlatePoseEstimate est = estimate_plate_pose(dl, dr, calib.left, calib.right);
            nlohmann::ordered_json j;
            j["roll_deg"] = est.roll / kDegToRad;
            j["pitch_deg"] = est.pitch / kDegToRad;
            j["midpoint_mm"] = {est.midpoint.x(), est.midpoint.y(), est.midpoint.z()};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (trial->parsed()) {
            ExperimentConfig cfg;
            SkillConfig skill = cfg.skill;
            if (!ablate.empty()) {
                skill.ablations = flags_from_numbers(ablate);
            } else {
                const auto conditions = default_conditions();
                const auto it = std::find_if(conditions.begin(), conditions.end(),
                                             [&](const auto& c) { return c.name == condition; });
                if (it == conditions.end()) {
                    std::cerr << "unknown condition: " << condition << "\n";
                    return 1;
                }
                skill.ablations = it->flags;
            }
            WorldState w = make_trial_world(trial_seed_opt, cfg);
            const TrialResult r = run_trial(w, cfg.sim, skill, trial_seed_opt, want_trace);
            if (want_trace) write_trace_csv(r.trace, trace_out);
            std::cout << trial_to_json(r).dump(2) << "\n";
            return r.success ? 0 : 1;
        }
        if (ablation->parsed()) {
            ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{}
                                                       : load_experiment_config(config_path);
            if (ablation->count("--seed")) cfg.base_seed = base_seed;
            if (trials_override > 0) cfg.trials = trials_override;
            if (ablation->count("--out")) cfg.output_dir = out_dir;
            const ExperimentReport report = run_experiment(cfg, !serial, traces);
            write_report(report, cfg.output_dir);
            for (const auto& c : report.conditions) {
                std::cout << c.spec.name << ": " << c.successes() << "/" << c.trials.size();
                if (c.spec.acceptance)
                    std::cout << (c.meets_acceptance() ? "  [ok]" : "  [FAIL]");
                std::cout << "\n";
            }
            const bool ok = acceptance_pass(report);
            std::cout << (ok ? "acceptance: pass" : "acceptance: FAIL") << "\n";
            return ok ? 0 : 1;
        }
        if (replay->parsed()) return cmd_replay(replay_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
