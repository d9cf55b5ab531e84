#include "plate_align/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace plate_align {

namespace {

constexpr double deg2rad(double d) { return d * M_PI / 180.0; }

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a * 0x9e3779b97f4a7c15ULL + b;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    return x;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(c);
        else if (c == '*')
            out += "_star";
        else
            out.push_back('_');
    }
    return out;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

nlohmann::ordered_json flags_to_json(const AblationFlags& f) {
    nlohmann::ordered_json j;
    j["finger_displacement_info"] = f.finger_displacement_info;
    j["tactile_pose_estimation"] = f.tactile_pose_estimation;
    j["groove_estimation"] = f.groove_estimation;
    j["adaptive_finger"] = f.adaptive_finger;
    j["simple_placing"] = f.simple_placing;
    j["marker_injection"] = f.marker_injection;
    return j;
}

AblationFlags flags_from_json(const nlohmann::json& j, AblationFlags base = {}) {
    AblationFlags f = base;
    if (j.contains("finger_displacement_info"))
        f.finger_displacement_info = j.at("finger_displacement_info").get<bool>();
    if (j.contains("tactile_pose_estimation"))
        f.tactile_pose_estimation = j.at("tactile_pose_estimation").get<bool>();
    if (j.contains("groove_estimation")) f.groove_estimation = j.at("groove_estimation").get<bool>();
    if (j.contains("adaptive_finger")) f.adaptive_finger = j.at("adaptive_finger").get<bool>();
    if (j.contains("simple_placing")) f.simple_placing = j.at("simple_placing").get<bool>();
    if (j.contains("marker_injection")) f.marker_injection = j.at("marker_injection").get<bool>();
    return f;
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << content;
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

std::vector<ConditionSpec> default_conditions() {
    std::vector<ConditionSpec> v;
    auto add = [&](const std::string& name, AblationFlags f, bool acc = false,
                   double lo = 0.0, double hi = 1.0, const std::string& modal = "") {
        v.push_back({name, f, acc, lo, hi, modal});
    };
    AblationFlags a; // tactile + groove + adaptive finger, no spring info
    add("a", a, true, 0.9, 1.0);
    AblationFlags b = a;
    b.finger_displacement_info = true;
    add("b", b);
    AblationFlags c = b;
    c.tactile_pose_estimation = false;
    add("c", c, true, 0.0, 0.1);
    AblationFlags d = b;
    d.groove_estimation = false;
    add("d", d, true, 0.0, 0.1, "end_of_holder");
    AblationFlags e = b;
    e.adaptive_finger = false;
    add("e", e);
    AblationFlags f; // simple placing with the adaptive finger
    f.tactile_pose_estimation = false;
    f.groove_estimation = false;
    f.simple_placing = true;
    add("f", f, true, 0.3, 0.9);
    AblationFlags g = f;
    g.adaptive_finger = false;
    add("g", g);
    AblationFlags as = a;
    as.marker_injection = true;
    add("a*", as, true, 0.9, 1.0);
    AblationFlags bs = b;
    bs.marker_injection = true;
    add("b*", bs);
    AblationFlags fs = f;
    fs.marker_injection = true;
    add("f*", fs, true, 0.0, 0.1);
    return v;
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");
    if (conditions.empty()) throw std::invalid_argument("at least one condition is required");
    std::vector<std::string> names;
    for (const auto& c : conditions) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
        throw std::invalid_argument("condition names must be unique");
    skill.validate();
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("base_seed")) cfg.base_seed = j.at("base_seed").get<uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("marker_noise")) {
        const auto& m = j.at("marker_noise");
        if (m.contains("enabled")) cfg.skill.marker_noise.enabled = m.at("enabled").get<bool>();
        if (m.contains("translation_bound"))
            cfg.skill.marker_noise.translation_bound = m.at("translation_bound").get<double>();
        if (m.contains("yaw_bound_deg"))
            cfg.skill.marker_noise.yaw_bound = deg2rad(m.at("yaw_bound_deg").get<double>());
    }
    if (j.contains("conditions")) {
        const auto defaults = default_conditions();
        std::vector<ConditionSpec> picked;
        for (const auto& item : j.at("conditions")) {
            if (item.is_string()) {
                const std::string name = item.get<std::string>();
                const auto it = std::find_if(defaults.begin(), defaults.end(),
                                             [&](const auto& c) { return c.name == name; });
                if (it == defaults.end())
                    throw std::invalid_argument("unknown condition name: " + name);
                picked.push_back(*it);
            } else {
                ConditionSpec spec;
                spec.name = item.at("name").get<std::string>();
                if (item.contains("flags")) spec.flags = flags_from_json(item.at("flags"));
                if (item.contains("acceptance")) spec.acceptance = item.at("acceptance").get<bool>();
                if (item.contains("min_success"))
                    spec.min_success = item.at("min_success").get<double>();
                if (item.contains("max_success"))
                    spec.max_success = item.at("max_success").get<double>();
                if (item.contains("modal_failure"))
                    spec.modal_failure = item.at("modal_failure").get<std::string>();
                picked.push_back(spec);
            }
        }
        cfg.conditions = std::move(picked);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    f >> j;
    return ExperimentConfig::from_json(j);
}

int ConditionReport::successes() const {
    return static_cast<int>(std::count_if(trials.begin(), trials.end(),
                                          [](const TrialRecord& t) { return t.success; }));
}

double ConditionReport::success_rate() const {
    return trials.empty() ? 0.0 : static_cast<double>(successes()) / trials.size();
}

void ConditionReport::displacement_stats(double& trans_mean, double& trans_sd, double& rot_mean,
                                         double& rot_sd) const {
    trans_mean = trans_sd = rot_mean = rot_sd = 0.0;
    const size_t n = trials.size();
    if (n == 0) return;
    for (const auto& t : trials) {
        trans_mean += t.holder_translation;
        rot_mean += t.holder_rotation_deg;
    }
    trans_mean /= n;
    rot_mean /= n;
    if (n < 2) return;
    for (const auto& t : trials) {
        trans_sd += (t.holder_translation - trans_mean) * (t.holder_translation - trans_mean);
        rot_sd += (t.holder_rotation_deg - rot_mean) * (t.holder_rotation_deg - rot_mean);
    }
    trans_sd = std::sqrt(trans_sd / (n - 1));
    rot_sd = std::sqrt(rot_sd / (n - 1));
}

std::map<std::string, int> ConditionReport::failure_histogram() const {
    std::map<std::string, int> h;
    for (const auto& t : trials)
        if (!t.success) ++h[failure_name(t.reason)];
    return h;
}

std::string ConditionReport::modal_failure() const {
    const auto h = failure_histogram();
    std::string best;
    int count = -1;
    for (const auto& [name, n] : h)
        if (n > count) {
            best = name;
            count = n;
        }
    return best;
}

bool ConditionReport::meets_acceptance() const {
    if (!spec.acceptance) return true;
    const double rate = success_rate();
    if (rate < spec.min_success - 1e-12 || rate > spec.max_success + 1e-12) return false;
    if (!spec.modal_failure.empty() && modal_failure() != spec.modal_failure) return false;
    return true;
}

WorldState make_trial_world(uint64_t seed, const ExperimentConfig& cfg) {
    std::mt19937_64 rng(mix(seed, 0x7701DULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    WorldState w;
    w.holder_a = {uniform(-300.0, -150.0), uniform(-100.0, 100.0),
                  deg2rad(uniform(-30.0, 30.0))};
    w.holder_b = {uniform(100.0, 250.0), uniform(-100.0, 100.0), deg2rad(uniform(-30.0, 30.0))};
    w.plate = w.holder_a;
    w.plate_z = 0.0;
    w.gripper = {0.0, 0.0, 0.0};
    w.gripper_z = 100.0;
    (void)cfg;
    return w;
}

uint64_t trial_seed(uint64_t base_seed, const std::string& condition, int trial_index) {
    return mix(mix(base_seed, fnv1a(condition)), static_cast<uint64_t>(trial_index) + 1);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, bool parallel, bool record_traces) {
    cfg.validate();
    ExperimentReport report;
    report.base_seed = cfg.base_seed;
    report.trials_per_condition = cfg.trials;
    report.conditions.resize(cfg.conditions.size());
    for (size_t c = 0; c < cfg.conditions.size(); ++c) {
        report.conditions[c].spec = cfg.conditions[c];
        report.conditions[c].trials.resize(cfg.trials);
    }

    struct Job {
        int cond;
        int trial;
    };
    std::vector<Job> jobs;
    for (int c = 0; c < static_cast<int>(cfg.conditions.size()); ++c)
        for (int t = 0; t < cfg.trials; ++t) jobs.push_back({c, t});

    auto run_one = [&](const Job& job) {
        const ConditionSpec& spec = cfg.conditions[job.cond];
        const uint64_t seed = trial_seed(cfg.base_seed, spec.name, job.trial);
        WorldState w = make_trial_world(seed, cfg);
        SkillConfig skill = cfg.skill;
        skill.ablations = spec.flags;
        TrialResult r = run_trial(w, cfg.sim, skill, seed, record_traces);
        TrialRecord rec;
        rec.index = job.trial;
        rec.seed = seed;
        rec.success = r.success;
        rec.reason = r.reason;
        rec.final_phase = r.final_phase;
        rec.holder_translation = r.holder_translation;
        rec.holder_rotation_deg = r.holder_rotation_deg;
        rec.final_yaw_error_deg = r.final_yaw_error_deg;
        rec.duration = r.duration;
        rec.trace = std::move(r.trace);
        report.conditions[job.cond].trials[job.trial] = std::move(rec);
    };

    if (parallel) {
#ifdef PLATE_ALIGN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (long i = 0; i < static_cast<long>(jobs.size()); ++i) run_one(jobs[i]);
    } else {
        for (const Job& j : jobs) run_one(j);
    }
    return report;
}

TrialMetrics evaluate_trial(const WorldState& final_world, const Pose2& holder_b_initial) {
    TrialMetrics m;
    m.success = final_world.released && !final_world.resting_on_groove &&
                !final_world.escaped_holder &&
                plate_inside_groove(final_world.plate, final_world.plate_geom,
                                    final_world.holder_b, final_world.holder_geom);
    m.holder_translation =
        (final_world.holder_b.translation() - holder_b_initial.translation()).norm();
    m.holder_rotation_deg = std::abs(
        normalize_angle(final_world.holder_b.yaw - holder_b_initial.yaw) * 180.0 / M_PI);
    return m;
}

nlohmann::ordered_json report_to_json(const ExperimentReport& r, bool include_timestamp) {
    nlohmann::ordered_json j;
    if (include_timestamp) {
        const auto now = std::chrono::system_clock::now();
        j["generated_at"] =
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    }
    j["base_seed"] = r.base_seed;
    j["trials_per_condition"] = r.trials_per_condition;
    j["conditions"] = nlohmann::ordered_json::array();
    for (const auto& c : r.conditions) {
        nlohmann::ordered_json jc;
        jc["name"] = c.spec.name;
        jc["flags"] = flags_to_json(c.spec.flags);
        jc["acceptance"] = c.spec.acceptance;
        if (c.spec.acceptance) {
            jc["min_success"] = c.spec.min_success;
            jc["max_success"] = c.spec.max_success;
            if (!c.spec.modal_failure.empty()) jc["required_modal_failure"] = c.spec.modal_failure;
        }
        jc["successes"] = c.successes();
        jc["trials"] = static_cast<int>(c.trials.size());
        jc["success_rate"] = c.success_rate();
        double tm, ts, rm, rs;
        c.displacement_stats(tm, ts, rm, rs);
        jc["holder_translation_mean_mm"] = tm;
        jc["holder_translation_sd_mm"] = ts;
        jc["holder_rotation_mean_deg"] = rm;
        jc["holder_rotation_sd_deg"] = rs;
        jc["failure_histogram"] = nlohmann::ordered_json::object();
        for (const auto& [name, n] : c.failure_histogram()) jc["failure_histogram"][name] = n;
        jc["meets_acceptance"] = c.meets_acceptance();
        jc["trials_detail"] = nlohmann::ordered_json::array();
        for (const auto& t : c.trials) {
            nlohmann::ordered_json jt;
            jt["index"] = t.index;
            jt["seed"] = t.seed;
            jt["success"] = t.success;
            jt["failure"] = failure_name(t.reason);
            jt["final_phase"] = phase_name(t.final_phase);
            jt["holder_translation_mm"] = t.holder_translation;
            jt["holder_rotation_deg"] = t.holder_rotation_deg;
            jt["final_yaw_error_deg"] = t.final_yaw_error_deg;
            jt["duration_s"] = t.duration;
            jc["trials_detail"].push_back(std::move(jt));
        }
        j["conditions"].push_back(std::move(jc));
    }
    return j;
}

void write_report(const ExperimentReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    atomic_write(dir + "/report.json", report_to_json(r, true).dump(2) + "\n");

    std::string csv = "condition,successes,trials,trans_mean,trans_sd,rot_mean,rot_sd\n";
    for (const auto& c : r.conditions) {
        double tm, ts, rm, rs;
        c.displacement_stats(tm, ts, rm, rs);
        csv += c.spec.name + "," + std::to_string(c.successes()) + "," +
               std::to_string(c.trials.size()) + "," + fmt(tm) + "," + fmt(ts) + "," + fmt(rm) +
               "," + fmt(rs) + "\n";
    }
    atomic_write(dir + "/summary.csv", csv);

    for (const auto& c : r.conditions) {
        for (const auto& t : c.trials) {
            if (t.trace.empty()) continue;
            std::string out =
                "t,phase,gripper_x,gripper_y,gripper_yaw,gripper_z,gripper_pitch,gripper_roll,"
                "plate_x,plate_y,plate_yaw,plate_z,fx,fy,fz,est_dir_deg,est_residual\n";
            for (const auto& row : t.trace) {
                out += fmt(row.t);
                out += ",";
                out += phase_name(row.phase);
                for (double v :
                     {row.gripper.x, row.gripper.y, row.gripper.yaw, row.gripper_z,
                      row.gripper_pitch, row.gripper_roll, row.plate.x, row.plate.y,
                      row.plate.yaw, row.plate_z, row.force.x(), row.force.y(), row.force.z(),
                      row.est_dir_deg, row.est_residual}) {
                    out += ",";
                    out += fmt(v);
                }
                out += "\n";
            }
            char name[64];
            std::snprintf(name, sizeof(name), "trace_%s_%03d.csv",
                          sanitize(c.spec.name).c_str(), t.index);
            atomic_write(dir + "/" + name, out);
        }
    }
}

bool acceptance_pass(const ExperimentReport& r) {
    return std::all_of(r.conditions.begin(), r.conditions.end(),
                       [](const ConditionReport& c) { return c.meets_acceptance(); });
}

} // namespace plate_align
