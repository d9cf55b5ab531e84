#pragma once

#include "plate_align/skill.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace plate_align {

/// One experiment-matrix row: a named ablation-flag set plus the pass/fail
/// band used by the CLI exit code when the row is acceptance-tagged.
struct ConditionSpec {
    std::string name;
    AblationFlags flags;
    bool acceptance = false;
    double min_success = 0.0; // fraction, inclusive
    double max_success = 1.0;
    std::string modal_failure; // non-empty: required most-frequent failure reason
};

/// The standard matrix: full method (a), plus single-switch ablations and the
/// marker-error-injection variants (starred names).
std::vector<ConditionSpec> default_conditions();

struct ExperimentConfig {
    int trials = 20;
    uint64_t base_seed = 1;
    std::string output_dir = "out";
    SimParams sim;
    SkillConfig skill;
    std::vector<ConditionSpec> conditions = default_conditions();

    void validate() const; // throws std::invalid_argument

    /// Partial overrides from JSON: trials, base_seed, output_dir,
    /// marker_noise{translation_bound,yaw_bound_deg}, and conditions
    /// (names picking from the default matrix, or full objects).
    static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_experiment_config(const std::string& path);

struct TrialRecord {
    int index = 0;
    uint64_t seed = 0;
    bool success = false;
    FailureReason reason = FailureReason::None;
    Phase final_phase = Phase::Failed;
    double holder_translation = 0.0;
    double holder_rotation_deg = 0.0;
    double final_yaw_error_deg = 0.0;
    double duration = 0.0;
    std::vector<TraceRow> trace;
};

struct ConditionReport {
    ConditionSpec spec;
    std::vector<TrialRecord> trials;

    int successes() const;
    double success_rate() const;
    /// mean/sd of holder displacement over all completed trials
    void displacement_stats(double& trans_mean, double& trans_sd, double& rot_mean,
                            double& rot_sd) const;
    std::map<std::string, int> failure_histogram() const;
    std::string modal_failure() const; // empty when there are no failures
    bool meets_acceptance() const;     // true for untagged conditions
};

struct ExperimentReport {
    uint64_t base_seed = 0;
    int trials_per_condition = 0;
    std::vector<ConditionReport> conditions;
};

/// Fresh randomized world for one trial: holders on the desk within reach,
/// at least 150 mm apart, yaw within +-30 deg; the plate starts in holder A.
WorldState make_trial_world(uint64_t seed, const ExperimentConfig& cfg);

/// Per-trial seed, stable across run orders and thread counts.
uint64_t trial_seed(uint64_t base_seed, const std::string& condition, int trial_index);

/// Run the full matrix. `parallel` distributes trials across OpenMP threads;
/// results are identical to the serial path (used as the benchmark baseline).
ExperimentReport run_experiment(const ExperimentConfig& cfg, bool parallel = true,
                                bool record_traces = false);

/// Success metrics recomputed from world state, for cross-checking results.
struct TrialMetrics {
    bool success = false;
    double holder_translation = 0.0;
    double holder_rotation_deg = 0.0;
};
TrialMetrics evaluate_trial(const WorldState& final_world, const Pose2& holder_b_initial);

/// Stable-ordered JSON; the generation timestamp is added only on request so
/// the rest of the document is byte-reproducible.
nlohmann::ordered_json report_to_json(const ExperimentReport& r, bool include_timestamp);

/// report.json + summary.csv + per-trial trace CSVs, overwritten atomically.
void write_report(const ExperimentReport& r, const std::string& dir);

/// True when every acceptance-tagged condition is inside its band (including
/// the required modal failure, when specified).
bool acceptance_pass(const ExperimentReport& r);

} // namespace plate_align
