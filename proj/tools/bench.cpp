// Benchmark: serial vs OpenMP-parallel experiment execution, verifying that
// both produce identical reports.
#include "plate_align/harness.hpp"

#include <chrono>
#include <cstdio>

using namespace plate_align;

int main(int argc, char** argv) {
    ExperimentConfig cfg;
    cfg.trials = (argc > 1) ? std::atoi(argv[1]) : 5;
    cfg.base_seed = 42;

    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentReport serial = run_experiment(cfg, /*parallel=*/false);
    const auto t1 = std::chrono::steady_clock::now();
    const ExperimentReport parallel = run_experiment(cfg, /*parallel=*/true);
    const auto t2 = std::chrono::steady_clock::now();

    const double ts = std::chrono::duration<double>(t1 - t0).count();
    const double tp = std::chrono::duration<double>(t2 - t1).count();
    const bool identical =
        report_to_json(serial, false).dump() == report_to_json(parallel, false).dump();

    std::printf("trials per condition: %d\n", cfg.trials);
    std::printf("serial:   %.3f s\n", ts);
    std::printf("parallel: %.3f s\n", tp);
    std::printf("speedup:  %.2fx\n", tp > 0 ? ts / tp : 0.0);
    std::printf("reports identical: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
