// Compares the serial and OpenMP grid kernels behind fit_model on a
// synthetic functionality trace. The parallel kernel must match the serial
// one bit for bit; this tool reports the timing side.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mgv/resilience.hpp"
#include "mgv/rng.hpp"

using namespace mgv;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

TimeSeries synthetic_trace(double noise_sigma, uint64_t seed) {
    ModelParams truth{0.008, 0.048, 307.0, 408.0};
    TimeSeries grid;
    grid.t0 = 0.0;
    grid.step = 1.0;
    grid.v.assign(801, 0.0);
    TimeSeries f = simulate_model(truth, 1.0, grid);
    Rng rng(seed, "bench_noise");
    for (double& x : f.v) x += noise_sigma * rng.gaussian();
    return f;
}

std::vector<size_t> index_range(size_t lo, size_t hi) {
    std::vector<size_t> out;
    for (size_t i = lo; i <= hi; ++i) out.push_back(i);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    int repeats = 5;
    if (argc > 1) repeats = std::atoi(argv[1]);

    const TimeSeries f = synthetic_trace(0.02, 42);
    const std::vector<size_t> onsets = index_range(220, 330);
    const std::vector<size_t> switches = index_range(370, 450);
    const FitOptions opts;

    printf("grid: %zu onset x %zu switch candidates, %zu samples\n", onsets.size(),
           switches.size(), f.size());
#ifdef _OPENMP
    printf("openmp threads: %d\n", omp_get_max_threads());
#else
    printf("openmp: not enabled\n");
#endif

    // warmup + correctness cross-check
    const auto serial_cells = fit_grid_serial(f, 1.0, onsets, switches, opts);
    const auto parallel_cells = fit_grid_parallel(f, 1.0, onsets, switches, opts);
    if (serial_cells.size() != parallel_cells.size()) {
        printf("FAIL: cell count mismatch\n");
        return 1;
    }
    for (size_t i = 0; i < serial_cells.size(); ++i) {
        if (serial_cells[i].sse != parallel_cells[i].sse ||
            serial_cells[i].malware_rate != parallel_cells[i].malware_rate ||
            serial_cells[i].bonware_rate != parallel_cells[i].bonware_rate) {
            printf("FAIL: kernels disagree at cell %zu\n", i);
            return 1;
        }
    }
    printf("kernels agree on %zu cells\n", serial_cells.size());

    double serial_ms = 1e300, parallel_ms = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const double t0 = now_ms();
        const auto cells = fit_grid_serial(f, 1.0, onsets, switches, opts);
        const double t1 = now_ms();
        if (t1 - t0 < serial_ms) serial_ms = t1 - t0;
        (void)cells;
    }
    for (int r = 0; r < repeats; ++r) {
        const double t0 = now_ms();
        const auto cells = fit_grid_parallel(f, 1.0, onsets, switches, opts);
        const double t1 = now_ms();
        if (t1 - t0 < parallel_ms) parallel_ms = t1 - t0;
        (void)cells;
    }

    printf("serial:   %8.2f ms (best of %d)\n", serial_ms, repeats);
    printf("parallel: %8.2f ms (best of %d)\n", parallel_ms, repeats);
    printf("speedup:  %.2fx\n", serial_ms / parallel_ms);
    return 0;
}
