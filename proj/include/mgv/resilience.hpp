#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mgv/errors.hpp"

namespace mgv {

// Uniformly sampled series: t(i) = t0 + i*step.
struct TimeSeries {
    double t0 = 0.0;
    double step = 1.0;
    std::vector<double> v;

    size_t size() const { return v.size(); }
    double t(size_t i) const { return t0 + double(i) * step; }
    double t_end() const { return v.empty() ? t0 : t(v.size() - 1); }
};

enum class FunctionalityMode { kCompensatory, kNoncompensatory };

// F(t): attacked-over-baseline performance ratio. Noncompensatory series
// are capped at 1 (above-baseline performance never compensates).
struct FunctionalitySeries {
    TimeSeries series;
    FunctionalityMode mode = FunctionalityMode::kNoncompensatory;
    double nominal = 1.0;  // F_N
};

// Piecewise malware/bonware impact model:
//   dF/dt = (F_N - F) * B(t) - F * M(t)
//   M(t) = M0 on [tm, tstar), else 0   (boxcar)
//   B(t) = B0 for t >= tstar, else 0   (step)
struct ModelParams {
    double malware_rate = 0.0;   // M0, 1/s
    double bonware_rate = 0.0;   // B0, 1/s
    double onset_s = 0.0;        // tm
    double switch_s = 0.0;       // tstar
};

struct FitResult {
    ModelParams params;
    bool degenerate = false;  // flat input: rates pinned to 0, times meaningless
    std::optional<double> onset_s;    // unset when degenerate
    std::optional<double> switch_s;   // unset when degenerate
    double rmse = 0.0;
    std::vector<double> residuals;
    TimeSeries fitted;
};

struct FitOptions {
    bool parallel = true;       // OpenMP over the (tm, tstar) candidate grid
    double max_malware_rate = 0.5;
    double max_bonware_rate = 1.0;
};

// Centered moving mean with the window truncated symmetrically at the
// boundaries, so a linear ramp is preserved everywhere.
TimeSeries moving_average(const TimeSeries& series, double window_s);

FunctionalitySeries functionality(const TimeSeries& attack, const TimeSeries& baseline,
                                  FunctionalityMode mode, double smooth_window_s);

enum class AucInterval { kFull, kDeviation };

struct AucOptions {
    double smooth_window_s = 72.0;
    // deviation interval: contiguous envelope where the smoothed curves
    // differ by more than this fraction of the mean baseline level
    double deviation_tol_frac = 0.005;
};

// Fractional AUC loss of the attack run relative to baseline. Compensatory
// integrates the attack curve as-is (overshoot offsets loss);
// non-compensatory replaces it by the pointwise minimum first.
double auc_loss(const TimeSeries& baseline, const TimeSeries& attack, FunctionalityMode mode,
                AucInterval interval, const AucOptions& opts = {});

// Closed-form solution of the model on the given grid.
TimeSeries simulate_model(const ModelParams& params, double nominal,
                          const TimeSeries& grid_template);
double model_value(const ModelParams& params, double nominal, double t);

FitResult fit_model(const FunctionalitySeries& f, const FitOptions& opts = {});

// Exposed for the serial-vs-parallel equivalence test and the benchmark:
// evaluates every (onset, switch) candidate cell, conditionally optimizing
// the two rates per cell.
struct FitCell {
    size_t onset_idx;
    size_t switch_idx;
    double malware_rate;
    double bonware_rate;
    double sse;
};
std::vector<FitCell> fit_grid_serial(const TimeSeries& f, double nominal,
                                     const std::vector<size_t>& onset_candidates,
                                     const std::vector<size_t>& switch_candidates,
                                     const FitOptions& opts);
std::vector<FitCell> fit_grid_parallel(const TimeSeries& f, double nominal,
                                       const std::vector<size_t>& onset_candidates,
                                       const std::vector<size_t>& switch_candidates,
                                       const FitOptions& opts);

// Time-normalized resilience: R = integral of F over [t0, T] / (T - t0),
// trapezoidal on the sample grid.
double resilience_score(const FunctionalitySeries& f, double t0, double T);

struct MultiObjectiveScore {
    double rms;         // ||R_vec||_2
    double normalized;  // in [0, 1]
};
MultiObjectiveScore multi_objective(const std::vector<double>& r_vec,
                                    const std::vector<double>& nominal_vec);

}  // namespace mgv
