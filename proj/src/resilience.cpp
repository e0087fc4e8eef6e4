#include "mgv/resilience.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace mgv {

namespace {

constexpr double kGrid_eps = 1e-9;

void require_aligned(const TimeSeries& a, const TimeSeries& b) {
    if (a.size() != b.size() || std::abs(a.t0 - b.t0) > 1e-9 ||
        std::abs(a.step - b.step) > 1e-12)
        throw ArgumentError("series grids do not match (different duration, start or step)");
    if (a.v.empty()) throw ArgumentError("empty series");
}

double trapezoid(const std::vector<double>& v, size_t i0, size_t i1, double step) {
    double area = 0.0;
    for (size_t i = i0; i < i1; ++i) area += 0.5 * (v[i] + v[i + 1]) * step;
    return area;
}

std::string format_time(double t) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), t, std::chars_format::fixed, 3);
    return std::string(buf, res.ptr);
}

// Golden-section minimization of a unimodal objective on [lo, hi].
template <typename F>
double golden_min(F&& objective, double lo, double hi, int iterations = 56) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - (b - a) * kInvPhi;
    double d = a + (b - a) * kInvPhi;
    double fc = objective(c);
    double fd = objective(d);
    for (int it = 0; it < iterations; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * kInvPhi;
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * kInvPhi;
            fd = objective(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

TimeSeries moving_average(const TimeSeries& series, double window_s) {
    if (series.step <= 0) throw ArgumentError("moving_average: step must be positive");
    if (window_s < series.step - 1e-12)
        throw ArgumentError("moving_average: window smaller than the series step");
    const size_t n = series.size();
    if (n == 0) throw ArgumentError("moving_average: empty series");

    const size_t half = size_t(window_s / (2.0 * series.step) + kGrid_eps);

    std::vector<double> prefix(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series.v[i];

    TimeSeries out = series;
    for (size_t i = 0; i < n; ++i) {
        const size_t r = std::min({half, i, n - 1 - i});
        out.v[i] = (prefix[i + r + 1] - prefix[i - r]) / double(2 * r + 1);
    }
    return out;
}

FunctionalitySeries functionality(const TimeSeries& attack, const TimeSeries& baseline,
                                  FunctionalityMode mode, double smooth_window_s) {
    require_aligned(attack, baseline);
    const TimeSeries a = moving_average(attack, smooth_window_s);
    const TimeSeries b = moving_average(baseline, smooth_window_s);

    FunctionalitySeries f;
    f.series = a;
    f.mode = mode;
    f.nominal = 1.0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (b.v[i] <= 0.0)
            throw Error("functionality: baseline is zero at t=" + format_time(b.t(i)));
        if (mode == FunctionalityMode::kNoncompensatory)
            f.series.v[i] = a.v[i] / std::max(a.v[i], b.v[i]);
        else
            f.series.v[i] = a.v[i] / b.v[i];
    }
    return f;
}

double auc_loss(const TimeSeries& baseline, const TimeSeries& attack, FunctionalityMode mode,
                AucInterval interval, const AucOptions& opts) {
    require_aligned(attack, baseline);
    const TimeSeries b = moving_average(baseline, opts.smooth_window_s);
    const TimeSeries a = moving_average(attack, opts.smooth_window_s);
    const size_t n = b.size();

    size_t i0 = 0, i1 = n - 1;
    if (interval == AucInterval::kDeviation) {
        const double level = std::accumulate(b.v.begin(), b.v.end(), 0.0) / double(n);
        const double tol = opts.deviation_tol_frac * level;
        size_t first = n, last = 0;
        for (size_t i = 0; i < n; ++i) {
            if (std::abs(b.v[i] - a.v[i]) > tol) {
                if (first == n) first = i;
                last = i;
            }
        }
        if (first >= last) return 0.0;  // curves never deviate
        i0 = first;
        i1 = last;
    }

    std::vector<double> adjusted = a.v;
    if (mode == FunctionalityMode::kNoncompensatory)
        for (size_t i = 0; i < n; ++i) adjusted[i] = std::min(a.v[i], b.v[i]);

    const double area_base = trapezoid(b.v, i0, i1, b.step);
    if (area_base <= 0.0) throw Error("auc_loss: baseline integral is zero");
    const double area_attack = trapezoid(adjusted, i0, i1, b.step);
    return (area_base - area_attack) / area_base;
}

double model_value(const ModelParams& p, double nominal, double t) {
    if (p.switch_s < p.onset_s) throw ArgumentError("model: switch time before onset");
    if (t < p.onset_s) return nominal;
    if (t < p.switch_s) return nominal * std::exp(-p.malware_rate * (t - p.onset_s));
    const double f_switch = nominal * std::exp(-p.malware_rate * (p.switch_s - p.onset_s));
    return nominal - (nominal - f_switch) * std::exp(-p.bonware_rate * (t - p.switch_s));
}

TimeSeries simulate_model(const ModelParams& params, double nominal,
                          const TimeSeries& grid_template) {
    if (params.malware_rate < 0 || params.bonware_rate < 0)
        throw ArgumentError("model: rates must be non-negative");
    TimeSeries out = grid_template;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = model_value(params, nominal, out.t(i));
    return out;
}

namespace {

// Full-series SSE with incremental exponentials (one exp per segment, then
// a multiply per sample).
double full_sse(const std::vector<double>& v, double /*t0*/, double step, double nominal,
                size_t onset_idx, size_t switch_idx, double m0, double b0) {
    const size_t n = v.size();
    double sse = 0.0;
    for (size_t i = 0; i < onset_idx; ++i) {
        const double r = nominal - v[i];
        sse += r * r;
    }
    const double decay = std::exp(-m0 * step);
    double f = nominal;
    for (size_t i = onset_idx; i <= switch_idx && i < n; ++i) {
        const double r = f - v[i];
        sse += r * r;
        f *= decay;
    }
    if (switch_idx + 1 < n) {
        const double f_switch =
            nominal * std::exp(-m0 * step * double(switch_idx - onset_idx));
        const double rise = std::exp(-b0 * step);
        double gap = (nominal - f_switch) * rise;
        for (size_t i = switch_idx + 1; i < n; ++i) {
            const double r = (nominal - gap) - v[i];
            sse += r * r;
            gap *= rise;
        }
    }
    return sse;
}

FitCell evaluate_cell(const TimeSeries& f, double nominal, size_t onset_idx, size_t switch_idx,
                      const FitOptions& opts) {
    const auto& v = f.v;
    const size_t n = v.size();
    const double step = f.step;

    // conditional optimum of the malware rate on the degradation segment
    auto deg_sse = [&](double m0) {
        const double decay = std::exp(-m0 * step);
        double model = nominal;
        double sse = 0.0;
        for (size_t i = onset_idx; i <= switch_idx; ++i) {
            const double r = model - v[i];
            sse += r * r;
            model *= decay;
        }
        return sse;
    };
    const double m0 = golden_min(deg_sse, 0.0, opts.max_malware_rate);

    // conditional optimum of the bonware rate on the recovery segment
    const double f_switch = nominal * std::exp(-m0 * step * double(switch_idx - onset_idx));
    auto rec_sse = [&](double b0) {
        const double rise = std::exp(-b0 * step);
        double gap = nominal - f_switch;
        double sse = 0.0;
        for (size_t i = switch_idx; i < n; ++i) {
            const double r = (nominal - gap) - v[i];
            sse += r * r;
            gap *= rise;
        }
        return sse;
    };
    const double b0 = golden_min(rec_sse, 0.0, opts.max_bonware_rate);

    FitCell cell;
    cell.onset_idx = onset_idx;
    cell.switch_idx = switch_idx;
    cell.malware_rate = m0;
    cell.bonware_rate = b0;
    cell.sse = full_sse(v, f.t0, step, nominal, onset_idx, switch_idx, m0, b0);
    return cell;
}

std::vector<std::pair<size_t, size_t>> valid_pairs(const std::vector<size_t>& onsets,
                                                   const std::vector<size_t>& switches) {
    std::vector<std::pair<size_t, size_t>> pairs;
    pairs.reserve(onsets.size() * switches.size());
    for (size_t im : onsets)
        for (size_t is : switches)
            if (im < is) pairs.emplace_back(im, is);
    return pairs;
}

}  // namespace

std::vector<FitCell> fit_grid_serial(const TimeSeries& f, double nominal,
                                     const std::vector<size_t>& onset_candidates,
                                     const std::vector<size_t>& switch_candidates,
                                     const FitOptions& opts) {
    const auto pairs = valid_pairs(onset_candidates, switch_candidates);
    std::vector<FitCell> cells(pairs.size());
    for (size_t k = 0; k < pairs.size(); ++k)
        cells[k] = evaluate_cell(f, nominal, pairs[k].first, pairs[k].second, opts);
    return cells;
}

std::vector<FitCell> fit_grid_parallel(const TimeSeries& f, double nominal,
                                       const std::vector<size_t>& onset_candidates,
                                       const std::vector<size_t>& switch_candidates,
                                       const FitOptions& opts) {
    const auto pairs = valid_pairs(onset_candidates, switch_candidates);
    std::vector<FitCell> cells(pairs.size());
    // Each cell is independent and written by index, so the result does not
    // depend on the thread schedule.
    const long count = long(pairs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long k = 0; k < count; ++k)
        cells[size_t(k)] =
            evaluate_cell(f, nominal, pairs[size_t(k)].first, pairs[size_t(k)].second, opts);
    return cells;
}

FitResult fit_model(const FunctionalitySeries& f, const FitOptions& opts) {
    const TimeSeries& series = f.series;
    const size_t n = series.size();
    if (n < 8) throw ArgumentError("fit_model: series too short");
    const double nominal = f.nominal;
    const double step = series.step;

    FitResult result;

    double max_deficit = 0.0;
    for (double x : series.v) max_deficit = std::max(max_deficit, nominal - x);
    if (max_deficit <= 1e-9) {
        // flat series: no attack signature to fit
        result.degenerate = true;
        result.params = ModelParams{0.0, 0.0, 0.0, 0.0};
        result.fitted = series;
        std::fill(result.fitted.v.begin(), result.fitted.v.end(), nominal);
        result.residuals.resize(n);
        double sq = 0.0;
        for (size_t i = 0; i < n; ++i) {
            result.residuals[i] = series.v[i] - nominal;
            sq += result.residuals[i] * result.residuals[i];
        }
        result.rmse = std::sqrt(sq / double(n));
        return result;
    }

    // light smoothing, used only to locate the candidate windows
    TimeSeries deficit = series;
    for (size_t i = 0; i < n; ++i) deficit.v[i] = nominal - series.v[i];
    const TimeSeries ds = moving_average(deficit, std::max(step, 9.0 * step));

    const double ds_max = *std::max_element(ds.v.begin(), ds.v.end());
    const double level = 0.2 * ds_max;
    size_t i_start = 0;
    while (i_start < n && ds.v[i_start] < level) ++i_start;
    size_t i_peak = 0;
    for (size_t i = 1; i < n; ++i)
        if (ds.v[i] > ds.v[i_peak]) i_peak = i;

    const size_t back = size_t(100.0 / step + 0.5);
    const size_t fwd = size_t(5.0 / step + 0.5);
    const size_t halo = size_t(40.0 / step + 0.5);

    std::vector<size_t> onsets, switches;
    const size_t on_lo = i_start > back ? i_start - back : 0;
    const size_t on_hi = std::min(n - 2, i_start + fwd);
    for (size_t i = on_lo; i <= on_hi; ++i) onsets.push_back(i);
    const size_t sw_lo = std::max<size_t>(1, i_peak > halo ? i_peak - halo : 1);
    const size_t sw_hi = std::min(n - 1, i_peak + halo);
    for (size_t i = sw_lo; i <= sw_hi; ++i) switches.push_back(i);

    std::vector<FitCell> cells =
        opts.parallel ? fit_grid_parallel(series, nominal, onsets, switches, opts)
                      : fit_grid_serial(series, nominal, onsets, switches, opts);
    if (cells.empty()) throw ArgumentError("fit_model: no valid (onset, switch) candidates");

    const FitCell* best = &cells[0];
    for (const FitCell& c : cells) {
        if (c.sse < best->sse ||
            (c.sse == best->sse && (c.onset_idx < best->onset_idx ||
                                    (c.onset_idx == best->onset_idx &&
                                     c.switch_idx < best->switch_idx))))
            best = &c;
    }

    // polish the rates against the full series at the chosen cell
    double m0 = best->malware_rate;
    double b0 = best->bonware_rate;
    for (int round = 0; round < 3; ++round) {
        m0 = golden_min(
            [&](double m) {
                return full_sse(series.v, series.t0, step, nominal, best->onset_idx,
                                best->switch_idx, m, b0);
            },
            0.0, opts.max_malware_rate);
        b0 = golden_min(
            [&](double b) {
                return full_sse(series.v, series.t0, step, nominal, best->onset_idx,
                                best->switch_idx, m0, b);
            },
            0.0, opts.max_bonware_rate);
    }

    result.params.malware_rate = m0;
    result.params.bonware_rate = b0;
    result.params.onset_s = series.t(best->onset_idx);
    result.params.switch_s = series.t(best->switch_idx);
    result.onset_s = result.params.onset_s;
    result.switch_s = result.params.switch_s;

    result.fitted = simulate_model(result.params, nominal, series);
    result.residuals.resize(n);
    double sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        result.residuals[i] = series.v[i] - result.fitted.v[i];
        sq += result.residuals[i] * result.residuals[i];
    }
    result.rmse = std::sqrt(sq / double(n));
    return result;
}

double resilience_score(const FunctionalitySeries& f, double t0, double T) {
    const TimeSeries& s = f.series;
    if (T <= t0) throw ArgumentError("resilience_score: empty interval");
    if (s.size() < 2) throw ArgumentError("resilience_score: series too short");
    if (t0 < s.t0 - 1e-9 || T > s.t_end() + 1e-9)
        throw ArgumentError("resilience_score: interval outside the series");

    const size_t i0 = size_t(std::ceil((t0 - s.t0) / s.step - kGrid_eps));
    const size_t i1 = size_t(std::floor((T - s.t0) / s.step + kGrid_eps));
    if (i1 <= i0) throw ArgumentError("resilience_score: interval covers no samples");
    const double area = trapezoid(s.v, i0, i1, s.step);
    return area / (s.t(i1) - s.t(i0));
}

MultiObjectiveScore multi_objective(const std::vector<double>& r_vec,
                                    const std::vector<double>& nominal_vec) {
    if (r_vec.empty()) throw ArgumentError("multi_objective: empty resilience vector");
    if (r_vec.size() != nominal_vec.size())
        throw ArgumentError("multi_objective: vector lengths differ");
    double sum_r = 0.0, sum_n = 0.0;
    for (size_t i = 0; i < r_vec.size(); ++i) {
        if (nominal_vec[i] <= 0.0)
            throw ArgumentError("multi_objective: nominal functionality must be positive");
        sum_r += r_vec[i] * r_vec[i];
        sum_n += nominal_vec[i] * nominal_vec[i];
    }
    MultiObjectiveScore score;
    score.rms = std::sqrt(sum_r);
    score.normalized = score.rms / std::sqrt(sum_n);
    return score;
}

}  // namespace mgv
