#pragma once

#include <map>
#include <string>
#include <vector>

#include "mgv/resilience.hpp"
#include "mgv/scenario.hpp"

namespace mgv {

struct CsvRow {
    double t = 0.0;
    double speed_kmh = 0.0;
    double rpm = 0.0;
    int gear = 0;
    double throttle = 0.0;
    double brake = 0.0;
    double fuel_used_l = 0.0;
    double fuel_eff_km_per_l = 0.0;
    double coolant_c = 0.0;
    int fan_on = 0;
    double odometer_km = 0.0;
};

struct RunSummary {
    double duration_s = 0.0;
    bool ended_early = false;
    double distance_km = 0.0;
    double fuel_l = 0.0;
    double mean_speed_kmh = 0.0;
    uint64_t seed = 0;
    std::string config_hash;
    uint64_t frames_logged = 0;
    uint64_t fan_reflashes = 0;
    std::map<std::string, uint64_t> tap_frames;       // "<bus>/<tap>" -> frames published
    std::map<std::string, uint64_t> plugin_counters;  // per-plugin audit counts
};

struct RunArtifacts {
    std::vector<CsvRow> rows;
    RunSummary summary;
    std::string csv_path;
    std::string canlog_path;
    std::string summary_path;
};

// Executes the scenario's fixed-step loop and writes csv / canlog / summary.
// Byte-deterministic in (config, seed).
RunArtifacts run(const ScenarioConfig& config);

// -- artifact io ------------------------------------------------------------

void write_run_csv(const std::string& path, const std::vector<CsvRow>& rows);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::string& path);

// Column as a uniform series over the table's "t" column.
TimeSeries csv_column_series(const CsvTable& table, const std::string& column);

// -- analysis ---------------------------------------------------------------

struct AnalysisOptions {
    FunctionalityMode mode = FunctionalityMode::kNoncompensatory;
    AucInterval interval = AucInterval::kDeviation;
    double smooth_window_s = 72.0;
    std::string metric = "fuel_eff_km_per_L";
    bool parallel_fit = true;
};

struct AnalysisResult {
    double auc_loss_value = 0.0;
    FunctionalitySeries functionality_series;
    FitResult fit;
    double score = 0.0;             // R
    double score_normalized = 0.0;  // calligraphic R for the single objective
    double analysis_t0 = 0.0;       // leading still-standing rows are trimmed
};

AnalysisResult analyze_metrics(const TimeSeries& baseline_metric,
                               const TimeSeries& attack_metric, const AnalysisOptions& opts);

std::string analysis_to_json(const AnalysisResult& result, const AnalysisOptions& opts);

// Plot-ready F(t): "t,F_observed,F_fitted".
void write_functionality_csv(const std::string& path, const AnalysisResult& result);

}  // namespace mgv
