#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "mgv/runner.hpp"

namespace {

std::string with_suffix(const std::string& path, const std::string& suffix) {
    const size_t dot = path.find_last_of('.');
    const size_t slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + suffix;
    return path.substr(0, dot) + suffix + path.substr(dot);
}

struct AnalyzeArgs {
    std::string baseline_csv;
    std::string attack_csv;
    std::string mode = "noncompensatory";
    std::string interval = "deviation";
    std::string metric = "fuel_eff_km_per_L";
    double smooth = 72.0;
    bool serial_fit = false;
};

void add_analyze_options(CLI::App* cmd, AnalyzeArgs& args) {
    cmd->add_option("--baseline", args.baseline_csv, "baseline run CSV")->required();
    cmd->add_option("--attack", args.attack_csv, "attack run CSV")->required();
    cmd->add_option("--mode", args.mode, "compensatory|noncompensatory")
        ->check(CLI::IsMember({"compensatory", "noncompensatory"}));
    cmd->add_option("--interval", args.interval, "full|deviation AUC interval")
        ->check(CLI::IsMember({"full", "deviation"}));
    cmd->add_option("--metric", args.metric, "CSV column used as the performance metric");
    cmd->add_option("--smooth", args.smooth, "moving-average window, seconds");
    cmd->add_flag("--serial-fit", args.serial_fit, "disable the OpenMP fit kernel");
}

mgv::AnalysisResult run_analysis(const AnalyzeArgs& args, mgv::AnalysisOptions& opts) {
    opts.mode = args.mode == "compensatory" ? mgv::FunctionalityMode::kCompensatory
                                            : mgv::FunctionalityMode::kNoncompensatory;
    opts.interval =
        args.interval == "full" ? mgv::AucInterval::kFull : mgv::AucInterval::kDeviation;
    opts.metric = args.metric;
    opts.smooth_window_s = args.smooth;
    opts.parallel_fit = !args.serial_fit;

    const mgv::TimeSeries base =
        mgv::csv_column_series(mgv::read_csv(args.baseline_csv), args.metric);
    const mgv::TimeSeries att =
        mgv::csv_column_series(mgv::read_csv(args.attack_csv), args.metric);
    return mgv::analyze_metrics(base, att, opts);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CAN-bus vehicle simulator and cyber-resilience analyzer"};
    app.require_subcommand(1);

    // run / baseline
    std::string scenario_path;
    std::string csv_override, canlog_override, summary_override;
    CLI::App* cmd_run = app.add_subcommand("run", "execute a scenario");
    cmd_run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd_run->add_option("--csv", csv_override, "override the CSV output path");
    cmd_run->add_option("--canlog", canlog_override, "override the CAN log output path");
    cmd_run->add_option("--summary", summary_override, "override the summary output path");

    CLI::App* cmd_baseline =
        app.add_subcommand("baseline", "execute a scenario with every attack stripped");
    cmd_baseline->add_option("scenario", scenario_path, "scenario JSON file")->required();
    cmd_baseline->add_option("--csv", csv_override, "override the CSV output path");
    cmd_baseline->add_option("--canlog", canlog_override, "override the CAN log output path");
    cmd_baseline->add_option("--summary", summary_override, "override the summary output path");

    // analyze / report
    AnalyzeArgs analyze_args;
    CLI::App* cmd_analyze =
        app.add_subcommand("analyze", "AUC loss, model fit and resilience for a run pair");
    add_analyze_options(cmd_analyze, analyze_args);

    AnalyzeArgs report_args;
    std::string out_json = "analysis.json";
    std::string out_csv = "functionality.csv";
    CLI::App* cmd_report =
        app.add_subcommand("report", "write the analysis JSON and a plot-ready F(t) CSV");
    add_analyze_options(cmd_report, report_args);
    cmd_report->add_option("--out-json", out_json, "analysis JSON output path");
    cmd_report->add_option("--out-csv", out_csv, "F(t) CSV output path");

    // fit
    std::string functionality_csv;
    std::string fit_column = "F_observed";
    bool fit_serial = false;
    CLI::App* cmd_fit = app.add_subcommand("fit", "fit the impact model to an F(t) CSV");
    cmd_fit->add_option("--functionality", functionality_csv, "CSV with t and F columns")
        ->required();
    cmd_fit->add_option("--column", fit_column, "functionality column name");
    cmd_fit->add_flag("--serial-fit", fit_serial, "disable the OpenMP fit kernel");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed() || cmd_baseline->parsed()) {
            mgv::ScenarioConfig cfg = mgv::load_scenario(scenario_path);
            if (cmd_baseline->parsed()) {
                cfg = mgv::strip_attacks(cfg);
                cfg.outputs.csv = with_suffix(cfg.outputs.csv, "_baseline");
                cfg.outputs.canlog = with_suffix(cfg.outputs.canlog, "_baseline");
                cfg.outputs.summary = with_suffix(cfg.outputs.summary, "_baseline");
            }
            if (!csv_override.empty()) cfg.outputs.csv = csv_override;
            if (!canlog_override.empty()) cfg.outputs.canlog = canlog_override;
            if (!summary_override.empty()) cfg.outputs.summary = summary_override;
            const mgv::RunArtifacts artifacts = mgv::run(cfg);
            std::cout << "csv: " << artifacts.csv_path << "\n"
                      << "canlog: " << artifacts.canlog_path << "\n"
                      << "summary: " << artifacts.summary_path << "\n"
                      << "distance_km: " << artifacts.summary.distance_km << "\n"
                      << "fuel_l: " << artifacts.summary.fuel_l << "\n";
            if (artifacts.summary.ended_early)
                std::cout << "note: route exhausted at t=" << artifacts.summary.duration_s
                          << " s\n";
            return 0;
        }
        if (cmd_analyze->parsed()) {
            mgv::AnalysisOptions opts;
            const mgv::AnalysisResult result = run_analysis(analyze_args, opts);
            std::cout << mgv::analysis_to_json(result, opts) << "\n";
            return 0;
        }
        if (cmd_report->parsed()) {
            mgv::AnalysisOptions opts;
            const mgv::AnalysisResult result = run_analysis(report_args, opts);
            std::ofstream json_out(out_json, std::ios::binary | std::ios::trunc);
            if (!json_out) throw mgv::Error("cannot write '" + out_json + "'");
            json_out << mgv::analysis_to_json(result, opts) << "\n";
            mgv::write_functionality_csv(out_csv, result);
            std::cout << "analysis: " << out_json << "\nfunctionality: " << out_csv << "\n";
            return 0;
        }
        if (cmd_fit->parsed()) {
            const mgv::CsvTable table = mgv::read_csv(functionality_csv);
            mgv::FunctionalitySeries f;
            f.series = mgv::csv_column_series(table, fit_column);
            mgv::FitOptions opts;
            opts.parallel = !fit_serial;
            const mgv::FitResult fit = mgv::fit_model(f, opts);
            nlohmann::ordered_json js;
            if (fit.degenerate) {
                js["fit"] = {{"M0", 0.0}, {"B0", 0.0}, {"tm", nullptr}, {"tstar", nullptr},
                             {"degenerate", true}};
            } else {
                js["fit"] = {{"M0", fit.params.malware_rate},
                             {"B0", fit.params.bonware_rate},
                             {"tm", fit.params.onset_s},
                             {"tstar", fit.params.switch_s},
                             {"degenerate", false}};
            }
            js["rmse"] = fit.rmse;
            std::cout << js.dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
