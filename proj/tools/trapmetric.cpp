#include <CLI11.hpp>
#include <exception>
#include <filesystem>

#include "trapmetric/log.hpp"
#include "trapmetric/pipeline.hpp"

namespace {

void add_common_options(CLI::App* cmd, trapmetric::RunConfig& cfg) {
    cmd->set_config("--config", "", "flat key=value config file; command-line flags win");
    cmd->add_option("--output", cfg.output_root, "run output directory")->required();
    cmd->add_option("--percentile", cfg.percentile, "depth percentile sampled inside each box")
        ->check(CLI::Range(0.0, 100.0));
    cmd->add_option("--confidence", cfg.confidence, "minimum detection confidence")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", cfg.seed, "base seed for every random draw");
    cmd->add_option("--jobs", cfg.jobs, "parallel worker count")->check(CLI::PositiveNumber);
    cmd->add_flag("--force-planar", cfg.force_planar,
                  "calibrate transects whose landmarks look planar instead of skipping them");
    cmd->add_flag("--force-low-inliers", cfg.force_low_inliers,
                  "keep flagged estimates when alignment consensus is low");
    cmd->add_option("--iterations", cfg.iterations, "RANSAC hypothesis count")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--inlier-threshold", cfg.inlier_threshold,
                    "consensus threshold in disparity units (default: 1.25 * MAD)");
    cmd->add_option("--min-inlier-fraction", cfg.min_inlier_fraction,
                    "consensus fraction below which a fit is rejected")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--refit-iterations", cfg.refit_iterations, "IRLS passes after consensus");
    cmd->add_option("--max-fit-pixels", cfg.max_fit_pixels,
                    "scene pixels subsampled per alignment fit");
    cmd->add_option("--disparity-floor", cfg.disparity_floor,
                    "calibrated disparities at or below this convert to capped, invalid depth");
    cmd->add_option("--spread-epsilon", cfg.spread_epsilon,
                    "aligned landmark spread (relative to the target disparity range) "
                    "below which calibration is flagged planar");
    cmd->add_option("--strip-rows", cfg.strip_rows,
                    "metadata strip height cropped from over-tall rasters");
    cmd->add_option("--density-min", cfg.density_grid.min_m, "density grid start (m)");
    cmd->add_option("--density-max", cfg.density_grid.max_m, "density grid end (m)");
    cmd->add_option("--density-step", cfg.density_grid.step_m, "density grid spacing (m)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trapmetric: camera-trap transect calibration and animal distance estimation"};
    app.require_subcommand(1);

    trapmetric::RunConfig cfg;
    std::filesystem::path spec_file;
    std::filesystem::path estimates_path;

    auto* calibrate =
        app.add_subcommand("calibrate", "calibrate every transect under the input root");
    calibrate->add_option("--input", cfg.input_root, "dataset root directory")->required();
    add_common_options(calibrate, cfg);

    auto* estimate = app.add_subcommand(
        "estimate", "estimate a metric distance for every detection of every observation");
    estimate->add_option("--input", cfg.input_root, "dataset root directory")->required();
    add_common_options(estimate, cfg);

    auto* evaluate =
        app.add_subcommand("evaluate", "join estimates with ground truth and report metrics");
    evaluate->add_option("--input", cfg.input_root, "dataset root directory")->required();
    evaluate->add_option("--estimates", estimates_path,
                         "estimates CSV (default: <output>/estimates.csv)");
    add_common_options(evaluate, cfg);

    auto* simulate =
        app.add_subcommand("simulate", "write synthetic transect directories from a scene spec");
    simulate->add_option("--input", spec_file, "JSON scene spec file")->required();
    add_common_options(simulate, cfg);

    CLI11_PARSE(app, argc, argv);

    try {
        if (calibrate->parsed()) return trapmetric::cmd_calibrate(cfg);
        if (estimate->parsed()) return trapmetric::cmd_estimate(cfg);
        if (evaluate->parsed()) {
            if (!estimates_path.empty()) cfg.estimates_path = estimates_path;
            return trapmetric::cmd_evaluate(cfg);
        }
        if (simulate->parsed()) return trapmetric::cmd_simulate(spec_file, cfg);
    } catch (const std::exception& e) {
        trapmetric::log_error(e.what());
        return trapmetric::kExitFatal;
    }
    return trapmetric::kExitFatal;
}
