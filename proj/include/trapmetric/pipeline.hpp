#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "trapmetric/calibration.hpp"
#include "trapmetric/metrics.hpp"
#include "trapmetric/robustfit.hpp"

namespace trapmetric {

/// Batch settings shared by every subcommand. Config-file values are applied
/// first; command-line flags win.
struct RunConfig {
    std::filesystem::path input_root;
    std::filesystem::path output_root;
    double percentile = 20.0;
    double confidence = 0.5;
    int iterations = 2000;
    std::optional<double> inlier_threshold;
    double min_inlier_fraction = 0.5;
    int refit_iterations = 20;
    int max_fit_pixels = 20000;
    double disparity_floor = 1e-6;
    double spread_epsilon = 0.02;
    int strip_rows = 80;
    int jobs = 1;
    bool force_planar = false;
    bool force_low_inliers = false;
    std::uint64_t seed = 0;
    DensityGrid density_grid;
    /// evaluate: defaults to output_root / "estimates.csv".
    std::optional<std::filesystem::path> estimates_path;
};

RansacConfig ransac_config(const RunConfig& cfg, std::uint64_t seed);
CalibrationConfig calibration_config(const RunConfig& cfg, std::uint64_t seed);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

/// Calibrates every discovered transect; writes per-transect artifacts
/// (<out>/<transect_id>/target_calibrated.pfm, target_mask.pgm,
/// calibration.json) and <out>/calibration_report.json. Returns kExitPartial
/// when any transect was skipped.
int cmd_calibrate(const RunConfig& cfg);

/// Estimates a distance per retained detection; writes <out>/estimates.csv
/// and <out>/estimation_report.json. Requires cmd_calibrate artifacts under
/// the same output root.
int cmd_estimate(const RunConfig& cfg);

/// Joins estimates against ground truth and writes
/// <out>/evaluation_report.json and <out>/density.csv. Unmatched keys are
/// reported with counts, not fatal.
int cmd_evaluate(const RunConfig& cfg);

/// Generates synthetic transect directories under the output root from a
/// JSON scene spec (see README for the schema).
int cmd_simulate(const std::filesystem::path& spec_file, const RunConfig& cfg);

/// Reads back the artifacts written by cmd_calibrate for one transect.
/// Throws CalibrationMissing when absent.
TransectCalibration load_calibration_artifacts(const std::filesystem::path& transect_out_dir);

}  // namespace trapmetric
