#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace trapmetric {

struct PairedMeasurement {
    double z_est = 0.0;
    double z_gt = 0.0;
    std::string transect_id;
    std::string image_id;
};

/// Per-transect distribution of the signed error z_est - z_gt.
struct BoxplotStats {
    double mean_error = 0.0;
    double mean_abs_error = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_lo = 0.0;  // most extreme points within 1.5 * IQR of the box
    double whisker_hi = 0.0;
    std::int64_t outlier_count = 0;
    std::int64_t count = 0;
};

struct DensityPoint {
    double grid_m = 0.0;
    double density = 0.0;
};

struct DensityGrid {
    double min_m = 0.0;
    double max_m = 25.0;
    double step_m = 0.1;
};

struct EvaluationReport {
    double mean_error_m = 0.0;
    double mean_abs_error_m = 0.0;
    std::int64_t count = 0;
    std::map<std::string, BoxplotStats> per_transect;
    std::vector<DensityPoint> density_est;
    std::vector<DensityPoint> density_gt;
};

/// (1/M) * sum(z_est - z_gt). Throws EmptyInput.
double mean_error(std::span<const PairedMeasurement> pairs);

/// (1/M) * sum|z_est - z_gt|. Throws EmptyInput.
double mean_abs_error(std::span<const PairedMeasurement> pairs);

/// Gaussian KDE with Silverman bandwidth h = 0.9 * min(sigma, IQR/1.34) *
/// n^(-1/5) (fallback h = 0.1 m when degenerate), evaluated on the grid and
/// renormalized so the trapezoidal integral equals 1.
std::vector<DensityPoint> density_export(std::span<const double> distances_m,
                                         const DensityGrid& grid);

/// Groups pairs by transect and computes quartiles (linear interpolation),
/// 1.5 * IQR whiskers, and outlier counts of the signed errors.
std::map<std::string, BoxplotStats> boxplot_stats(std::span<const PairedMeasurement> pairs);

EvaluationReport build_report(std::span<const PairedMeasurement> pairs, const DensityGrid& grid);

}  // namespace trapmetric
