#include "trapmetric/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "trapmetric/errors.hpp"
#include "trapmetric/order_stats.hpp"

namespace trapmetric {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double silverman_bandwidth(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(n - 1));

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);

    return 0.9 * std::min(sigma, iqr / 1.34) * std::pow(static_cast<double>(n), -0.2);
}

}  // namespace

double mean_error(std::span<const PairedMeasurement> pairs) {
    if (pairs.empty()) throw EmptyInput("mean_error: no pairs");
    double sum = 0.0;
    for (const auto& p : pairs) sum += p.z_est - p.z_gt;
    return sum / static_cast<double>(pairs.size());
}

double mean_abs_error(std::span<const PairedMeasurement> pairs) {
    if (pairs.empty()) throw EmptyInput("mean_abs_error: no pairs");
    double sum = 0.0;
    for (const auto& p : pairs) sum += std::abs(p.z_est - p.z_gt);
    return sum / static_cast<double>(pairs.size());
}

std::vector<DensityPoint> density_export(std::span<const double> distances_m,
                                         const DensityGrid& grid) {
    if (distances_m.empty()) throw EmptyInput("density_export: no distances");
    if (!(grid.step_m > 0.0) || !(grid.max_m > grid.min_m))
        throw InvalidArgument("density_export: grid needs step > 0 and max > min");

    double h = silverman_bandwidth(distances_m);
    if (!(h > 0.0)) h = 0.1;  // identical values (or a single one): fixed fallback

    const int points =
        static_cast<int>(std::floor((grid.max_m - grid.min_m) / grid.step_m + 1e-9)) + 1;
    if (points < 2) throw InvalidArgument("density_export: grid needs at least two points");

    const double n = static_cast<double>(distances_m.size());
    std::vector<DensityPoint> density(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) {
        const double g = grid.min_m + static_cast<double>(k) * grid.step_m;
        double sum = 0.0;
        for (double x : distances_m) {
            const double t = (g - x) / h;
            sum += std::exp(-0.5 * t * t);
        }
        density[static_cast<std::size_t>(k)] = {g, sum * kInvSqrt2Pi / (n * h)};
    }

    double integral = 0.0;
    for (int k = 0; k + 1 < points; ++k)
        integral += 0.5 * grid.step_m *
                    (density[static_cast<std::size_t>(k)].density +
                     density[static_cast<std::size_t>(k) + 1].density);
    if (!(integral > 1e-300))
        throw DegenerateBandwidth("density_export: no probability mass on the grid");
    for (auto& d : density) d.density /= integral;
    return density;
}

std::map<std::string, BoxplotStats> boxplot_stats(std::span<const PairedMeasurement> pairs) {
    if (pairs.empty()) throw EmptyInput("boxplot_stats: no pairs");
    std::map<std::string, std::vector<double>> errors_by_transect;
    for (const auto& p : pairs) errors_by_transect[p.transect_id].push_back(p.z_est - p.z_gt);

    std::map<std::string, BoxplotStats> out;
    for (auto& [transect, errors] : errors_by_transect) {
        std::sort(errors.begin(), errors.end());
        BoxplotStats s;
        s.count = static_cast<std::int64_t>(errors.size());
        double sum = 0.0, abs_sum = 0.0;
        for (double e : errors) {
            sum += e;
            abs_sum += std::abs(e);
        }
        s.mean_error = sum / static_cast<double>(errors.size());
        s.mean_abs_error = abs_sum / static_cast<double>(errors.size());
        s.q1 = percentile_sorted(errors, 25.0);
        s.median = percentile_sorted(errors, 50.0);
        s.q3 = percentile_sorted(errors, 75.0);
        const double iqr = s.q3 - s.q1;
        const double lo_fence = s.q1 - 1.5 * iqr;
        const double hi_fence = s.q3 + 1.5 * iqr;
        s.whisker_lo = *std::find_if(errors.begin(), errors.end(),
                                     [&](double e) { return e >= lo_fence; });
        s.whisker_hi = *std::find_if(errors.rbegin(), errors.rend(),
                                     [&](double e) { return e <= hi_fence; });
        for (double e : errors)
            if (e < lo_fence || e > hi_fence) ++s.outlier_count;
        out[transect] = s;
    }
    return out;
}

EvaluationReport build_report(std::span<const PairedMeasurement> pairs, const DensityGrid& grid) {
    EvaluationReport report;
    report.mean_error_m = mean_error(pairs);
    report.mean_abs_error_m = mean_abs_error(pairs);
    report.count = static_cast<std::int64_t>(pairs.size());
    report.per_transect = boxplot_stats(pairs);

    std::vector<double> est, gt;
    est.reserve(pairs.size());
    gt.reserve(pairs.size());
    for (const auto& p : pairs) {
        est.push_back(p.z_est);
        gt.push_back(p.z_gt);
    }
    report.density_est = density_export(est, grid);
    report.density_gt = density_export(gt, grid);
    return report;
}

}  // namespace trapmetric
