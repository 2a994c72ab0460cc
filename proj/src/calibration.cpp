#include "trapmetric/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "masked_fit.hpp"
#include "trapmetric/errors.hpp"
#include "trapmetric/order_stats.hpp"
#include "trapmetric/random.hpp"

namespace trapmetric {

namespace {

RansacConfig with_seed(RansacConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    return cfg;
}

int target_reference_index(std::span<const ReferenceSample> refs) {
    int target = 0;
    for (int i = 1; i < static_cast<int>(refs.size()); ++i)
        if (refs[i].landmark_distance_m > refs[target].landmark_distance_m) target = i;
    return target;
}

std::vector<double> aligned_landmark_medians(std::span<const ReferenceSample> refs,
                                             std::span<const AffineFit> fits) {
    std::vector<double> medians(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const double raw = median_masked_disparity(refs[i].disparity, refs[i].landmark_mask);
        medians[i] = evaluate_affine(fits[i], raw);
    }
    return medians;
}

double spread_of(std::span<const double> medians, const DisparityMap& raw_target) {
    const double range = raw_target.maxCoeff() - raw_target.minCoeff();
    if (!(range > 0.0)) return 0.0;
    const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
    return (*hi - *lo) / range;
}

double max_residual_m(std::span<const double> medians, std::span<const ReferenceSample> refs,
                      const AffineFit& metric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const double predicted_inverse = evaluate_affine(metric, medians[i]);
        const double residual = std::abs(1.0 / predicted_inverse - refs[i].landmark_distance_m);
        worst = std::max(worst, residual);
    }
    return worst;
}

void validate_references(std::span<const ReferenceSample> refs) {
    const Eigen::Index rows = refs[0].disparity.rows(), cols = refs[0].disparity.cols();
    for (const auto& ref : refs) {
        if (ref.disparity.rows() != rows || ref.disparity.cols() != cols ||
            ref.landmark_mask.rows() != rows || ref.landmark_mask.cols() != cols)
            throw DimensionMismatch("calibrate_transect: reference rasters differ in size");
        if (ref.landmark_mask.count() == 0)
            throw EmptyMask("calibrate_transect: a landmark mask has no set pixels");
        if (!(ref.landmark_distance_m > 0.0))
            throw CalibrationError("calibrate_transect: landmark distances must be positive");
    }
    std::vector<double> distances;
    distances.reserve(refs.size());
    for (const auto& ref : refs) distances.push_back(ref.landmark_distance_m);
    std::sort(distances.begin(), distances.end());
    if (std::adjacent_find(distances.begin(), distances.end()) != distances.end())
        throw CalibrationError("calibrate_transect: landmark distances must be pairwise distinct");
}

AffineFit exact_two_point_fit(double x0, double y0, double x1, double y1) {
    if (x0 == x1)
        throw CalibrationDegenerate(
            "calibrate_transect: both landmarks share one aligned disparity");
    AffineFit fit;
    fit.m = (y1 - y0) / (x1 - x0);
    fit.c = y0 - fit.m * x0;
    fit.inlier_count = 2;
    fit.inlier_fraction = 1.0;
    fit.residual_l1 = 0.5 * (std::abs(fit.m * x0 + fit.c - y0) + std::abs(fit.m * x1 + fit.c - y1));
    return fit;
}

}  // namespace

double median_masked_disparity(const DisparityMap& d, const BinaryMask& m) {
    if (d.rows() != m.rows() || d.cols() != m.cols())
        throw DimensionMismatch("median_masked_disparity: raster and mask dimensions differ");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m.count()));
    for (Eigen::Index r = 0; r < d.rows(); ++r)
        for (Eigen::Index c = 0; c < d.cols(); ++c)
            if (m(r, c)) values.push_back(d(r, c));
    if (values.empty()) throw EmptyMask("median_masked_disparity: mask has no set pixels");
    return median(std::move(values));
}

AffineFit align_to_target(const DisparityMap& d_i, const BinaryMask& m_i,
                          const DisparityMap& d_target, const BinaryMask& m_target,
                          const RansacConfig& cfg, int max_fit_pixels) {
    return detail::fit_masked_pairs(d_i, m_i, d_target, m_target, cfg, max_fit_pixels);
}

TransectCalibration calibrate_transect(std::span<const ReferenceSample> refs,
                                       const CalibrationConfig& cfg) {
    if (refs.size() < 2)
        throw TooFewReferences("calibrate_transect: at least two references are required");
    validate_references(refs);

    const int target = target_reference_index(refs);
    const auto& target_ref = refs[static_cast<std::size_t>(target)];

    std::vector<AffineFit> fits(refs.size());
    for (int i = 0; i < static_cast<int>(refs.size()); ++i) {
        if (i == target) {
            fits[static_cast<std::size_t>(i)] = AffineFit{1.0, 0.0, 0, 0.0, 0.0};
            continue;
        }
        const auto seed = mix_seed(cfg.ransac.seed, mix_seed(0x616C696Eu, static_cast<std::uint64_t>(i)));
        fits[static_cast<std::size_t>(i)] =
            align_to_target(refs[static_cast<std::size_t>(i)].disparity,
                            refs[static_cast<std::size_t>(i)].landmark_mask, target_ref.disparity,
                            target_ref.landmark_mask, with_seed(cfg.ransac, seed),
                            cfg.max_fit_pixels);
    }

    const std::vector<double> medians = aligned_landmark_medians(refs, fits);
    const double spread = spread_of(medians, target_ref.disparity);
    const bool planar = spread < cfg.spread_epsilon;
    if (planar && !cfg.force_planar)
        throw CalibrationDegenerate(
            "calibrate_transect: landmarks appear planar (aligned disparity spread " +
            std::to_string(spread) + " < " + std::to_string(cfg.spread_epsilon) + ")");

    AffineFit metric;
    if (refs.size() == 2) {
        metric = exact_two_point_fit(medians[0], 1.0 / refs[0].landmark_distance_m, medians[1],
                                     1.0 / refs[1].landmark_distance_m);
    } else {
        std::vector<SamplePair> samples(refs.size());
        for (std::size_t i = 0; i < refs.size(); ++i)
            samples[i] = {medians[i], 1.0 / refs[i].landmark_distance_m};
        metric = fit_affine(samples, with_seed(cfg.ransac, mix_seed(cfg.ransac.seed, "metric-fit")));
    }
    if (metric.m == 0.0)
        throw CalibrationDegenerate("calibrate_transect: metric fit collapsed to zero scale");

    TransectCalibration cal;
    cal.target_disparity_calibrated = metric.m * target_ref.disparity + metric.c;
    cal.target_mask = target_ref.landmark_mask;
    cal.metric_fit = metric;
    cal.per_reference_fits = std::move(fits);
    cal.target_index = target;
    cal.diagnostics.landmark_disparity_spread = spread;
    cal.diagnostics.landmark_count = static_cast<int>(refs.size());
    cal.diagnostics.max_landmark_residual_m = max_residual_m(medians, refs, metric);
    cal.diagnostics.planar_warning = planar;
    return cal;
}

DepthMap disparity_to_depth(const DisparityMap& calibrated, double disparity_floor) {
    if (!(disparity_floor > 0.0))
        throw InvalidArgument("disparity_to_depth: disparity_floor must be > 0");
    DepthMap out;
    out.depth = calibrated.max(disparity_floor).inverse();
    out.valid = calibrated > disparity_floor;
    return out;
}

CalibrationDiagnostics calibration_diagnostics(const TransectCalibration& cal,
                                               std::span<const ReferenceSample> refs,
                                               const CalibrationConfig& cfg) {
    if (refs.size() != cal.per_reference_fits.size())
        throw InvalidArgument("calibration_diagnostics: reference count mismatch");
    const std::vector<double> medians = aligned_landmark_medians(refs, cal.per_reference_fits);
    const auto& target_ref = refs[static_cast<std::size_t>(cal.target_index)];

    CalibrationDiagnostics d;
    d.landmark_disparity_spread = spread_of(medians, target_ref.disparity);
    d.landmark_count = static_cast<int>(refs.size());
    d.max_landmark_residual_m = max_residual_m(medians, refs, cal.metric_fit);
    d.planar_warning = d.landmark_disparity_spread < cfg.spread_epsilon;
    return d;
}

}  // namespace trapmetric
