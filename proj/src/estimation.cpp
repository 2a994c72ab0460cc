#include "trapmetric/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "masked_fit.hpp"
#include "trapmetric/errors.hpp"
#include "trapmetric/order_stats.hpp"

namespace trapmetric {

namespace {

struct PixelRect {
    Eigen::Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
    Eigen::Index cols() const { return x1 - x0; }
    Eigen::Index rows() const { return y1 - y0; }
    bool empty() const { return cols() <= 0 || rows() <= 0; }
};

PixelRect denormalize(const BoundingBox& b, Eigen::Index width, Eigen::Index height) {
    PixelRect r;
    r.x0 = static_cast<Eigen::Index>(std::floor(b.x * static_cast<double>(width)));
    r.y0 = static_cast<Eigen::Index>(std::floor(b.y * static_cast<double>(height)));
    r.x1 = static_cast<Eigen::Index>(std::ceil((b.x + b.w) * static_cast<double>(width)));
    r.y1 = static_cast<Eigen::Index>(std::ceil((b.y + b.h) * static_cast<double>(height)));
    r.x0 = std::clamp<Eigen::Index>(r.x0, 0, width);
    r.x1 = std::clamp<Eigen::Index>(r.x1, r.x0, width);
    r.y0 = std::clamp<Eigen::Index>(r.y0, 0, height);
    r.y1 = std::clamp<Eigen::Index>(r.y1, r.y0, height);
    return r;
}

}  // namespace

const char* to_string(DetectionCategory c) {
    switch (c) {
        case DetectionCategory::animal: return "animal";
        case DetectionCategory::human: return "human";
        case DetectionCategory::vehicle: return "vehicle";
    }
    return "?";
}

DetectionCategory category_from_string(const std::string& s) {
    if (s == "animal") return DetectionCategory::animal;
    if (s == "human") return DetectionCategory::human;
    if (s == "vehicle") return DetectionCategory::vehicle;
    throw SchemaError("unknown detection category: " + s);
}

BinaryMask build_exclusion_mask(const DetectionSet& detections, Eigen::Index image_width,
                                Eigen::Index image_height) {
    BinaryMask mask = BinaryMask::Constant(image_height, image_width, false);
    for (const auto& box : detections.boxes) {
        const PixelRect r = denormalize(box, image_width, image_height);
        if (!r.empty()) mask.block(r.y0, r.x0, r.rows(), r.cols()).setConstant(true);
    }
    return mask;
}

std::pair<DisparityMap, AffineFit> align_observation(const DisparityMap& d_obs,
                                                     const BinaryMask& m_obs,
                                                     const TransectCalibration& cal,
                                                     const RansacConfig& cfg,
                                                     int max_fit_pixels) {
    // the observation is mapped onto the calibrated target scale so animal
    // pixels, absent from the reference, still receive calibrated values
    const AffineFit fit = detail::fit_masked_pairs(d_obs, m_obs, cal.target_disparity_calibrated,
                                                   cal.target_mask, cfg, max_fit_pixels);
    return {fit.m * d_obs + fit.c, fit};
}

DistanceEstimate sample_distance(const DepthMap& depth, const BoundingBox& box,
                                 double percentile_p) {
    if (!(percentile_p >= 0.0 && percentile_p <= 100.0))
        throw InvalidArgument("sample_distance: percentile must lie in [0, 100]");
    if (depth.depth.rows() != depth.valid.rows() || depth.depth.cols() != depth.valid.cols())
        throw DimensionMismatch("sample_distance: depth and validity dimensions differ");

    const PixelRect r = denormalize(box, depth.depth.cols(), depth.depth.rows());
    if (r.empty()) throw EmptyBox("sample_distance: box denormalizes to zero pixels");

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(r.rows() * r.cols()));
    std::int64_t invalid = 0;
    for (Eigen::Index row = r.y0; row < r.y1; ++row)
        for (Eigen::Index col = r.x0; col < r.x1; ++col) {
            values.push_back(depth.depth(row, col));
            invalid += depth.valid(row, col) ? 0 : 1;
        }
    std::sort(values.begin(), values.end());

    DistanceEstimate e;
    e.distance_m = percentile_sorted(values, percentile_p);
    e.percentile_used = percentile_p;
    e.pixels_sampled = static_cast<std::int64_t>(values.size());
    e.invalid_pixel_fraction =
        static_cast<double>(invalid) / static_cast<double>(values.size());
    return e;
}

std::vector<DistanceEstimate> estimate_observation(const DisparityMap& d_obs,
                                                   const DetectionSet& detections,
                                                   const TransectCalibration& cal,
                                                   const EstimationConfig& cfg) {
    const BinaryMask exclusion =
        build_exclusion_mask(detections, d_obs.cols(), d_obs.rows());

    RansacConfig ransac = cfg.ransac;
    const double required_fraction = ransac.min_inlier_fraction;
    ransac.min_inlier_fraction = std::nextafter(0.0, 1.0);  // judge consensus ourselves

    const auto [calibrated, fit] =
        align_observation(d_obs, exclusion, cal, ransac, cfg.max_fit_pixels);
    const bool low_inliers = fit.inlier_fraction < required_fraction;
    if (low_inliers && !cfg.force_low_inliers)
        throw NoConsensus("estimate_observation: alignment consensus " +
                          std::to_string(fit.inlier_fraction) + " below " +
                          std::to_string(required_fraction));

    const DepthMap depth = disparity_to_depth(calibrated, cfg.disparity_floor);

    std::vector<DistanceEstimate> estimates;
    for (int i = 0; i < static_cast<int>(detections.boxes.size()); ++i) {
        const auto& box = detections.boxes[static_cast<std::size_t>(i)];
        if (cfg.animals_only && box.category != DetectionCategory::animal) continue;
        if (box.confidence < cfg.confidence_threshold) continue;
        DistanceEstimate e = sample_distance(depth, box, cfg.percentile);
        e.image_id = detections.image_id;
        e.box_index = i;
        e.capped_depth = e.invalid_pixel_fraction > cfg.capped_depth_max_fraction;
        e.tiny_box = e.pixels_sampled < cfg.tiny_box_area_px;
        e.alignment_low_inliers = low_inliers;
        estimates.push_back(std::move(e));
    }
    return estimates;
}

}  // namespace trapmetric
