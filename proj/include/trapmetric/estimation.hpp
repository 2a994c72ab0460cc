#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trapmetric/calibration.hpp"
#include "trapmetric/types.hpp"

namespace trapmetric {

enum class DetectionCategory { animal, human, vehicle };

const char* to_string(DetectionCategory c);
DetectionCategory category_from_string(const std::string& s);

/// Detector output box in normalized [0, 1] image coordinates, (x, y) the
/// top-left corner.
struct BoundingBox {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
    double confidence = 0.0;
    DetectionCategory category = DetectionCategory::animal;
};

struct DetectionSet {
    std::string image_id;
    std::vector<BoundingBox> boxes;
};

struct DistanceEstimate {
    std::string image_id;
    int box_index = 0;
    double distance_m = 0.0;
    double percentile_used = 20.0;
    std::int64_t pixels_sampled = 0;
    double invalid_pixel_fraction = 0.0;
    // flags
    bool capped_depth = false;
    bool tiny_box = false;
    bool alignment_low_inliers = false;
};

struct EstimationConfig {
    double percentile = 20.0;
    double confidence_threshold = 0.5;
    /// Distances are emitted only for animal boxes; all boxes still feed the
    /// exclusion mask.
    bool animals_only = true;
    /// Keep estimates whose alignment consensus fell below
    /// ransac.min_inlier_fraction (flagged) instead of skipping the image.
    bool force_low_inliers = false;
    int max_fit_pixels = 20000;
    double disparity_floor = 1e-6;
    int tiny_box_area_px = 25;
    double capped_depth_max_fraction = 0.5;
    RansacConfig ransac;
};

/// Pixel (u, v) is set iff it falls inside any box after denormalization
/// (floor for the min corner, ceil for the max corner).
BinaryMask build_exclusion_mask(const DetectionSet& detections, Eigen::Index image_width,
                                Eigen::Index image_height);

/// Maps the observation disparity onto the calibrated target scale by
/// fitting over pixels excluded by neither the landmark mask nor the
/// detections. Returns the calibrated observation disparity and the fit.
std::pair<DisparityMap, AffineFit> align_observation(const DisparityMap& d_obs,
                                                     const BinaryMask& m_obs,
                                                     const TransectCalibration& cal,
                                                     const RansacConfig& cfg,
                                                     int max_fit_pixels = 20000);

/// Percentile of depth values inside the box; invalid pixels enter at the
/// capped value and are counted in invalid_pixel_fraction. image_id and
/// box_index are left for the caller.
DistanceEstimate sample_distance(const DepthMap& depth, const BoundingBox& box,
                                 double percentile = 20.0);

/// Full per-observation workflow: exclusion mask, alignment onto the target
/// scale, depth conversion, and one percentile sample per retained box.
/// Throws NoConsensus when alignment support is too low and
/// force_low_inliers is not set.
std::vector<DistanceEstimate> estimate_observation(const DisparityMap& d_obs,
                                                   const DetectionSet& detections,
                                                   const TransectCalibration& cal,
                                                   const EstimationConfig& cfg);

}  // namespace trapmetric
