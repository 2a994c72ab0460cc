#pragma once

#include <span>
#include <vector>

#include "trapmetric/robustfit.hpp"
#include "trapmetric/types.hpp"

namespace trapmetric {

/// One annotated reference image of a transect: its disparity map, the
/// binary mask covering the landmark, and the measured camera-to-landmark
/// distance. Distances within a transect must be pairwise distinct.
struct ReferenceSample {
    DisparityMap disparity;
    BinaryMask landmark_mask;
    double landmark_distance_m = 0.0;
};

struct CalibrationDiagnostics {
    /// (max - min aligned landmark median) / raw target disparity range.
    double landmark_disparity_spread = 0.0;
    int landmark_count = 0;
    /// max over landmarks of |1/(m*x_i + c*) - z_i|.
    double max_landmark_residual_m = 0.0;
    /// Set when the spread falls below spread_epsilon: the landmarks sit in
    /// (or near) a single disparity plane and the metric fit is unreliable.
    bool planar_warning = false;
};

/// Result of calibrating one transect. The target reference is the one with
/// the largest landmark distance; its calibrated disparity anchors every
/// later observation alignment.
struct TransectCalibration {
    DisparityMap target_disparity_calibrated;  // units 1/m
    BinaryMask target_mask;
    AffineFit metric_fit;
    /// Parallel to the input references; the target holds the identity fit.
    std::vector<AffineFit> per_reference_fits;
    CalibrationDiagnostics diagnostics;
    int target_index = -1;
};

struct CalibrationConfig {
    RansacConfig ransac;
    /// Scene pixels are uniformly subsampled to at most this many pairs per
    /// alignment fit.
    int max_fit_pixels = 20000;
    double spread_epsilon = 0.02;
    double disparity_floor = 1e-6;
    bool force_planar = false;
};

/// Median disparity inside the set pixels of the mask; for even counts, the
/// mean of the two central order statistics.
double median_masked_disparity(const DisparityMap& d, const BinaryMask& m);

/// Fits (m, c) so that m * d_i + c matches d_target over pixels excluded by
/// neither mask, subsampled to max_fit_pixels.
AffineFit align_to_target(const DisparityMap& d_i, const BinaryMask& m_i,
                          const DisparityMap& d_target, const BinaryMask& m_target,
                          const RansacConfig& cfg, int max_fit_pixels = 20000);

/// Full per-transect calibration: aligns every reference onto the target
/// scale, fits the metric transform from aligned landmark medians against
/// inverse landmark distances (exact 2x2 solve when exactly two references),
/// and emits the calibrated target disparity with diagnostics.
TransectCalibration calibrate_transect(std::span<const ReferenceSample> refs,
                                       const CalibrationConfig& cfg);

/// Per-pixel depth = 1 / max(value, disparity_floor); pixels at or below the
/// floor are flagged invalid.
DepthMap disparity_to_depth(const DisparityMap& calibrated, double disparity_floor = 1e-6);

/// Recomputes diagnostics for a finished calibration.
CalibrationDiagnostics calibration_diagnostics(const TransectCalibration& cal,
                                               std::span<const ReferenceSample> refs,
                                               const CalibrationConfig& cfg);

}  // namespace trapmetric
