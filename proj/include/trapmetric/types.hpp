#pragma once

#include <Eigen/Core>

namespace trapmetric {

/// Dense raster, indexed (row, col) with row 0 at the top of the image.
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-pixel inverse depth up to an unknown affine transform. Raw maps from a
/// depth network are nonnegative; calibrated maps (units 1/m) may go negative
/// for far background, and such pixels are flagged invalid on conversion to
/// metric depth.
using DisparityMap = Image<double>;

/// true = excluded from fits (landmark or detection-box pixels).
using BinaryMask = Image<bool>;

/// Metric depth in meters plus per-pixel validity. Invalid pixels hold the
/// capped value 1 / disparity_floor.
struct DepthMap {
    Image<double> depth;
    BinaryMask valid;
};

inline Eigen::Index width(const DisparityMap& m) { return m.cols(); }
inline Eigen::Index height(const DisparityMap& m) { return m.rows(); }

}  // namespace trapmetric
