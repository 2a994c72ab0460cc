#pragma once

#include <vector>

#include "trapmetric/errors.hpp"
#include "trapmetric/random.hpp"
#include "trapmetric/robustfit.hpp"
#include "trapmetric/types.hpp"

namespace trapmetric::detail {

// Collects (x_map[p], y_map[p]) over pixels excluded by neither mask,
// row-major, uniformly subsampled to max_fit_pixels with a seed derived from
// cfg.seed, then runs fit_affine. Throws CalibrationDegenerate when fewer
// than two scene pixels survive the masks.
inline AffineFit fit_masked_pairs(const DisparityMap& x_map, const BinaryMask& x_excluded,
                                  const DisparityMap& y_map, const BinaryMask& y_excluded,
                                  const RansacConfig& cfg, int max_fit_pixels) {
    const Eigen::Index rows = x_map.rows(), cols = x_map.cols();
    if (y_map.rows() != rows || y_map.cols() != cols || x_excluded.rows() != rows ||
        x_excluded.cols() != cols || y_excluded.rows() != rows || y_excluded.cols() != cols)
        throw DimensionMismatch("masked fit: raster dimensions differ");
    if (max_fit_pixels < 2) throw InvalidArgument("masked fit: max_fit_pixels must be >= 2");

    std::vector<SamplePair> pairs;
    pairs.reserve(static_cast<std::size_t>(rows * cols));
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (!x_excluded(r, c) && !y_excluded(r, c)) pairs.push_back({x_map(r, c), y_map(r, c)});

    if (pairs.size() < 2)
        throw CalibrationDegenerate("masked fit: fewer than two scene pixels outside the masks");

    if (pairs.size() > static_cast<std::size_t>(max_fit_pixels)) {
        // partial Fisher-Yates: the first max_fit_pixels entries become a
        // uniform sample without replacement
        std::mt19937_64 rng(mix_seed(cfg.seed, "pixel-subsample"));
        const std::size_t total = pairs.size();
        for (std::size_t k = 0; k < static_cast<std::size_t>(max_fit_pixels); ++k) {
            const std::size_t j = k + uniform_index(rng, total - k);
            std::swap(pairs[k], pairs[j]);
        }
        pairs.resize(static_cast<std::size_t>(max_fit_pixels));
    }
    return fit_affine(pairs, cfg);
}

}  // namespace trapmetric::detail
