#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace trapmetric {

/// One (x, y) observation of the 1-D affine model y ~ m*x + c. Both values
/// must be finite.
struct SamplePair {
    double x = 0.0;
    double y = 0.0;
};

struct RansacConfig {
    int iterations = 2000;
    /// Consensus threshold in y units. Unset: 1.25 * MAD of the y values,
    /// computed per call.
    std::optional<double> inlier_threshold;
    double min_inlier_fraction = 0.5;
    std::uint64_t seed = 0;
    int refit_iterations = 20;
};

struct AffineFit {
    double m = 1.0;
    double c = 0.0;
    std::int64_t inlier_count = 0;
    double inlier_fraction = 0.0;
    /// Mean |m*x + c - y| over the inliers of the returned model.
    double residual_l1 = 0.0;
};

/// Robust L1 affine fit: RANSAC consensus over seeded 2-point hypotheses,
/// ties broken by lower inlier L1 then earlier iteration, followed by an
/// IRLS refit (weights 1/max(|r|, 1e-9)) on the consensus set. Deterministic
/// for a fixed seed.
///
/// Throws DegenerateInput (fewer than 2 samples, or all x equal) and
/// NoConsensus (best hypothesis consensus below min_inlier_fraction).
AffineFit fit_affine(std::span<const SamplePair> samples, const RansacConfig& cfg);

inline double evaluate_affine(const AffineFit& fit, double x) { return fit.m * x + fit.c; }

}  // namespace trapmetric
