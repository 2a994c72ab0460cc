#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "trapmetric/errors.hpp"
#include "trapmetric/estimation.hpp"

using namespace trapmetric;

namespace {

constexpr Eigen::Index kRows = 60;
constexpr Eigen::Index kCols = 80;

// calibration stand-in: a textured metric target with a small landmark mask
TransectCalibration make_calibration(std::uint64_t seed = 21) {
    TransectCalibration cal;
    cal.target_disparity_calibrated = testutil::textured_scene(kRows, kCols, seed);
    cal.target_mask = testutil::rect_mask(kRows, kCols, 5, 5, 8, 6);
    cal.metric_fit = {1.0, 0.0, 2, 1.0, 0.0};
    cal.per_reference_fits = {cal.metric_fit};
    cal.target_index = 0;
    return cal;
}

BoundingBox box(double x, double y, double w, double h, double conf = 1.0,
                DetectionCategory cat = DetectionCategory::animal) {
    return {x, y, w, h, conf, cat};
}

std::int64_t brute_force_union(const DetectionSet& det, Eigen::Index width, Eigen::Index height) {
    std::int64_t count = 0;
    for (Eigen::Index v = 0; v < height; ++v)
        for (Eigen::Index u = 0; u < width; ++u) {
            bool inside = false;
            for (const auto& b : det.boxes) {
                const auto x0 = std::floor(b.x * static_cast<double>(width));
                const auto y0 = std::floor(b.y * static_cast<double>(height));
                const auto x1 = std::ceil((b.x + b.w) * static_cast<double>(width));
                const auto y1 = std::ceil((b.y + b.h) * static_cast<double>(height));
                if (u >= x0 && u < x1 && v >= y0 && v < y1) inside = true;
            }
            count += inside ? 1 : 0;
        }
    return count;
}

}  // namespace

TEST_SUITE_BEGIN("estimation");

TEST_CASE("build_exclusion_mask") {
    DetectionSet det;
    det.image_id = "a";
    CHECK(build_exclusion_mask(det, kCols, kRows).count() == 0);

    det.boxes.push_back(box(0.0, 0.0, 1.0, 1.0));
    CHECK(build_exclusion_mask(det, kCols, kRows).count() == kRows * kCols);

    det.boxes.clear();
    det.boxes.push_back(box(0.1, 0.1, 0.3, 0.4));
    det.boxes.push_back(box(0.25, 0.3, 0.3, 0.35));
    const BinaryMask mask = build_exclusion_mask(det, kCols, kRows);
    CHECK(mask.count() == brute_force_union(det, kCols, kRows));
}

TEST_CASE("align_observation: identity when the observation equals the target scene") {
    const TransectCalibration cal = make_calibration();
    const DisparityMap d_obs = cal.target_disparity_calibrated;
    RansacConfig cfg;
    cfg.seed = 4;
    const auto [calibrated, fit] =
        align_observation(d_obs, testutil::empty_mask(kRows, kCols), cal, cfg);
    CHECK(std::abs(fit.m - 1.0) < 1e-9);
    CHECK(std::abs(fit.c) < 1e-9);
    CHECK(((calibrated - d_obs).abs() < 1e-9).all());
}

TEST_CASE("align_observation: recovers a constructed inverse transform") {
    const TransectCalibration cal = make_calibration();
    const double m = 0.4, c = 0.02;
    const DisparityMap d_obs = (cal.target_disparity_calibrated - c) / m;
    RansacConfig cfg;
    cfg.seed = 8;
    const auto [calibrated, fit] =
        align_observation(d_obs, testutil::empty_mask(kRows, kCols), cal, cfg);
    CHECK(std::abs(fit.m - m) < 1e-6);
    CHECK(std::abs(fit.c - c) < 1e-6);
}

TEST_CASE("align_observation: detection pixels never feed the fit") {
    const TransectCalibration cal = make_calibration();
    DisparityMap d_obs = cal.target_disparity_calibrated;
    DetectionSet det;
    det.image_id = "poison";
    det.boxes.push_back(box(0.2, 0.2, 0.25, 0.25));
    const BinaryMask exclusion = build_exclusion_mask(det, kCols, kRows);
    // poison every excluded pixel; a leak would wreck the exact identity fit
    for (Eigen::Index r = 0; r < kRows; ++r)
        for (Eigen::Index col = 0; col < kCols; ++col)
            if (exclusion(r, col)) d_obs(r, col) = 1e5 + static_cast<double>(r + col);
    RansacConfig cfg;
    cfg.seed = 12;
    const auto [calibrated, fit] = align_observation(d_obs, exclusion, cal, cfg);
    CHECK(std::abs(fit.m - 1.0) < 1e-12);
    CHECK(std::abs(fit.c) < 1e-12);
    CHECK(fit.residual_l1 < 1e-12);
}

TEST_CASE("align_observation: no consensus when the leftover scene is inconsistent") {
    TransectCalibration cal = make_calibration();
    DisparityMap d_obs(kRows, kCols);
    std::mt19937_64 rng(33);
    for (Eigen::Index r = 0; r < kRows; ++r)
        for (Eigen::Index col = 0; col < kCols; ++col)
            d_obs(r, col) = testutil::uniform(rng, 0.0, 1.0);  // unrelated to the target
    // mask everything except a sliver (> 99.9% excluded on a full-size frame
    // corresponds to this handful of surviving pixels)
    BinaryMask nearly_all = BinaryMask::Constant(kRows, kCols, true);
    nearly_all.block(0, 0, 1, 40).setConstant(false);
    RansacConfig cfg;
    cfg.seed = 3;
    cfg.inlier_threshold = 1e-4;
    CHECK_THROWS_AS(align_observation(d_obs, nearly_all, cal, cfg), NoConsensus);
}

TEST_CASE("sample_distance: interpolated percentile examples") {
    DepthMap depth;
    depth.depth = Image<double>(1, 5);
    depth.depth << 10.0, 20.0, 30.0, 40.0, 50.0;
    depth.valid = BinaryMask::Constant(1, 5, true);
    const BoundingBox whole = box(0.0, 0.0, 1.0, 1.0);

    CHECK(sample_distance(depth, whole, 20.0).distance_m == 18.0);
    CHECK(sample_distance(depth, whole, 0.0).distance_m == 10.0);
    CHECK(sample_distance(depth, whole, 100.0).distance_m == 50.0);

    depth.depth.setConstant(7.0);
    for (double p : {0.0, 20.0, 55.5, 100.0})
        CHECK(sample_distance(depth, whole, p).distance_m == 7.0);
}

TEST_CASE("sample_distance: invalid pixels enter capped and are accounted") {
    DepthMap depth;
    depth.depth = Image<double>::Constant(10, 10, 5.0);
    depth.valid = BinaryMask::Constant(10, 10, true);
    depth.depth.block(0, 0, 10, 6).setConstant(1e6);
    depth.valid.block(0, 0, 10, 6).setConstant(false);

    const DistanceEstimate e = sample_distance(depth, box(0.0, 0.0, 1.0, 1.0), 20.0);
    CHECK(e.pixels_sampled == 100);
    CHECK(e.invalid_pixel_fraction == doctest::Approx(0.6));
    CHECK(e.distance_m == 5.0);  // 20th percentile still lands on the valid side
}

TEST_CASE("sample_distance: degenerate box") {
    DepthMap depth;
    depth.depth = Image<double>::Constant(10, 10, 5.0);
    depth.valid = BinaryMask::Constant(10, 10, true);
    BoundingBox degenerate = box(0.5, 0.5, 0.0, 0.2);
    CHECK_THROWS_AS(sample_distance(depth, degenerate, 20.0), EmptyBox);
}

TEST_CASE("sample_distance: percentile bounds and monotonicity") {
    std::mt19937_64 rng(55);
    DepthMap depth;
    depth.depth = Image<double>(30, 30);
    for (Eigen::Index r = 0; r < 30; ++r)
        for (Eigen::Index c = 0; c < 30; ++c) depth.depth(r, c) = testutil::uniform(rng, 1.0, 40.0);
    depth.valid = BinaryMask::Constant(30, 30, true);

    for (int trial = 0; trial < 50; ++trial) {
        const double x = testutil::uniform(rng, 0.0, 0.6);
        const double y = testutil::uniform(rng, 0.0, 0.6);
        const BoundingBox b = box(x, y, testutil::uniform(rng, 0.05, 0.39),
                                  testutil::uniform(rng, 0.05, 0.39));
        const double p1 = testutil::uniform(rng, 0.0, 100.0);
        const double p2 = testutil::uniform(rng, p1, 100.0);
        const double v1 = sample_distance(depth, b, p1).distance_m;
        const double v2 = sample_distance(depth, b, p2).distance_m;
        const double lo = sample_distance(depth, b, 0.0).distance_m;
        const double hi = sample_distance(depth, b, 100.0).distance_m;
        CHECK(v1 >= lo);
        CHECK(v2 <= hi);
        CHECK(v1 <= v2);
    }
}

TEST_CASE("estimate_observation: category and confidence filters") {
    const TransectCalibration cal = make_calibration();
    const DisparityMap d_obs = cal.target_disparity_calibrated;

    DetectionSet det;
    det.image_id = "obs_x";
    EstimationConfig cfg;
    cfg.ransac.seed = 10;

    CHECK(estimate_observation(d_obs, det, cal, cfg).empty());

    det.boxes.push_back(box(0.6, 0.6, 0.2, 0.2, 0.9, DetectionCategory::human));
    det.boxes.push_back(box(0.1, 0.6, 0.2, 0.2, 0.3, DetectionCategory::animal));  // low conf
    det.boxes.push_back(box(0.35, 0.6, 0.2, 0.2, 0.9, DetectionCategory::animal));
    const auto estimates = estimate_observation(d_obs, det, cal, cfg);
    REQUIRE(estimates.size() == 1);
    CHECK(estimates[0].box_index == 2);
    CHECK(estimates[0].image_id == "obs_x");
    CHECK_FALSE(estimates[0].tiny_box);
    CHECK_FALSE(estimates[0].alignment_low_inliers);
}

TEST_CASE("estimate_observation: gauge invariance of the distances") {
    const TransectCalibration cal = make_calibration();
    DetectionSet det;
    det.image_id = "obs_g";
    det.boxes.push_back(box(0.55, 0.55, 0.25, 0.3));

    // observation scene equal to the target, animal plate pasted into the box
    DisparityMap d_obs = cal.target_disparity_calibrated;
    const BinaryMask inside = build_exclusion_mask(det, kCols, kRows);
    for (Eigen::Index r = 0; r < kRows; ++r)
        for (Eigen::Index c = 0; c < kCols; ++c)
            if (inside(r, c)) d_obs(r, c) = 1.0 / 6.0;

    EstimationConfig cfg;
    cfg.ransac.seed = 14;
    const auto base = estimate_observation(d_obs, det, cal, cfg);
    REQUIRE(base.size() == 1);
    CHECK(base[0].distance_m == doctest::Approx(6.0).epsilon(1e-9));

    for (const auto& [a, b] : std::vector<std::pair<double, double>>{{2.0, 0.1}, {0.3, -0.02}}) {
        const DisparityMap gauged = a * d_obs + b;
        const auto est = estimate_observation(gauged, det, cal, cfg);
        REQUIRE(est.size() == 1);
        CHECK(std::abs(est[0].distance_m - base[0].distance_m) < 1e-6);
    }
}

TEST_CASE("estimate_observation: tiny boxes are flagged") {
    const TransectCalibration cal = make_calibration();
    const DisparityMap d_obs = cal.target_disparity_calibrated;
    DetectionSet det;
    det.image_id = "obs_t";
    det.boxes.push_back(box(0.5, 0.5, 0.025, 0.034));  // 2x3 px on an 80x60 frame
    EstimationConfig cfg;
    cfg.ransac.seed = 2;
    const auto estimates = estimate_observation(d_obs, det, cal, cfg);
    REQUIRE(estimates.size() == 1);
    CHECK(estimates[0].tiny_box);
    CHECK(estimates[0].pixels_sampled < 25);
}

TEST_CASE("estimate_observation: low-consensus alignment throws unless forced") {
    TransectCalibration cal = make_calibration();
    DisparityMap d_obs(kRows, kCols);
    std::mt19937_64 rng(77);
    for (Eigen::Index r = 0; r < kRows; ++r)
        for (Eigen::Index c = 0; c < kCols; ++c)
            d_obs(r, c) = testutil::uniform(rng, 0.0, 1.0);

    DetectionSet det;
    det.image_id = "obs_n";
    det.boxes.push_back(box(0.4, 0.4, 0.2, 0.2));

    EstimationConfig cfg;
    cfg.ransac.seed = 5;
    cfg.ransac.inlier_threshold = 1e-5;
    CHECK_THROWS_AS(estimate_observation(d_obs, det, cal, cfg), NoConsensus);

    cfg.force_low_inliers = true;
    const auto estimates = estimate_observation(d_obs, det, cal, cfg);
    REQUIRE(estimates.size() == 1);
    CHECK(estimates[0].alignment_low_inliers);
}

TEST_CASE("estimate_observation: determinism across repeated runs") {
    const TransectCalibration cal = make_calibration();
    DisparityMap d_obs = 1.3 * cal.target_disparity_calibrated + 0.05;
    DetectionSet det;
    det.image_id = "obs_d";
    det.boxes.push_back(box(0.5, 0.5, 0.3, 0.3));
    EstimationConfig cfg;
    cfg.ransac.seed = 90;
    const auto a = estimate_observation(d_obs, det, cal, cfg);
    const auto b = estimate_observation(d_obs, det, cal, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].distance_m == b[i].distance_m);
        CHECK(a[i].pixels_sampled == b[i].pixels_sampled);
    }
}

TEST_SUITE_END();
