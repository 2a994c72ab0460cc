#include "trapmetric/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "trapmetric/errors.hpp"
#include "trapmetric/random.hpp"

namespace trapmetric {

namespace {

struct PixelRect {
    Eigen::Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
    Eigen::Index cols() const { return x1 - x0; }
    Eigen::Index rows() const { return y1 - y0; }
    bool empty() const { return cols() <= 0 || rows() <= 0; }
};

void validate(const SceneSpec& spec) {
    if (spec.width < 8 || spec.height < 8)
        throw SpecError("scene must be at least 8x8 pixels");
    if (spec.horizon_row >= spec.height)
        throw SpecError("horizon row lies below the image; no ground is visible");
    if (!(spec.focal_px > 0.0) || !(spec.camera_height_m > 0.0))
        throw SpecError("focal length and camera height must be positive");
    if (!(spec.background_depth_m > 0.0)) throw SpecError("background depth must be positive");
    if (!(spec.gauge_scale > 0.0)) throw SpecError("gauge scale must be positive");
    if (!(spec.noise_sigma >= 0.0)) throw SpecError("noise sigma must be nonnegative");
    if (spec.landmark_distances_m.empty()) throw SpecError("at least one landmark is required");
    std::vector<double> sorted = spec.landmark_distances_m;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw SpecError("landmark distances must be distinct");
    for (double z : spec.landmark_distances_m)
        if (!(z > 0.0)) throw SpecError("landmark distances must be positive");
    for (const auto& a : spec.animals)
        if (!(a.distance_m > 0.0)) throw SpecError("animal distances must be positive");
}

// ground plane below the horizon, background plane at and above it
Image<double> base_depth(const SceneSpec& spec) {
    Image<double> depth(spec.height, spec.width);
    for (int v = 0; v < spec.height; ++v) {
        const double z = v > spec.horizon_row
                             ? spec.focal_px * spec.camera_height_m /
                                   static_cast<double>(v - spec.horizon_row)
                             : spec.background_depth_m;
        depth.row(v).setConstant(z);
    }
    return depth;
}

// fronto-parallel rectangle standing on the ground at distance z
PixelRect object_rect(const SceneSpec& spec, double z, double center_x, double width_m,
                      double height_m) {
    const double px_per_m = spec.focal_px / z;
    const auto w = static_cast<Eigen::Index>(std::lround(std::max(1.0, width_m * px_per_m)));
    const auto h = static_cast<Eigen::Index>(std::lround(std::max(1.0, height_m * px_per_m)));
    const auto ground_row = static_cast<Eigen::Index>(
        std::lround(spec.horizon_row + spec.focal_px * spec.camera_height_m / z));
    PixelRect r;
    r.y1 = std::min<Eigen::Index>(ground_row, spec.height);
    r.y0 = std::max<Eigen::Index>(0, r.y1 - h);
    const auto cx = static_cast<Eigen::Index>(std::lround(center_x * spec.width));
    r.x0 = std::max<Eigen::Index>(0, cx - w / 2);
    r.x1 = std::min<Eigen::Index>(spec.width, r.x0 + w);
    return r;
}

void stamp_depth(Image<double>& depth, const PixelRect& r, double z) {
    depth.block(r.y0, r.x0, r.rows(), r.cols()).setConstant(z);
}

DisparityMap emit_disparity(const Image<double>& depth, double a, double b, double sigma,
                            std::uint64_t seed) {
    DisparityMap disparity = a * depth.inverse() + b;
    if (sigma > 0.0) {
        std::mt19937_64 rng(seed);
        for (Eigen::Index r = 0; r < disparity.rows(); ++r)
            for (Eigen::Index c = 0; c < disparity.cols(); ++c)
                disparity(r, c) += sigma * gaussian(rng);
    }
    return disparity;
}

}  // namespace

std::vector<ReferenceSample> generate_references(const SceneSpec& spec) {
    validate(spec);
    const Image<double> ground = base_depth(spec);
    std::vector<ReferenceSample> refs;
    refs.reserve(spec.landmark_distances_m.size());
    for (std::size_t i = 0; i < spec.landmark_distances_m.size(); ++i) {
        const double z = spec.landmark_distances_m[i];
        const PixelRect rect =
            object_rect(spec, z, 0.5, spec.landmark_width_m, spec.landmark_height_m);
        if (rect.empty()) throw SpecError("landmark at " + std::to_string(z) + " m is not visible");

        Image<double> depth = ground;
        stamp_depth(depth, rect, z);

        // per-reference gauge: with spread 0 every raster shares (a, b)
        std::mt19937_64 gauge_rng(mix_seed(spec.seed, mix_seed(0x67617567u, i)));
        const double a =
            spec.gauge_scale * (1.0 + spec.reference_gauge_spread * (2.0 * uniform_unit(gauge_rng) - 1.0));
        const double b =
            spec.gauge_shift + 0.1 * spec.reference_gauge_spread * (2.0 * uniform_unit(gauge_rng) - 1.0);

        ReferenceSample sample;
        sample.disparity =
            emit_disparity(depth, a, b, spec.noise_sigma, mix_seed(spec.seed, mix_seed(0x726E6Fu, i)));
        sample.landmark_mask = BinaryMask::Constant(spec.height, spec.width, false);
        sample.landmark_mask.block(rect.y0, rect.x0, rect.rows(), rect.cols()).setConstant(true);
        sample.landmark_distance_m = z;
        refs.push_back(std::move(sample));
    }
    return refs;
}

SimObservation generate_observation(const SceneSpec& spec,
                                    std::span<const AnimalPlacement> animals,
                                    const std::string& image_id, std::uint64_t salt) {
    validate(spec);
    Image<double> depth = base_depth(spec);

    // painter's order: farther animals first so nearer ones overwrite
    std::vector<std::size_t> order(animals.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return animals[a].distance_m > animals[b].distance_m;
    });

    SimObservation obs;
    obs.image_id = image_id;
    obs.detections.image_id = image_id;
    obs.detections.boxes.resize(animals.size());
    obs.animal_distances_m.resize(animals.size());
    for (std::size_t idx : order) {
        const auto& a = animals[idx];
        const PixelRect rect = object_rect(spec, a.distance_m, a.center_x, a.width_m, a.height_m);
        if (rect.empty())
            throw SpecError("animal at " + std::to_string(a.distance_m) + " m is not visible");
        stamp_depth(depth, rect, a.distance_m);

        BoundingBox box;
        box.x = static_cast<double>(rect.x0) / spec.width;
        box.y = static_cast<double>(rect.y0) / spec.height;
        box.w = static_cast<double>(rect.cols()) / spec.width;
        box.h = static_cast<double>(rect.rows()) / spec.height;
        box.confidence = 1.0;
        box.category = DetectionCategory::animal;
        obs.detections.boxes[idx] = box;
        obs.animal_distances_m[idx] = a.distance_m;
    }

    obs.disparity = emit_disparity(depth, spec.gauge_scale, spec.gauge_shift, spec.noise_sigma,
                                   mix_seed(spec.seed, mix_seed(0x6F6273u, salt)));
    obs.true_depth.depth = std::move(depth);
    obs.true_depth.valid = BinaryMask::Constant(spec.height, spec.width, true);
    return obs;
}

SyntheticScene generate_scene(const SceneSpec& spec) {
    SyntheticScene scene;
    scene.spec = spec;
    scene.references = generate_references(spec);
    SimObservation obs = generate_observation(spec, spec.animals, "obs_0001", 0);
    scene.true_depth = std::move(obs.true_depth);
    scene.observation = std::move(obs.disparity);
    scene.detections = std::move(obs.detections);
    scene.animal_distances_m = std::move(obs.animal_distances_m);
    return scene;
}

SyntheticScene perturb_scene(const SyntheticScene& scene, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 0.5))
        throw SpecError("perturb_scene: fraction must lie in [0, 0.5]");
    SyntheticScene out = scene;
    if (fraction == 0.0) return out;

    const auto& spec = scene.spec;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> background;
    for (Eigen::Index r = 0; r < out.true_depth.depth.rows(); ++r)
        for (Eigen::Index c = 0; c < out.true_depth.depth.cols(); ++c)
            if (out.true_depth.depth(r, c) == spec.background_depth_m)
                background.emplace_back(r, c);

    const auto k = static_cast<std::size_t>(fraction * static_cast<double>(background.size()));
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_index(rng, background.size() - i);
        std::swap(background[i], background[j]);
    }
    for (std::size_t i = 0; i < k; ++i) {
        const auto [r, c] = background[i];
        // vegetation moved in front of the background plane
        const double z = 1.0 + uniform_unit(rng) * (spec.background_depth_m - 1.0);
        out.true_depth.depth(r, c) = z;
        double d = spec.gauge_scale / z + spec.gauge_shift;
        if (spec.noise_sigma > 0.0) d += spec.noise_sigma * gaussian(rng);
        out.observation(r, c) = d;
    }
    return out;
}

double observation_disparity_range(const SceneSpec& spec,
                                   std::span<const AnimalPlacement> animals) {
    SceneSpec clean = spec;
    clean.noise_sigma = 0.0;
    const SimObservation obs = generate_observation(clean, animals, "range_probe", 0);
    return obs.disparity.maxCoeff() - obs.disparity.minCoeff();
}

}  // namespace trapmetric
