#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trapmetric/calibration.hpp"
#include "trapmetric/estimation.hpp"
#include "trapmetric/types.hpp"

namespace trapmetric {

/// Fronto-parallel rectangle standing on the ground plane at a given
/// distance. center_x is the normalized horizontal position of its center.
struct AnimalPlacement {
    double distance_m = 0.0;
    double center_x = 0.5;
    double width_m = 1.2;
    double height_m = 0.9;
};

/// Pinhole ground-plane scene: rows below the horizon see the ground at
/// Z(v) = focal_px * camera_height_m / (v - horizon_row); rows at or above
/// the horizon see the background plane. Landmarks and animals overwrite the
/// scene as fronto-parallel rectangles at their distances. Emitted disparity
/// is gauge_scale * (1/Z) + gauge_shift + N(0, noise_sigma^2), seeded.
struct SceneSpec {
    int width = 320;
    int height = 240;
    double focal_px = 300.0;
    double camera_height_m = 1.5;
    int horizon_row = 96;
    double background_depth_m = 50.0;
    std::vector<double> landmark_distances_m;
    double landmark_width_m = 0.5;
    double landmark_height_m = 1.8;
    std::vector<AnimalPlacement> animals;
    double gauge_scale = 1.0;   // a > 0
    double gauge_shift = 0.0;   // b
    /// Extra per-reference gauge variation so the common-scale alignment is
    /// exercised non-trivially; 0 keeps one gauge for every raster.
    double reference_gauge_spread = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct SimObservation {
    std::string image_id;
    DisparityMap disparity;   // emitted (gauge + noise)
    DetectionSet detections;  // boxes exactly covering the animal rectangles
    std::vector<double> animal_distances_m;
    DepthMap true_depth;
};

struct SyntheticScene {
    SceneSpec spec;
    DepthMap true_depth;  // observation ground truth
    std::vector<ReferenceSample> references;
    DisparityMap observation;
    DetectionSet detections;
    std::vector<double> animal_distances_m;
};

/// References only (one landmark per reference frame, same base scene).
std::vector<ReferenceSample> generate_references(const SceneSpec& spec);

/// One observation frame with the given animals; salt separates the noise
/// streams of observations sharing a spec.
SimObservation generate_observation(const SceneSpec& spec,
                                    std::span<const AnimalPlacement> animals,
                                    const std::string& image_id, std::uint64_t salt);

/// Full synthetic transect oracle: references plus one observation built
/// from spec.animals. Bit-identical for identical specs.
SyntheticScene generate_scene(const SceneSpec& spec);

/// Re-depths the given fraction of background pixels (those at the
/// background plane) of the observation to simulate vegetation change
/// between reference and observation time. fraction must lie in [0, 0.5].
SyntheticScene perturb_scene(const SyntheticScene& scene, double fraction, std::uint64_t seed);

/// Noise-free emitted disparity range of an observation with these animals;
/// used to express noise levels relative to scene content.
double observation_disparity_range(const SceneSpec& spec,
                                   std::span<const AnimalPlacement> animals);

}  // namespace trapmetric
