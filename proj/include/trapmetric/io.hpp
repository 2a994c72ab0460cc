#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trapmetric/estimation.hpp"
#include "trapmetric/types.hpp"

namespace trapmetric {

// --- rasters -------------------------------------------------------------

/// Reads a grayscale PFM (magic "Pf", float32, scale sign = endianness,
/// rows stored bottom-to-top). Throws ParseError on malformed or truncated
/// files and ValueError on non-finite pixels.
DisparityMap load_disparity(const std::filesystem::path& path);

/// Writes a little-endian grayscale PFM (scale field "-1.0"). Values are
/// rounded to float32; write -> load -> write is byte-identical.
void write_disparity(const std::filesystem::path& path, const DisparityMap& map);

/// Reads a binary PGM (P5, maxval 255) whose pixels are strictly {0, 255};
/// 255 maps to true.
BinaryMask load_mask(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

/// Removes the bottom strip_rows rows (embedded metadata strip). Requires
/// height > strip_rows, else InvalidCrop.
template <typename Scalar>
Image<Scalar> crop_metadata_strip(const Image<Scalar>& img, int strip_rows = 80);

// --- detections ------------------------------------------------------------

/// One JSON document per observation image:
/// {"image_id": "...", "boxes": [{"x":..,"y":..,"w":..,"h":..,"conf":..,
/// "cat":"animal"}]}. Coordinates are validated against [0, 1]; the
/// confidence filter is applied later, in estimation.
DetectionSet load_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path, const DetectionSet& detections);

// --- CSV schemas -----------------------------------------------------------

struct ReferenceRow {
    std::string transect_id;
    std::string image;
    std::string disparity;  // path relative to the transect directory
    std::string mask;
    double distance_m = 0.0;
};

struct GroundTruthRow {
    std::string transect_id;
    std::string image_id;
    int box_index = 0;
    double distance_m = 0.0;
};

struct EstimateRow {
    std::string transect_id;
    std::string image_id;
    int box_index = 0;
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
    double confidence = 0.0;
    double distance_m = 0.0;
    double percentile = 20.0;
    std::int64_t pixels_sampled = 0;
    double invalid_fraction = 0.0;
    std::string flags;  // semicolon-joined flag names, alphabetical
};

// header: transect_id,image,disparity,mask,distance_m
std::vector<ReferenceRow> load_reference_csv(const std::filesystem::path& path);
void write_reference_csv(const std::filesystem::path& path, std::span<const ReferenceRow> rows);

// header: transect_id,image_id,box_index,distance_m
// Duplicate (transect_id, image_id, box_index) keys raise ParseError.
std::vector<GroundTruthRow> load_groundtruth_csv(const std::filesystem::path& path);
void write_groundtruth_csv(const std::filesystem::path& path, std::span<const GroundTruthRow> rows);

// header: transect_id,image_id,box_index,x,y,w,h,confidence,distance_m,
//         percentile,pixels_sampled,invalid_fraction,flags
std::vector<EstimateRow> load_estimates_csv(const std::filesystem::path& path);
void write_estimates_csv(const std::filesystem::path& path, std::span<const EstimateRow> rows);

std::string format_flags(const DistanceEstimate& e);

// --- transect discovery ------------------------------------------------------

struct ReferenceEntry {
    std::string image;
    std::filesystem::path disparity_path;
    std::filesystem::path mask_path;
    double distance_m = 0.0;
};

struct ObservationEntry {
    std::string image_id;
    std::filesystem::path disparity_path;
    std::filesystem::path detection_path;  // may not exist yet at discovery
};

struct TransectLayout {
    std::string transect_id;
    std::filesystem::path dir;
    std::vector<ReferenceEntry> references;
    std::vector<ObservationEntry> observations;
    bool has_groundtruth = false;
};

struct SkipRecord {
    std::string transect_id;
    std::string reason;
};

struct DiscoveryResult {
    std::vector<TransectLayout> transects;  // sorted by transect_id
    std::vector<SkipRecord> skipped;
};

/// One layout per subdirectory of root holding a references/ and an
/// observations/ directory. Transects with fewer than two references, a
/// missing or inconsistent references.csv, or dangling raster paths are
/// reported in skipped rather than aborting discovery.
DiscoveryResult discover_transects(const std::filesystem::path& root);

/// Loads a transect's reference samples, cropping the metadata strip from any
/// raster taller than the transect's canonical (minimum) height.
std::vector<ReferenceSample> load_reference_samples(const TransectLayout& layout,
                                                    int strip_rows = 80);

/// Writes bytes to path via a temp file + rename so partial output is never
/// observed under the final name.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace trapmetric
