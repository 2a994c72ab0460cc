#include "trapmetric/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "trapmetric/errors.hpp"

namespace fs = std::filesystem;

namespace trapmetric {

namespace {

constexpr double kBoxBoundsSlack = 1e-9;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// whitespace-delimited header token; '#' starts a comment through end of line
std::string_view next_token(const std::string& data, std::size_t& pos, bool allow_comments) {
    while (pos < data.size()) {
        if (is_space(data[pos])) {
            ++pos;
        } else if (allow_comments && data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    if (pos >= data.size()) throw ParseError("unexpected end of header");
    const std::size_t start = pos;
    while (pos < data.size() && !is_space(data[pos])) ++pos;
    return std::string_view(data).substr(start, pos - start);
}

double parse_double(std::string_view s, const char* what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError(std::string("invalid ") + what + ": '" + std::string(s) + "'");
    return v;
}

std::int64_t parse_int(std::string_view s, const char* what) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError(std::string("invalid ") + what + ": '" + std::string(s) + "'");
    return v;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void check_raster_dims(std::int64_t w, std::int64_t h) {
    if (w < 1 || h < 1 || w > (1 << 20) || h > (1 << 20) || w * h > (std::int64_t{1} << 31))
        throw ParseError("implausible raster dimensions " + std::to_string(w) + "x" +
                         std::to_string(h));
}

// --- CSV helpers ---------------------------------------------------------

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::string_view header) {
    const std::string data = read_file(path);
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    bool saw_header = false;
    const std::size_t columns = split_fields(header).size();
    while (pos < data.size()) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) eol = data.size();
        std::string_view line = std::string_view(data).substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != header)
                throw MissingColumn(path.string() + ": expected header '" + std::string(header) +
                                    "', found '" + std::string(line) + "'");
            saw_header = true;
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != columns)
            throw ParseError(path.string() + ": expected " + std::to_string(columns) +
                             " fields, found " + std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }
    if (!saw_header)
        throw MissingColumn(path.string() + ": missing header row '" + std::string(header) + "'");
    return rows;
}

void check_csv_field(const std::string& field, const char* what) {
    if (field.find_first_of(",\n\r") != std::string::npos)
        throw SchemaError(std::string(what) + " must not contain commas or line breaks: '" +
                          field + "'");
}

// --- JSON helpers ---------------------------------------------------------

double require_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw SchemaError(std::string("detection box missing numeric field '") + key + "'");
    return j[key].get<double>();
}

}  // namespace

// --- PFM -------------------------------------------------------------------

DisparityMap load_disparity(const fs::path& path) {
    const std::string data = read_file(path);
    std::size_t pos = 0;
    const auto magic = next_token(data, pos, false);
    if (magic == "PF") throw ParseError(path.string() + ": 3-channel PFM is not supported");
    if (magic != "Pf") throw ParseError(path.string() + ": not a grayscale PFM file");
    const std::int64_t w = parse_int(next_token(data, pos, false), "PFM width");
    const std::int64_t h = parse_int(next_token(data, pos, false), "PFM height");
    check_raster_dims(w, h);
    const double scale = parse_double(next_token(data, pos, false), "PFM scale");
    if (scale == 0.0) throw ParseError(path.string() + ": PFM scale must be nonzero");
    if (pos >= data.size() || !is_space(data[pos]))
        throw ParseError(path.string() + ": missing whitespace after PFM header");
    const std::size_t payload = pos + 1;  // exactly one whitespace byte ends the header

    const std::size_t expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4u;
    if (data.size() - payload < expected) throw ParseError(path.string() + ": truncated payload");
    if (data.size() - payload > expected)
        throw ParseError(path.string() + ": trailing bytes after payload");

    const bool little_endian = scale < 0.0;
    DisparityMap map(h, w);
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + payload);
    for (std::int64_t row = h - 1; row >= 0; --row) {  // PFM rows run bottom-to-top
        for (std::int64_t col = 0; col < w; ++col, p += 4) {
            const std::uint32_t u =
                little_endian
                    ? (std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
                       std::uint32_t{p[3]} << 24)
                    : (std::uint32_t{p[3]} | std::uint32_t{p[2]} << 8 | std::uint32_t{p[1]} << 16 |
                       std::uint32_t{p[0]} << 24);
            const float f = std::bit_cast<float>(u);
            if (!std::isfinite(f))
                throw ValueError(path.string() + ": non-finite pixel value");
            map(row, col) = static_cast<double>(f);
        }
    }
    return map;
}

void write_disparity(const fs::path& path, const DisparityMap& map) {
    const std::int64_t w = map.cols(), h = map.rows();
    check_raster_dims(w, h);
    std::string out;
    out.reserve(32 + static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4u);
    out += "Pf\n";
    out += std::to_string(w) + " " + std::to_string(h) + "\n";
    out += "-1.0\n";
    for (std::int64_t row = h - 1; row >= 0; --row) {
        for (std::int64_t col = 0; col < w; ++col) {
            const double v = map(row, col);
            const auto f = static_cast<float>(v);
            if (!std::isfinite(v) || !std::isfinite(f))
                throw ValueError(path.string() + ": refusing to write non-finite pixel");
            const auto u = std::bit_cast<std::uint32_t>(f);
            out.push_back(static_cast<char>(u & 0xFF));
            out.push_back(static_cast<char>((u >> 8) & 0xFF));
            out.push_back(static_cast<char>((u >> 16) & 0xFF));
            out.push_back(static_cast<char>((u >> 24) & 0xFF));
        }
    }
    write_file_atomic(path, out);
}

// --- PGM -------------------------------------------------------------------

BinaryMask load_mask(const fs::path& path) {
    const std::string data = read_file(path);
    std::size_t pos = 0;
    if (next_token(data, pos, true) != "P5")
        throw ParseError(path.string() + ": not a binary PGM file");
    const std::int64_t w = parse_int(next_token(data, pos, true), "PGM width");
    const std::int64_t h = parse_int(next_token(data, pos, true), "PGM height");
    check_raster_dims(w, h);
    const std::int64_t maxval = parse_int(next_token(data, pos, true), "PGM maxval");
    if (maxval != 255) throw ParseError(path.string() + ": mask PGM maxval must be 255");
    if (pos >= data.size() || !is_space(data[pos]))
        throw ParseError(path.string() + ": missing whitespace after PGM header");
    const std::size_t payload = pos + 1;

    const std::size_t expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (data.size() - payload < expected) throw ParseError(path.string() + ": truncated payload");
    if (data.size() - payload > expected)
        throw ParseError(path.string() + ": trailing bytes after payload");

    BinaryMask mask(h, w);
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + payload);
    for (std::int64_t row = 0; row < h; ++row)
        for (std::int64_t col = 0; col < w; ++col, ++p) {
            if (*p != 0 && *p != 255)
                throw ParseError(path.string() + ": mask pixels must be 0 or 255");
            mask(row, col) = (*p == 255);
        }
    return mask;
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
    const std::int64_t w = mask.cols(), h = mask.rows();
    check_raster_dims(w, h);
    std::string out;
    out.reserve(32 + static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    out += "P5\n";
    out += std::to_string(w) + " " + std::to_string(h) + "\n";
    out += "255\n";
    for (std::int64_t row = 0; row < h; ++row)
        for (std::int64_t col = 0; col < w; ++col)
            out.push_back(mask(row, col) ? static_cast<char>(255) : '\0');
    write_file_atomic(path, out);
}

template <typename Scalar>
Image<Scalar> crop_metadata_strip(const Image<Scalar>& img, int strip_rows) {
    if (strip_rows <= 0) throw InvalidCrop("crop_metadata_strip: strip_rows must be positive");
    if (img.rows() <= strip_rows)
        throw InvalidCrop("crop_metadata_strip: crop would remove every row");
    return img.topRows(img.rows() - strip_rows);
}

template Image<double> crop_metadata_strip<double>(const Image<double>&, int);
template Image<bool> crop_metadata_strip<bool>(const Image<bool>&, int);

// --- detections --------------------------------------------------------------

DetectionSet load_detections(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string())
        throw SchemaError(path.string() + ": missing string field 'image_id'");
    DetectionSet set;
    set.image_id = j["image_id"].get<std::string>();
    if (set.image_id.empty()) throw SchemaError(path.string() + ": image_id must be non-empty");
    if (!j.contains("boxes") || !j["boxes"].is_array())
        throw SchemaError(path.string() + ": missing array field 'boxes'");
    for (const auto& jb : j["boxes"]) {
        BoundingBox b;
        b.x = require_number(jb, "x");
        b.y = require_number(jb, "y");
        b.w = require_number(jb, "w");
        b.h = require_number(jb, "h");
        b.confidence = require_number(jb, "conf");
        if (!jb.contains("cat") || !jb["cat"].is_string())
            throw SchemaError(path.string() + ": detection box missing string field 'cat'");
        b.category = category_from_string(jb["cat"].get<std::string>());
        if (!(b.x >= 0.0) || !(b.y >= 0.0) || !(b.w > 0.0) || !(b.h > 0.0) ||
            b.x + b.w > 1.0 + kBoxBoundsSlack || b.y + b.h > 1.0 + kBoxBoundsSlack)
            throw SchemaError(path.string() + ": box coordinates out of [0, 1] bounds");
        if (!(b.confidence >= 0.0 && b.confidence <= 1.0))
            throw SchemaError(path.string() + ": confidence out of [0, 1]");
        set.boxes.push_back(b);
    }
    return set;
}

void write_detections(const fs::path& path, const DetectionSet& detections) {
    nlohmann::json j;
    j["image_id"] = detections.image_id;
    j["boxes"] = nlohmann::json::array();
    for (const auto& b : detections.boxes) {
        nlohmann::json jb;
        jb["x"] = b.x;
        jb["y"] = b.y;
        jb["w"] = b.w;
        jb["h"] = b.h;
        jb["conf"] = b.confidence;
        jb["cat"] = to_string(b.category);
        j["boxes"].push_back(jb);
    }
    write_file_atomic(path, j.dump(2) + "\n");
}

// --- CSV schemas ---------------------------------------------------------------

namespace {
constexpr std::string_view kReferenceHeader = "transect_id,image,disparity,mask,distance_m";
constexpr std::string_view kGroundTruthHeader = "transect_id,image_id,box_index,distance_m";
constexpr std::string_view kEstimateHeader =
    "transect_id,image_id,box_index,x,y,w,h,confidence,distance_m,percentile,pixels_sampled,"
    "invalid_fraction,flags";
}  // namespace

std::vector<ReferenceRow> load_reference_csv(const fs::path& path) {
    std::vector<ReferenceRow> rows;
    for (const auto& f : read_csv(path, kReferenceHeader)) {
        ReferenceRow r;
        r.transect_id = f[0];
        r.image = f[1];
        r.disparity = f[2];
        r.mask = f[3];
        r.distance_m = parse_double(f[4], "distance_m");
        if (!(r.distance_m > 0.0))
            throw SchemaError(path.string() + ": distance_m must be positive");
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_reference_csv(const fs::path& path, std::span<const ReferenceRow> rows) {
    std::string out(kReferenceHeader);
    out += "\n";
    for (const auto& r : rows) {
        check_csv_field(r.transect_id, "transect_id");
        check_csv_field(r.image, "image");
        check_csv_field(r.disparity, "disparity");
        check_csv_field(r.mask, "mask");
        out += r.transect_id + "," + r.image + "," + r.disparity + "," + r.mask + "," +
               format_double(r.distance_m) + "\n";
    }
    write_file_atomic(path, out);
}

std::vector<GroundTruthRow> load_groundtruth_csv(const fs::path& path) {
    std::vector<GroundTruthRow> rows;
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& f : read_csv(path, kGroundTruthHeader)) {
        GroundTruthRow r;
        r.transect_id = f[0];
        r.image_id = f[1];
        r.box_index = static_cast<int>(parse_int(f[2], "box_index"));
        r.distance_m = parse_double(f[3], "distance_m");
        if (!seen.insert({r.transect_id, r.image_id, r.box_index}).second)
            throw ParseError(path.string() + ": duplicate key " + r.transect_id + "/" +
                             r.image_id + "/" + std::to_string(r.box_index));
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_groundtruth_csv(const fs::path& path, std::span<const GroundTruthRow> rows) {
    std::string out(kGroundTruthHeader);
    out += "\n";
    for (const auto& r : rows) {
        check_csv_field(r.transect_id, "transect_id");
        check_csv_field(r.image_id, "image_id");
        out += r.transect_id + "," + r.image_id + "," + std::to_string(r.box_index) + "," +
               format_double(r.distance_m) + "\n";
    }
    write_file_atomic(path, out);
}

std::vector<EstimateRow> load_estimates_csv(const fs::path& path) {
    std::vector<EstimateRow> rows;
    for (const auto& f : read_csv(path, kEstimateHeader)) {
        EstimateRow r;
        r.transect_id = f[0];
        r.image_id = f[1];
        r.box_index = static_cast<int>(parse_int(f[2], "box_index"));
        r.x = parse_double(f[3], "x");
        r.y = parse_double(f[4], "y");
        r.w = parse_double(f[5], "w");
        r.h = parse_double(f[6], "h");
        r.confidence = parse_double(f[7], "confidence");
        r.distance_m = parse_double(f[8], "distance_m");
        r.percentile = parse_double(f[9], "percentile");
        r.pixels_sampled = parse_int(f[10], "pixels_sampled");
        r.invalid_fraction = parse_double(f[11], "invalid_fraction");
        r.flags = f[12];
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_estimates_csv(const fs::path& path, std::span<const EstimateRow> rows) {
    std::string out(kEstimateHeader);
    out += "\n";
    for (const auto& r : rows) {
        check_csv_field(r.transect_id, "transect_id");
        check_csv_field(r.image_id, "image_id");
        check_csv_field(r.flags, "flags");
        out += r.transect_id + "," + r.image_id + "," + std::to_string(r.box_index) + "," +
               format_double(r.x) + "," + format_double(r.y) + "," + format_double(r.w) + "," +
               format_double(r.h) + "," + format_double(r.confidence) + "," +
               format_double(r.distance_m) + "," + format_double(r.percentile) + "," +
               std::to_string(r.pixels_sampled) + "," + format_double(r.invalid_fraction) + "," +
               r.flags + "\n";
    }
    write_file_atomic(path, out);
}

std::string format_flags(const DistanceEstimate& e) {
    // alphabetical, semicolon-joined
    std::string flags;
    const auto add = [&flags](const char* name) {
        if (!flags.empty()) flags += ";";
        flags += name;
    };
    if (e.alignment_low_inliers) add("alignment_low_inliers");
    if (e.capped_depth) add("capped_depth");
    if (e.tiny_box) add("tiny_box");
    return flags;
}

// --- discovery ---------------------------------------------------------------

DiscoveryResult discover_transects(const fs::path& root) {
    if (!fs::exists(root)) throw IoError("input root does not exist: " + root.string());
    if (!fs::is_directory(root)) throw IoError("input root is not a directory: " + root.string());

    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());

    DiscoveryResult result;
    for (const auto& dir : subdirs) {
        const std::string tid = dir.filename().string();
        const fs::path refs_dir = dir / "references";
        const fs::path obs_dir = dir / "observations";
        const bool has_refs = fs::is_directory(refs_dir);
        const bool has_obs = fs::is_directory(obs_dir);
        if (!has_refs && !has_obs) continue;  // not a transect directory
        if (!has_refs || !has_obs) {
            result.skipped.push_back(
                {tid, std::string("missing ") + (has_refs ? "observations/" : "references/") +
                          " directory"});
            continue;
        }

        TransectLayout layout;
        layout.transect_id = tid;
        layout.dir = dir;

        const fs::path csv = dir / "references.csv";
        if (!fs::exists(csv)) {
            result.skipped.push_back({tid, "missing references.csv"});
            continue;
        }
        bool ok = true;
        try {
            for (const auto& row : load_reference_csv(csv)) {
                if (row.transect_id != tid)
                    throw SchemaError("references.csv transect_id '" + row.transect_id +
                                      "' does not match directory name");
                ReferenceEntry entry;
                entry.image = row.image;
                entry.disparity_path = dir / row.disparity;
                entry.mask_path = dir / row.mask;
                entry.distance_m = row.distance_m;
                if (!fs::exists(entry.disparity_path))
                    throw IoError("missing disparity raster " + entry.disparity_path.string());
                if (!fs::exists(entry.mask_path))
                    throw IoError("missing landmark mask " + entry.mask_path.string());
                layout.references.push_back(std::move(entry));
            }
        } catch (const Error& e) {
            result.skipped.push_back({tid, e.what()});
            ok = false;
        }
        if (!ok) continue;
        if (layout.references.size() < 2) {
            result.skipped.push_back({tid, "fewer than 2 references (found " +
                                               std::to_string(layout.references.size()) + ")"});
            continue;
        }

        for (const auto& entry : fs::directory_iterator(obs_dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".pfm") continue;
            ObservationEntry obs;
            obs.image_id = entry.path().stem().string();
            obs.disparity_path = entry.path();
            obs.detection_path = dir / "detections" / (obs.image_id + ".json");
            layout.observations.push_back(std::move(obs));
        }
        std::sort(layout.observations.begin(), layout.observations.end(),
                  [](const auto& a, const auto& b) { return a.image_id < b.image_id; });

        layout.has_groundtruth = fs::exists(dir / "groundtruth.csv");
        result.transects.push_back(std::move(layout));
    }
    return result;
}

std::vector<ReferenceSample> load_reference_samples(const TransectLayout& layout,
                                                    int strip_rows) {
    std::vector<ReferenceSample> refs;
    refs.reserve(layout.references.size());
    Eigen::Index canonical_rows = std::numeric_limits<Eigen::Index>::max();
    for (const auto& entry : layout.references) {
        ReferenceSample sample;
        sample.disparity = load_disparity(entry.disparity_path);
        sample.landmark_mask = load_mask(entry.mask_path);
        sample.landmark_distance_m = entry.distance_m;
        canonical_rows = std::min({canonical_rows, sample.disparity.rows(),
                                   sample.landmark_mask.rows()});
        refs.push_back(std::move(sample));
    }
    // rasters taller than the transect's canonical height carry the metadata
    // strip and get cropped; anything else is a hard mismatch
    for (std::size_t i = 0; i < refs.size(); ++i) {
        auto& r = refs[i];
        if (r.disparity.rows() > canonical_rows)
            r.disparity = crop_metadata_strip(r.disparity, strip_rows);
        if (r.landmark_mask.rows() > canonical_rows)
            r.landmark_mask = crop_metadata_strip(r.landmark_mask, strip_rows);
        if (r.disparity.rows() != canonical_rows || r.landmark_mask.rows() != canonical_rows)
            throw DimensionMismatch(layout.transect_id + "/" + layout.references[i].image +
                                    ": raster heights disagree after metadata-strip crop");
        if (r.disparity.cols() != refs[0].disparity.cols() ||
            r.landmark_mask.cols() != refs[0].disparity.cols())
            throw DimensionMismatch(layout.transect_id + "/" + layout.references[i].image +
                                    ": raster widths disagree");
    }
    return refs;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    const fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace trapmetric
