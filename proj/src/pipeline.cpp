#include "trapmetric/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "trapmetric/errors.hpp"
#include "trapmetric/estimation.hpp"
#include "trapmetric/io.hpp"
#include "trapmetric/log.hpp"
#include "trapmetric/random.hpp"
#include "trapmetric/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace trapmetric {

namespace {

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            fn(i);
        }
    };
    std::vector<std::thread> threads;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    threads.reserve(n);
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

std::string format_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

json fit_to_json(const AffineFit& fit) {
    return {{"m", fit.m},
            {"c", fit.c},
            {"inlier_count", fit.inlier_count},
            {"inlier_fraction", fit.inlier_fraction},
            {"residual_l1", fit.residual_l1}};
}

AffineFit fit_from_json(const json& j) {
    AffineFit fit;
    fit.m = j.at("m").get<double>();
    fit.c = j.at("c").get<double>();
    fit.inlier_count = j.at("inlier_count").get<std::int64_t>();
    fit.inlier_fraction = j.at("inlier_fraction").get<double>();
    fit.residual_l1 = j.at("residual_l1").get<double>();
    return fit;
}

json diagnostics_to_json(const CalibrationDiagnostics& d) {
    return {{"landmark_disparity_spread", d.landmark_disparity_spread},
            {"landmark_count", d.landmark_count},
            {"max_landmark_residual_m", d.max_landmark_residual_m},
            {"planar_warning", d.planar_warning}};
}

CalibrationDiagnostics diagnostics_from_json(const json& j) {
    CalibrationDiagnostics d;
    d.landmark_disparity_spread = j.at("landmark_disparity_spread").get<double>();
    d.landmark_count = j.at("landmark_count").get<int>();
    d.max_landmark_residual_m = j.at("max_landmark_residual_m").is_number()
                                    ? j.at("max_landmark_residual_m").get<double>()
                                    : std::numeric_limits<double>::infinity();
    d.planar_warning = j.at("planar_warning").get<bool>();
    return d;
}

void dump_json_atomic(const fs::path& path, const json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

json load_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_calibration_artifacts(const fs::path& dir, const std::string& transect_id,
                                 const TransectCalibration& cal) {
    write_disparity(dir / "target_calibrated.pfm", cal.target_disparity_calibrated);
    write_mask(dir / "target_mask.pgm", cal.target_mask);
    json j;
    j["transect_id"] = transect_id;
    j["target_index"] = cal.target_index;
    j["metric_fit"] = fit_to_json(cal.metric_fit);
    j["per_reference_fits"] = json::array();
    for (const auto& fit : cal.per_reference_fits) j["per_reference_fits"].push_back(fit_to_json(fit));
    j["diagnostics"] = diagnostics_to_json(cal.diagnostics);
    dump_json_atomic(dir / "calibration.json", j);
}

struct EstimationItem {
    const TransectLayout* layout = nullptr;
    const TransectCalibration* calibration = nullptr;
    const ObservationEntry* observation = nullptr;
};

struct EstimationOutcome {
    std::vector<EstimateRow> rows;
    std::string error;
};

DisparityMap load_observation_raster(const fs::path& path, Eigen::Index target_rows,
                                     Eigen::Index target_cols, int strip_rows) {
    DisparityMap d = load_disparity(path);
    if (d.rows() > target_rows) d = crop_metadata_strip(d, strip_rows);
    if (d.rows() != target_rows || d.cols() != target_cols)
        throw DimensionMismatch(path.string() + ": observation size does not match the target");
    return d;
}

// --- simulate spec -----------------------------------------------------------

struct ObservationPlan {
    std::string image_id;
    std::vector<AnimalPlacement> animals;
};

struct TransectPlan {
    std::string transect_id;
    SceneSpec scene;
    std::vector<ObservationPlan> observations;
};

AnimalPlacement animal_from_json(const json& j) {
    AnimalPlacement a;
    if (!j.contains("distance_m") || !j["distance_m"].is_number())
        throw SchemaError("animal entry needs a numeric distance_m");
    a.distance_m = j["distance_m"].get<double>();
    a.center_x = j.value("center_x", 0.5);
    a.width_m = j.value("width_m", a.width_m);
    a.height_m = j.value("height_m", a.height_m);
    return a;
}

TransectPlan transect_plan_from_json(const json& j, const RunConfig& cfg) {
    TransectPlan plan;
    if (!j.contains("transect_id") || !j["transect_id"].is_string())
        throw SchemaError("simulate spec: each transect needs a string transect_id");
    plan.transect_id = j["transect_id"].get<std::string>();

    SceneSpec& s = plan.scene;
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.focal_px = j.value("focal_px", s.focal_px);
    s.camera_height_m = j.value("camera_height_m", s.camera_height_m);
    s.horizon_row = j.value("horizon_row", s.horizon_row);
    s.background_depth_m = j.value("background_depth_m", s.background_depth_m);
    s.landmark_width_m = j.value("landmark_width_m", s.landmark_width_m);
    s.landmark_height_m = j.value("landmark_height_m", s.landmark_height_m);
    s.gauge_scale = j.value("gauge_scale", s.gauge_scale);
    s.gauge_shift = j.value("gauge_shift", s.gauge_shift);
    s.reference_gauge_spread = j.value("reference_gauge_spread", s.reference_gauge_spread);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.contains("seed") ? j["seed"].get<std::uint64_t>()
                                : mix_seed(cfg.seed, plan.transect_id);
    if (!j.contains("landmark_distances_m") || !j["landmark_distances_m"].is_array())
        throw SchemaError("simulate spec: landmark_distances_m array is required");
    for (const auto& z : j["landmark_distances_m"]) s.landmark_distances_m.push_back(z.get<double>());

    if (j.contains("observations")) {
        int index = 0;
        for (const auto& jo : j["observations"]) {
            ObservationPlan o;
            char fallback[16];
            std::snprintf(fallback, sizeof(fallback), "obs_%04d", ++index);
            o.image_id = jo.value("image_id", std::string(fallback));
            if (!jo.contains("animals") || !jo["animals"].is_array())
                throw SchemaError("simulate spec: each observation needs an animals array");
            for (const auto& ja : jo["animals"]) o.animals.push_back(animal_from_json(ja));
            plan.observations.push_back(std::move(o));
        }
    } else if (j.contains("num_observations")) {
        const int count = j["num_observations"].get<int>();
        if (count < 0) throw SchemaError("simulate spec: num_observations must be >= 0");
        if (!j.contains("animal_distance_range") || !j["animal_distance_range"].is_array() ||
            j["animal_distance_range"].size() != 2)
            throw SchemaError("simulate spec: animal_distance_range [lo, hi] is required");
        const double lo = j["animal_distance_range"][0].get<double>();
        const double hi = j["animal_distance_range"][1].get<double>();
        if (!(lo > 0.0 && hi >= lo))
            throw SchemaError("simulate spec: animal_distance_range must satisfy 0 < lo <= hi");
        const int per_obs = j.value("animals_per_observation", 1);
        if (per_obs < 1) throw SchemaError("simulate spec: animals_per_observation must be >= 1");
        std::mt19937_64 rng(mix_seed(s.seed, "animal-plan"));
        for (int k = 0; k < count; ++k) {
            ObservationPlan o;
            char name[16];
            std::snprintf(name, sizeof(name), "obs_%04d", k + 1);
            o.image_id = name;
            for (int a = 0; a < per_obs; ++a) {
                AnimalPlacement animal;
                animal.distance_m = lo + uniform_unit(rng) * (hi - lo);
                animal.center_x = 0.3 + 0.4 * uniform_unit(rng);
                o.animals.push_back(animal);
            }
            plan.observations.push_back(std::move(o));
        }
    } else {
        throw SchemaError("simulate spec: provide observations or num_observations");
    }
    return plan;
}

std::vector<TransectPlan> parse_sim_spec(const fs::path& spec_file, const RunConfig& cfg) {
    const json j = load_json(spec_file);
    std::vector<TransectPlan> plans;
    if (j.is_object() && j.contains("transects")) {
        for (const auto& jt : j["transects"]) plans.push_back(transect_plan_from_json(jt, cfg));
    } else if (j.is_object()) {
        plans.push_back(transect_plan_from_json(j, cfg));
    } else {
        throw SchemaError("simulate spec: top level must be an object");
    }
    return plans;
}

}  // namespace

RansacConfig ransac_config(const RunConfig& cfg, std::uint64_t seed) {
    RansacConfig r;
    r.iterations = cfg.iterations;
    r.inlier_threshold = cfg.inlier_threshold;
    r.min_inlier_fraction = cfg.min_inlier_fraction;
    r.refit_iterations = cfg.refit_iterations;
    r.seed = seed;
    return r;
}

CalibrationConfig calibration_config(const RunConfig& cfg, std::uint64_t seed) {
    CalibrationConfig c;
    c.ransac = ransac_config(cfg, seed);
    c.max_fit_pixels = cfg.max_fit_pixels;
    c.spread_epsilon = cfg.spread_epsilon;
    c.disparity_floor = cfg.disparity_floor;
    c.force_planar = cfg.force_planar;
    return c;
}

TransectCalibration load_calibration_artifacts(const fs::path& transect_out_dir) {
    const fs::path raster = transect_out_dir / "target_calibrated.pfm";
    const fs::path mask = transect_out_dir / "target_mask.pgm";
    const fs::path meta = transect_out_dir / "calibration.json";
    if (!fs::exists(raster) || !fs::exists(mask) || !fs::exists(meta))
        throw CalibrationMissing("no calibration artifacts under " + transect_out_dir.string());
    TransectCalibration cal;
    cal.target_disparity_calibrated = load_disparity(raster);
    cal.target_mask = load_mask(mask);
    const json j = load_json(meta);
    cal.metric_fit = fit_from_json(j.at("metric_fit"));
    for (const auto& jf : j.at("per_reference_fits")) cal.per_reference_fits.push_back(fit_from_json(jf));
    cal.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    cal.target_index = j.at("target_index").get<int>();
    if (cal.target_mask.rows() != cal.target_disparity_calibrated.rows() ||
        cal.target_mask.cols() != cal.target_disparity_calibrated.cols())
        throw DimensionMismatch(transect_out_dir.string() +
                                ": target raster and mask dimensions differ");
    return cal;
}

int cmd_calibrate(const RunConfig& cfg) {
    const DiscoveryResult discovery = discover_transects(cfg.input_root);

    struct Outcome {
        bool ok = false;
        std::string reason;
        json record;
    };
    std::vector<Outcome> outcomes(discovery.transects.size());

    parallel_for(cfg.jobs, discovery.transects.size(), [&](std::size_t i) {
        const TransectLayout& layout = discovery.transects[i];
        Outcome& out = outcomes[i];
        try {
            const auto refs = load_reference_samples(layout, cfg.strip_rows);
            const auto ccfg = calibration_config(
                cfg, mix_seed(cfg.seed, layout.transect_id + "/calibrate"));
            const TransectCalibration cal = calibrate_transect(refs, ccfg);
            write_calibration_artifacts(cfg.output_root / layout.transect_id, layout.transect_id,
                                        cal);
            out.ok = true;
            out.record = {{"transect_id", layout.transect_id},
                          {"status", "ok"},
                          {"reference_count", layout.references.size()},
                          {"target_index", cal.target_index},
                          {"metric_fit", fit_to_json(cal.metric_fit)},
                          {"diagnostics", diagnostics_to_json(cal.diagnostics)}};
            log_info("calibrated " + layout.transect_id);
        } catch (const Error& e) {
            out.ok = false;
            out.reason = e.what();
            out.record = {{"transect_id", layout.transect_id},
                          {"status", "skipped"},
                          {"reason", out.reason}};
            log_warn("skipping " + layout.transect_id + ": " + out.reason);
        }
    });

    json report;
    report["transects"] = json::array();
    report["skipped"] = json::array();
    for (const auto& skip : discovery.skipped)
        report["skipped"].push_back({{"transect_id", skip.transect_id}, {"reason", skip.reason}});
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        report["transects"].push_back(outcomes[i].record);
        if (!outcomes[i].ok)
            report["skipped"].push_back(
                {{"transect_id", discovery.transects[i].transect_id},
                 {"reason", outcomes[i].reason}});
    }
    dump_json_atomic(cfg.output_root / "calibration_report.json", report);

    return report["skipped"].empty() ? kExitOk : kExitPartial;
}

int cmd_estimate(const RunConfig& cfg) {
    const DiscoveryResult discovery = discover_transects(cfg.input_root);

    std::vector<EstimateRow> all_rows;
    json errors = json::array();
    json transect_records = json::array();
    bool any_problem = !discovery.skipped.empty();
    for (const auto& skip : discovery.skipped)
        errors.push_back({{"transect_id", skip.transect_id}, {"reason", skip.reason}});

    for (const TransectLayout& layout : discovery.transects) {
        TransectCalibration cal;
        try {
            cal = load_calibration_artifacts(cfg.output_root / layout.transect_id);
        } catch (const Error& e) {
            errors.push_back({{"transect_id", layout.transect_id}, {"reason", e.what()}});
            any_problem = true;
            continue;
        }

        std::vector<EstimationOutcome> outcomes(layout.observations.size());
        parallel_for(cfg.jobs, layout.observations.size(), [&](std::size_t i) {
            const ObservationEntry& obs = layout.observations[i];
            EstimationOutcome& out = outcomes[i];
            try {
                const DisparityMap d_obs = load_observation_raster(
                    obs.disparity_path, cal.target_disparity_calibrated.rows(),
                    cal.target_disparity_calibrated.cols(), cfg.strip_rows);
                if (!fs::exists(obs.detection_path))
                    throw IoError("missing detections file " + obs.detection_path.string());
                const DetectionSet detections = load_detections(obs.detection_path);
                if (detections.image_id != obs.image_id)
                    throw SchemaError(obs.detection_path.string() + ": image_id '" +
                                      detections.image_id + "' does not match file stem");

                EstimationConfig ecfg;
                ecfg.percentile = cfg.percentile;
                ecfg.confidence_threshold = cfg.confidence;
                ecfg.force_low_inliers = cfg.force_low_inliers;
                ecfg.max_fit_pixels = cfg.max_fit_pixels;
                ecfg.disparity_floor = cfg.disparity_floor;
                ecfg.ransac = ransac_config(
                    cfg, mix_seed(cfg.seed, layout.transect_id + "/" + obs.image_id));

                for (const auto& e : estimate_observation(d_obs, detections, cal, ecfg)) {
                    const auto& box = detections.boxes[static_cast<std::size_t>(e.box_index)];
                    EstimateRow row;
                    row.transect_id = layout.transect_id;
                    row.image_id = e.image_id;
                    row.box_index = e.box_index;
                    row.x = box.x;
                    row.y = box.y;
                    row.w = box.w;
                    row.h = box.h;
                    row.confidence = box.confidence;
                    row.distance_m = e.distance_m;
                    row.percentile = e.percentile_used;
                    row.pixels_sampled = e.pixels_sampled;
                    row.invalid_fraction = e.invalid_pixel_fraction;
                    row.flags = format_flags(e);
                    out.rows.push_back(std::move(row));
                }
            } catch (const Error& e) {
                out.error = e.what();
            }
        });

        std::size_t emitted = 0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (!outcomes[i].error.empty()) {
                errors.push_back({{"transect_id", layout.transect_id},
                                  {"image_id", layout.observations[i].image_id},
                                  {"reason", outcomes[i].error}});
                any_problem = true;
                continue;
            }
            emitted += outcomes[i].rows.size();
            for (auto& row : outcomes[i].rows) all_rows.push_back(std::move(row));
        }
        transect_records.push_back({{"transect_id", layout.transect_id},
                                    {"observations_processed", layout.observations.size()},
                                    {"rows_emitted", emitted}});
    }

    std::sort(all_rows.begin(), all_rows.end(), [](const EstimateRow& a, const EstimateRow& b) {
        return std::tie(a.transect_id, a.image_id, a.box_index) <
               std::tie(b.transect_id, b.image_id, b.box_index);
    });
    write_estimates_csv(cfg.output_root / "estimates.csv", all_rows);

    json report;
    report["transects"] = transect_records;
    report["errors"] = errors;
    report["rows_total"] = all_rows.size();
    dump_json_atomic(cfg.output_root / "estimation_report.json", report);

    return any_problem ? kExitPartial : kExitOk;
}

int cmd_evaluate(const RunConfig& cfg) {
    const fs::path est_path =
        cfg.estimates_path ? *cfg.estimates_path : cfg.output_root / "estimates.csv";
    const std::vector<EstimateRow> rows = load_estimates_csv(est_path);

    std::map<std::tuple<std::string, std::string, int>, double> groundtruth;
    const DiscoveryResult discovery = discover_transects(cfg.input_root);
    for (const auto& layout : discovery.transects) {
        if (!layout.has_groundtruth) continue;
        for (const auto& row : load_groundtruth_csv(layout.dir / "groundtruth.csv"))
            groundtruth[{row.transect_id, row.image_id, row.box_index}] = row.distance_m;
    }

    std::vector<PairedMeasurement> pairs;
    std::int64_t unmatched_estimates = 0;
    for (const auto& row : rows) {
        const auto it = groundtruth.find({row.transect_id, row.image_id, row.box_index});
        if (it == groundtruth.end()) {
            ++unmatched_estimates;
            continue;
        }
        pairs.push_back({row.distance_m, it->second, row.transect_id, row.image_id});
        groundtruth.erase(it);
    }
    const std::int64_t unmatched_groundtruth = static_cast<std::int64_t>(groundtruth.size());

    if (pairs.empty())
        throw JoinError("evaluate: no estimate joined a ground-truth row (" +
                        std::to_string(unmatched_estimates) + " estimates unmatched)");

    const EvaluationReport report = build_report(pairs, cfg.density_grid);

    json j;
    j["count"] = report.count;
    j["mean_error_m"] = report.mean_error_m;
    j["mean_abs_error_m"] = report.mean_abs_error_m;
    j["unmatched_estimates"] = unmatched_estimates;
    j["unmatched_groundtruth"] = unmatched_groundtruth;
    j["per_transect"] = json::object();
    for (const auto& [tid, s] : report.per_transect)
        j["per_transect"][tid] = {{"count", s.count},
                                  {"mean_error_m", s.mean_error},
                                  {"mean_abs_error_m", s.mean_abs_error},
                                  {"q1", s.q1},
                                  {"median", s.median},
                                  {"q3", s.q3},
                                  {"whisker_lo", s.whisker_lo},
                                  {"whisker_hi", s.whisker_hi},
                                  {"outlier_count", s.outlier_count}};
    dump_json_atomic(cfg.output_root / "evaluation_report.json", j);

    std::string density_csv = "grid_m,density_est,density_gt\n";
    for (std::size_t i = 0; i < report.density_est.size(); ++i) {
        density_csv += format_number(report.density_est[i].grid_m) + "," +
                       format_number(report.density_est[i].density) + "," +
                       format_number(report.density_gt[i].density) + "\n";
    }
    write_file_atomic(cfg.output_root / "density.csv", density_csv);

    if (unmatched_estimates > 0 || unmatched_groundtruth > 0)
        log_warn("evaluate: " + std::to_string(unmatched_estimates) + " estimates and " +
                 std::to_string(unmatched_groundtruth) + " ground-truth rows had no join partner");
    return kExitOk;
}

int cmd_simulate(const fs::path& spec_file, const RunConfig& cfg) {
    const std::vector<TransectPlan> plans = parse_sim_spec(spec_file, cfg);

    for (const auto& plan : plans) {
        const fs::path dir = cfg.output_root / plan.transect_id;
        const std::vector<ReferenceSample> refs = generate_references(plan.scene);

        std::vector<ReferenceRow> ref_rows;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            char name[16];
            std::snprintf(name, sizeof(name), "ref_%02zu", i + 1);
            const std::string disparity_rel = std::string("references/") + name + ".pfm";
            const std::string mask_rel = std::string("references/") + name + "_mask.pgm";
            write_disparity(dir / disparity_rel, refs[i].disparity);
            write_mask(dir / mask_rel, refs[i].landmark_mask);
            ref_rows.push_back({plan.transect_id, name, disparity_rel, mask_rel,
                                refs[i].landmark_distance_m});
        }
        write_reference_csv(dir / "references.csv", ref_rows);

        std::vector<GroundTruthRow> gt_rows;
        for (std::size_t k = 0; k < plan.observations.size(); ++k) {
            const ObservationPlan& o = plan.observations[k];
            const SimObservation obs =
                generate_observation(plan.scene, o.animals, o.image_id, k);
            write_disparity(dir / "observations" / (o.image_id + ".pfm"), obs.disparity);
            write_detections(dir / "detections" / (o.image_id + ".json"), obs.detections);
            for (std::size_t b = 0; b < obs.animal_distances_m.size(); ++b)
                gt_rows.push_back({plan.transect_id, o.image_id, static_cast<int>(b),
                                   obs.animal_distances_m[b]});
        }
        write_groundtruth_csv(dir / "groundtruth.csv", gt_rows);
        log_info("simulated " + plan.transect_id + " (" + std::to_string(refs.size()) +
                 " references, " + std::to_string(plan.observations.size()) + " observations)");
    }
    return kExitOk;
}

}  // namespace trapmetric
