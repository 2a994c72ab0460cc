#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "test_util.hpp"
#include "trapmetric/errors.hpp"
#include "trapmetric/io.hpp"
#include "trapmetric/pipeline.hpp"
#include "trapmetric/simulator.hpp"

using namespace trapmetric;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string small_sim_spec(const std::string& tid, int observations, double sigma = 0.0) {
    json j;
    json t;
    t["transect_id"] = tid;
    t["width"] = 160;
    t["height"] = 120;
    t["focal_px"] = 150.0;
    t["horizon_row"] = 48;
    t["landmark_distances_m"] = {3.0, 8.0, 15.0};
    t["noise_sigma"] = sigma;
    t["seed"] = 21;
    t["num_observations"] = observations;
    t["animal_distance_range"] = {3.0, 10.0};
    j["transects"] = json::array({t});
    return j.dump(2);
}

RunConfig run_config(const fs::path& input, const fs::path& output) {
    RunConfig cfg;
    cfg.input_root = input;
    cfg.output_root = output;
    cfg.seed = 5;
    return cfg;
}

json load_json_file(const fs::path& p) { return json::parse(testutil::slurp(p)); }

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("simulate writes a transect tree that discovery loads back") {
    testutil::TempDir tmp("sim_roundtrip");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 3));

    RunConfig cfg = run_config("", tmp.path / "data");
    CHECK(cmd_simulate(spec, cfg) == kExitOk);

    const DiscoveryResult d = discover_transects(tmp.path / "data");
    REQUIRE(d.transects.size() == 1);
    CHECK(d.transects[0].transect_id == "S01");
    CHECK(d.transects[0].references.size() == 3);
    CHECK(d.transects[0].observations.size() == 3);
    CHECK(d.transects[0].has_groundtruth);
    CHECK(fs::exists(d.transects[0].observations[0].detection_path));
}

TEST_CASE("simulate is deterministic across runs") {
    testutil::TempDir tmp("sim_det");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 2, 0.01));

    RunConfig a = run_config("", tmp.path / "a");
    RunConfig b = run_config("", tmp.path / "b");
    REQUIRE(cmd_simulate(spec, a) == kExitOk);
    REQUIRE(cmd_simulate(spec, b) == kExitOk);
    CHECK(testutil::snapshot_tree(tmp.path / "a") == testutil::snapshot_tree(tmp.path / "b"));
}

TEST_CASE("simulate rejects a spec whose horizon is below the image") {
    testutil::TempDir tmp("sim_bad");
    json j;
    j["transect_id"] = "S01";
    j["height"] = 120;
    j["horizon_row"] = 500;
    j["landmark_distances_m"] = {3.0, 15.0};
    j["observations"] = json::array();
    testutil::spit(tmp.path / "spec.json", j.dump());
    RunConfig cfg = run_config("", tmp.path / "data");
    CHECK_THROWS_AS(cmd_simulate(tmp.path / "spec.json", cfg), SpecError);
}

TEST_CASE("calibrate + estimate + evaluate on a synthetic transect") {
    testutil::TempDir tmp("full_run");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 10));
    const fs::path data = tmp.path / "data";
    const fs::path out = tmp.path / "out";

    RunConfig cfg = run_config(data, out);
    REQUIRE(cmd_simulate(spec, cfg) == kExitOk);
    CHECK(cmd_calibrate(cfg) == kExitOk);
    CHECK(fs::exists(out / "S01" / "target_calibrated.pfm"));
    CHECK(fs::exists(out / "S01" / "target_mask.pgm"));
    CHECK(fs::exists(out / "S01" / "calibration.json"));

    const json report = load_json_file(out / "calibration_report.json");
    CHECK(report["skipped"].empty());
    CHECK(report["transects"].size() == 1);
    CHECK(report["transects"][0]["status"] == "ok");

    CHECK(cmd_estimate(cfg) == kExitOk);
    const auto rows = load_estimates_csv(out / "estimates.csv");
    CHECK(rows.size() == 10);  // one animal per observation

    CHECK(cmd_evaluate(cfg) == kExitOk);
    const json eval = load_json_file(out / "evaluation_report.json");
    CHECK(eval["count"] == 10);
    CHECK(eval["unmatched_estimates"] == 0);
    CHECK(eval["unmatched_groundtruth"] == 0);
    // noise-free scenes estimate essentially exactly
    CHECK(std::abs(eval["mean_abs_error_m"].get<double>()) < 1e-3);
    CHECK(fs::exists(out / "density.csv"));
}

TEST_CASE("calibration artifacts round trip through load_calibration_artifacts") {
    testutil::TempDir tmp("artifacts");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 1));
    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    REQUIRE(cmd_simulate(spec, cfg) == kExitOk);
    REQUIRE(cmd_calibrate(cfg) == kExitOk);

    const TransectCalibration cal = load_calibration_artifacts(tmp.path / "out" / "S01");
    CHECK(cal.per_reference_fits.size() == 3);
    CHECK(cal.target_index == 2);
    CHECK(cal.target_disparity_calibrated.rows() == 120);
    CHECK(std::abs(cal.metric_fit.m - 1.0) < 1e-3);

    CHECK_THROWS_AS(load_calibration_artifacts(tmp.path / "out" / "NOPE"), CalibrationMissing);
}

TEST_CASE("planar transect exits with the partial code and a skip record") {
    testutil::TempDir tmp("planar");
    const fs::path dir = tmp.path / "data" / "P01";

    // identical scenes whose landmark regions all share one disparity
    const DisparityMap scene = testutil::textured_scene(60, 80, 2);
    std::vector<ReferenceRow> rows;
    for (int i = 0; i < 3; ++i) {
        DisparityMap d = scene;
        d.block(10, 10 + 15 * i, 8, 8).setConstant(0.1);
        const std::string name = "ref_0" + std::to_string(i + 1);
        write_disparity(dir / "references" / (name + ".pfm"), d);
        write_mask(dir / "references" / (name + "_mask.pgm"),
                   testutil::rect_mask(60, 80, 10, 10 + 15 * i, 8, 8));
        rows.push_back({"P01", name, "references/" + name + ".pfm",
                        "references/" + name + "_mask.pgm", 3.0 * (i + 1)});
    }
    write_reference_csv(dir / "references.csv", rows);
    fs::create_directories(dir / "observations");

    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    CHECK(cmd_calibrate(cfg) == kExitPartial);
    const json report = load_json_file(tmp.path / "out" / "calibration_report.json");
    REQUIRE(report["skipped"].size() == 1);
    CHECK(report["skipped"][0]["transect_id"] == "P01");
    const std::string reason = report["skipped"][0]["reason"].get<std::string>();
    CHECK(reason.find("planar") != std::string::npos);
}

TEST_CASE("empty input root calibrates to an empty report with exit 0") {
    testutil::TempDir tmp("empty_root");
    fs::create_directories(tmp.path / "data");
    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    CHECK(cmd_calibrate(cfg) == kExitOk);
    const json report = load_json_file(tmp.path / "out" / "calibration_report.json");
    CHECK(report["transects"].empty());
    CHECK(report["skipped"].empty());
}

TEST_CASE("estimate without calibration artifacts records CalibrationMissing") {
    testutil::TempDir tmp("missing_cal");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 1));
    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    REQUIRE(cmd_simulate(spec, cfg) == kExitOk);

    CHECK(cmd_estimate(cfg) == kExitPartial);
    const json report = load_json_file(tmp.path / "out" / "estimation_report.json");
    REQUIRE(report["errors"].size() == 1);
    const std::string reason = report["errors"][0]["reason"].get<std::string>();
    CHECK(reason.find("calibration") != std::string::npos);
    CHECK(load_estimates_csv(tmp.path / "out" / "estimates.csv").empty());
}

TEST_CASE("observation with zero detections emits zero rows but is processed") {
    testutil::TempDir tmp("zero_det");
    json t;
    t["transect_id"] = "S01";
    t["width"] = 160;
    t["height"] = 120;
    t["focal_px"] = 150.0;
    t["horizon_row"] = 48;
    t["landmark_distances_m"] = {3.0, 15.0};
    t["seed"] = 4;
    t["observations"] = json::array({json{{"image_id", "obs_0001"},
                                          {"animals", json::array()}}});
    testutil::spit(tmp.path / "spec.json", t.dump());

    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    REQUIRE(cmd_simulate(tmp.path / "spec.json", cfg) == kExitOk);
    REQUIRE(cmd_calibrate(cfg) == kExitOk);
    CHECK(cmd_estimate(cfg) == kExitOk);
    CHECK(load_estimates_csv(tmp.path / "out" / "estimates.csv").empty());
    const json report = load_json_file(tmp.path / "out" / "estimation_report.json");
    CHECK(report["transects"][0]["observations_processed"] == 1);
    CHECK(report["transects"][0]["rows_emitted"] == 0);
}

TEST_CASE("evaluate: shifted estimates move the mean error by the shift") {
    testutil::TempDir tmp("shifted");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 6));
    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    REQUIRE(cmd_simulate(spec, cfg) == kExitOk);
    REQUIRE(cmd_calibrate(cfg) == kExitOk);
    REQUIRE(cmd_estimate(cfg) == kExitOk);

    auto rows = load_estimates_csv(tmp.path / "out" / "estimates.csv");
    for (auto& r : rows) r.distance_m += 1.0;
    write_estimates_csv(tmp.path / "out" / "estimates.csv", rows);

    REQUIRE(cmd_evaluate(cfg) == kExitOk);
    const json eval = load_json_file(tmp.path / "out" / "evaluation_report.json");
    CHECK(eval["mean_error_m"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(eval["mean_abs_error_m"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("evaluate: missing ground truth is counted, not fatal") {
    testutil::TempDir tmp("half_gt");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 4));
    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    REQUIRE(cmd_simulate(spec, cfg) == kExitOk);
    REQUIRE(cmd_calibrate(cfg) == kExitOk);
    REQUIRE(cmd_estimate(cfg) == kExitOk);

    // drop half the ground-truth rows
    auto gt = load_groundtruth_csv(tmp.path / "data" / "S01" / "groundtruth.csv");
    gt.resize(gt.size() / 2);
    write_groundtruth_csv(tmp.path / "data" / "S01" / "groundtruth.csv", gt);

    REQUIRE(cmd_evaluate(cfg) == kExitOk);
    const json eval = load_json_file(tmp.path / "out" / "evaluation_report.json");
    CHECK(eval["count"] == 2);
    CHECK(eval["unmatched_estimates"] == 2);
    CHECK(eval["unmatched_groundtruth"] == 0);
}

TEST_CASE("evaluate with no joinable keys is a fatal JoinError") {
    testutil::TempDir tmp("no_join");
    const fs::path spec = tmp.path / "spec.json";
    testutil::spit(spec, small_sim_spec("S01", 1));
    RunConfig cfg = run_config(tmp.path / "data", tmp.path / "out");
    REQUIRE(cmd_simulate(spec, cfg) == kExitOk);
    REQUIRE(cmd_calibrate(cfg) == kExitOk);
    REQUIRE(cmd_estimate(cfg) == kExitOk);
    fs::remove(tmp.path / "data" / "S01" / "groundtruth.csv");
    CHECK_THROWS_AS(cmd_evaluate(cfg), JoinError);
}

TEST_SUITE_END();
