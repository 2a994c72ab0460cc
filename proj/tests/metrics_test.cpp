#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "trapmetric/errors.hpp"
#include "trapmetric/metrics.hpp"

using namespace trapmetric;

namespace {

std::vector<PairedMeasurement> pairs_of(const std::vector<std::pair<double, double>>& v,
                                        const std::string& tid = "T01") {
    std::vector<PairedMeasurement> out;
    for (const auto& [est, gt] : v) out.push_back({est, gt, tid, "img"});
    return out;
}

double trapezoid(const std::vector<DensityPoint>& d) {
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < d.size(); ++i)
        integral += 0.5 * (d[i + 1].grid_m - d[i].grid_m) * (d[i].density + d[i + 1].density);
    return integral;
}

double density_at(const std::vector<DensityPoint>& d, double g) {
    double best = 0.0, dist = 1e9;
    for (const auto& p : d)
        if (std::abs(p.grid_m - g) < dist) {
            dist = std::abs(p.grid_m - g);
            best = p.density;
        }
    return best;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("mean_error and mean_abs_error basics") {
    CHECK(mean_error(pairs_of({{2.0, 3.0}, {4.0, 3.0}})) == 0.0);
    CHECK(mean_error(pairs_of({{3.0, 3.0}})) == 0.0);
    CHECK(mean_abs_error(pairs_of({{2.0, 3.0}, {4.0, 3.0}})) == 1.0);
    CHECK(mean_abs_error(pairs_of({{3.0, 3.0}, {3.0, 3.0}})) == 0.0);
    CHECK_THROWS_AS(mean_error({}), EmptyInput);
    CHECK_THROWS_AS(mean_abs_error({}), EmptyInput);
}

TEST_CASE("metric identities on random pair sets") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 50);
        std::vector<PairedMeasurement> pairs;
        for (int i = 0; i < n; ++i)
            pairs.push_back({testutil::uniform(rng, 0.5, 20.0), testutil::uniform(rng, 0.5, 20.0),
                             "T", "i"});
        const double me = mean_error(pairs);
        const double mae = mean_abs_error(pairs);
        CHECK(std::abs(me) <= mae + 1e-12);
        CHECK((mae == 0.0) == [&] {
            for (const auto& p : pairs)
                if (p.z_est != p.z_gt) return false;
            return true;
        }());

        const double delta = testutil::uniform(rng, -3.0, 3.0);
        auto shifted = pairs;
        for (auto& p : shifted) p.z_est += delta;
        CHECK(mean_error(shifted) == doctest::Approx(me + delta).epsilon(1e-12));
    }
}

TEST_CASE("density_export: single value normalizes on the fallback bandwidth") {
    const std::vector<double> one = {5.0};
    const auto d = density_export(one, {0.0, 25.0, 0.1});
    CHECK(std::abs(trapezoid(d) - 1.0) < 1e-6);
    // Gaussian bump centered at 5.0
    CHECK(density_at(d, 5.0) > density_at(d, 4.0));
    CHECK(density_at(d, 5.0) > density_at(d, 6.0));
    CHECK(density_at(d, 5.0) == doctest::Approx(1.0 / (0.1 * std::sqrt(2.0 * M_PI))).epsilon(0.01));
}

TEST_CASE("density_export: N(8,1) sample matches the analytic peak within 5%") {
    std::mt19937_64 rng(9);
    std::vector<double> sample;
    sample.reserve(10000);
    for (int i = 0; i < 10000; ++i) sample.push_back(8.0 + testutil::gauss(rng));
    const auto d = density_export(sample, {0.0, 25.0, 0.1});
    CHECK(std::abs(trapezoid(d) - 1.0) < 1e-6);
    CHECK(density_at(d, 8.0) == doctest::Approx(0.3989).epsilon(0.05));
}

TEST_CASE("density_export: equal clusters at 2 m and 9 m have equal peaks") {
    std::vector<double> values;
    for (int i = 0; i < 100; ++i) {
        values.push_back(2.0);
        values.push_back(9.0);
    }
    const auto d = density_export(values, {0.0, 25.0, 0.1});
    const double ratio = density_at(d, 2.0) / density_at(d, 9.0);
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("density_export: errors") {
    CHECK_THROWS_AS(density_export({}, {0.0, 25.0, 0.1}), EmptyInput);
    const std::vector<double> off_grid = {1e9};
    CHECK_THROWS_AS(density_export(off_grid, {0.0, 25.0, 0.1}), DegenerateBandwidth);
}

TEST_CASE("boxplot_stats: interpolated quartiles") {
    const auto stats = boxplot_stats(pairs_of({{-1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}));
    const auto& s = stats.at("T01");
    CHECK(s.median == 0.0);
    CHECK(s.q1 == -0.5);
    CHECK(s.q3 == 0.5);
    CHECK(s.outlier_count == 0);
    CHECK(s.whisker_lo == -1.0);
    CHECK(s.whisker_hi == 1.0);
}

TEST_CASE("boxplot_stats: constant errors") {
    const auto stats = boxplot_stats(pairs_of({{1.2, 1.0}, {2.2, 2.0}, {3.2, 3.0}}));
    const auto& s = stats.at("T01");
    CHECK(s.q1 == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s.median == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s.q3 == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s.outlier_count == 0);
}

TEST_CASE("boxplot_stats: the 1.5 IQR rule flags the lone extreme point") {
    const auto stats =
        boxplot_stats(pairs_of({{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {10.0, 0.0}}));
    const auto& s = stats.at("T01");
    CHECK(s.outlier_count == 1);
    CHECK(s.whisker_hi == 0.0);
    CHECK(s.whisker_lo == 0.0);
}

TEST_CASE("boxplot_stats: quartiles match the brute-force oracle") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 60);
        std::vector<PairedMeasurement> pairs;
        std::vector<double> errors;
        for (int i = 0; i < n; ++i) {
            const double est = testutil::uniform(rng, 0.0, 20.0);
            const double gt = testutil::uniform(rng, 0.0, 20.0);
            pairs.push_back({est, gt, "T", "i"});
            errors.push_back(est - gt);
        }
        const auto& s = boxplot_stats(pairs).at("T");
        CHECK(s.q1 == testutil::percentile_oracle(errors, 25.0));
        CHECK(s.median == testutil::percentile_oracle(errors, 50.0));
        CHECK(s.q3 == testutil::percentile_oracle(errors, 75.0));
    }
}

TEST_CASE("boxplot_stats groups by transect") {
    std::vector<PairedMeasurement> pairs;
    pairs.push_back({1.0, 0.0, "A", "i"});
    pairs.push_back({2.0, 0.0, "B", "i"});
    pairs.push_back({3.0, 0.0, "B", "i"});
    const auto stats = boxplot_stats(pairs);
    CHECK(stats.size() == 2);
    CHECK(stats.at("A").count == 1);
    CHECK(stats.at("B").count == 2);
    CHECK(stats.at("B").mean_error == 2.5);
}

TEST_CASE("build_report wires everything together") {
    const auto report = build_report(
        pairs_of({{3.0, 3.0}, {5.0, 4.0}, {6.0, 7.0}, {8.0, 8.0}}), {0.0, 25.0, 0.1});
    CHECK(report.count == 4);
    CHECK(report.mean_error_m == doctest::Approx(0.0));
    CHECK(report.mean_abs_error_m == doctest::Approx(0.5));
    CHECK(std::abs(trapezoid(report.density_est) - 1.0) < 1e-6);
    CHECK(std::abs(trapezoid(report.density_gt) - 1.0) < 1e-6);
    CHECK(report.per_transect.count("T01") == 1);
}

TEST_SUITE_END();
