#include "trapmetric/robustfit.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <vector>

#include "trapmetric/errors.hpp"
#include "trapmetric/order_stats.hpp"
#include "trapmetric/random.hpp"

namespace trapmetric {

namespace {

double mad_threshold(const Eigen::ArrayXd& ys) {
    std::vector<double> tmp(ys.data(), ys.data() + ys.size());
    const double center = median(tmp);
    for (double& t : tmp) t = std::abs(t - center);
    const double mad = median(std::move(tmp));
    double thr = 1.25 * mad;
    if (!(thr > 0.0)) thr = 1e-9 * std::max(1.0, ys.abs().maxCoeff());
    return thr;
}

// Weighted least squares for y ~ m*x + c via the 2x2 normal equations.
bool wls_solve(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, const Eigen::ArrayXd& w,
               double& m, double& c) {
    const double sw = w.sum();
    const double swx = (w * x).sum();
    const double swxx = (w * x * x).sum();
    const double swy = (w * y).sum();
    const double swxy = (w * x * y).sum();
    const double det = swxx * sw - swx * swx;
    if (!std::isfinite(det) || det == 0.0) return false;
    const double nm = (swxy * sw - swx * swy) / det;
    const double nc = (swxx * swy - swx * swxy) / det;
    if (!std::isfinite(nm) || !std::isfinite(nc)) return false;
    m = nm;
    c = nc;
    return true;
}

}  // namespace

AffineFit fit_affine(std::span<const SamplePair> samples, const RansacConfig& cfg) {
    const std::int64_t n = static_cast<std::int64_t>(samples.size());
    if (n < 2) throw DegenerateInput("fit_affine: need at least 2 samples");
    if (cfg.iterations < 1) throw InvalidArgument("fit_affine: iterations must be >= 1");
    if (!(cfg.min_inlier_fraction > 0.0 && cfg.min_inlier_fraction <= 1.0))
        throw InvalidArgument("fit_affine: min_inlier_fraction must lie in (0, 1]");

    Eigen::ArrayXd xs(n), ys(n);
    bool any_distinct_x = false;
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        if (!std::isfinite(s.x) || !std::isfinite(s.y))
            throw DegenerateInput("fit_affine: samples must be finite");
        xs[i] = s.x;
        ys[i] = s.y;
        any_distinct_x = any_distinct_x || (s.x != samples[0].x);
    }
    if (!any_distinct_x) throw DegenerateInput("fit_affine: all x values are equal");

    double thr = cfg.inlier_threshold ? *cfg.inlier_threshold : mad_threshold(ys);
    if (!(thr > 0.0)) throw InvalidArgument("fit_affine: inlier_threshold must be > 0");

    std::mt19937_64 rng(cfg.seed);
    Eigen::ArrayXd resid(n);

    double best_m = 0.0, best_c = 0.0, best_l1 = std::numeric_limits<double>::infinity();
    std::int64_t best_count = -1;
    const auto un = static_cast<std::uint64_t>(n);
    for (int it = 0; it < cfg.iterations; ++it) {
        const std::uint64_t i = uniform_index(rng, un);
        std::uint64_t j = uniform_index(rng, un - 1);
        if (j >= i) ++j;
        const double dx = xs[static_cast<std::int64_t>(j)] - xs[static_cast<std::int64_t>(i)];
        if (dx == 0.0) continue;
        const double m = (ys[static_cast<std::int64_t>(j)] - ys[static_cast<std::int64_t>(i)]) / dx;
        const double c = ys[static_cast<std::int64_t>(i)] - m * xs[static_cast<std::int64_t>(i)];
        if (!std::isfinite(m) || !std::isfinite(c)) continue;
        resid = (m * xs + c - ys).abs();
        const std::int64_t count = (resid <= thr).count();
        if (count < best_count) continue;
        const double l1 = (resid <= thr).select(resid, 0.0).sum();
        // ties: lower consensus L1, then the earlier iteration
        if (count > best_count || l1 < best_l1) {
            best_count = count;
            best_l1 = l1;
            best_m = m;
            best_c = c;
        }
    }
    if (best_count < 0) throw NoConsensus("fit_affine: no valid hypothesis was sampled");
    if (static_cast<double>(best_count) < cfg.min_inlier_fraction * static_cast<double>(n))
        throw NoConsensus("fit_affine: best consensus below min_inlier_fraction");

    // consensus set of the winning hypothesis
    resid = (best_m * xs + best_c - ys).abs();
    std::vector<std::int64_t> consensus;
    consensus.reserve(static_cast<std::size_t>(best_count));
    for (std::int64_t i = 0; i < n; ++i)
        if (resid[i] <= thr) consensus.push_back(i);

    Eigen::ArrayXd xc(consensus.size()), yc(consensus.size());
    for (std::size_t k = 0; k < consensus.size(); ++k) {
        xc[static_cast<std::int64_t>(k)] = xs[consensus[k]];
        yc[static_cast<std::int64_t>(k)] = ys[consensus[k]];
    }

    // IRLS refit toward the L1 minimizer over the consensus set
    double m = best_m, c = best_c;
    Eigen::ArrayXd w(xc.size());
    for (int pass = 0; pass < cfg.refit_iterations; ++pass) {
        w = (m * xc + c - yc).abs().max(1e-9).inverse();
        if (!wls_solve(xc, yc, w, m, c)) break;
    }

    resid = (m * xs + c - ys).abs();
    std::int64_t count = (resid <= thr).count();
    if (count == 0) {
        // refit drifted off the consensus; fall back to the raw hypothesis
        m = best_m;
        c = best_c;
        resid = (m * xs + c - ys).abs();
        count = (resid <= thr).count();
    }

    AffineFit fit;
    fit.m = m;
    fit.c = c;
    fit.inlier_count = count;
    fit.inlier_fraction = static_cast<double>(count) / static_cast<double>(n);
    fit.residual_l1 = (resid <= thr).select(resid, 0.0).sum() / static_cast<double>(count);
    return fit;
}

}  // namespace trapmetric
