#pragma once

#include <span>
#include <vector>

namespace trapmetric {

/// Linear-interpolation percentile over an ascending-sorted range:
/// rank r = (p / 100) * (n - 1), result v[floor(r)] + (r - floor(r)) *
/// (v[floor(r) + 1] - v[floor(r)]). This is the one percentile definition
/// used across the codebase (box sampling, quartiles, MAD scale).
double percentile_sorted(std::span<const double> sorted_values, double p);

/// Sorts a copy, then interpolates.
double percentile(std::vector<double> values, double p);

/// percentile(values, 50): for even counts this is the mean of the two
/// central order statistics.
double median(std::vector<double> values);

}  // namespace trapmetric
