#include "trapmetric/order_stats.hpp"

#include <algorithm>
#include <cmath>

#include "trapmetric/errors.hpp"

namespace trapmetric {

double percentile_sorted(std::span<const double> sorted_values, double p) {
    if (sorted_values.empty()) throw EmptyInput("percentile of an empty range");
    if (!(p >= 0.0 && p <= 100.0)) throw InvalidArgument("percentile must lie in [0, 100]");
    const std::size_t n = sorted_values.size();
    if (n == 1) return sorted_values[0];
    const double r = (p / 100.0) * static_cast<double>(n - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(r), n - 2);
    const double frac = r - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

double percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, p);
}

double median(std::vector<double> values) {
    return percentile(std::move(values), 50.0);
}

}  // namespace trapmetric
