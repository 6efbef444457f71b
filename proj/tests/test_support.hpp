// Shared oracles for the test suite. These are deliberately independent of
// the library implementation paths they are used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace testsupport {

/// Sample Kendall tau via Knight's O(n log n) inversion count.
/// Assumes continuous data (no ties), which holds for the samplers under test.
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Composite Simpson rule with an even number of intervals.
double simpson(const std::function<double(double)>& f, double a, double b, int intervals);

/// Median of a copy of the values.
inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    const double m = mean(v);
    double acc = 0.0;
    for (double t : v) acc += (t - m) * (t - m);
    return acc / static_cast<double>(v.size() - 1);
}

}  // namespace testsupport
