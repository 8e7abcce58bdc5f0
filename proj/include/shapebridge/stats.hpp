#pragma once

// Small-sample statistics used by the verification suites: moments with
// standard errors and the two-sample Kolmogorov-Smirnov distance.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "shapebridge/errors.hpp"

namespace shapebridge {

// Welford's running mean: exact for constant sequences, stable otherwise.
inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw MalformedInputError("mean_of: empty sample");
    double mean = 0.0;
    double count = 0.0;
    for (double x : xs) {
        count += 1.0;
        mean += (x - mean) / count;
    }
    return mean;
}

// Unbiased sample variance by Welford's update.
inline double variance_of(const std::vector<double>& xs) {
    if (xs.size() < 2) throw MalformedInputError("variance_of: need at least two samples");
    double mean = 0.0;
    double m2 = 0.0;
    double count = 0.0;
    for (double x : xs) {
        count += 1.0;
        const double delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
    }
    return m2 / (count - 1.0);
}

// Standard error of the sample mean.
inline double standard_error_of(const std::vector<double>& xs) {
    return std::sqrt(variance_of(xs) / static_cast<double>(xs.size()));
}

// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b| over the pooled
// sample, by a sorted merge scan.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw MalformedInputError("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0;
    std::size_t ib = 0;
    double worst = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= x) ++ia;
        while (ib < b.size() && b[ib] <= x) ++ib;
        worst = std::max(worst, std::abs(static_cast<double>(ia) / na -
                                         static_cast<double>(ib) / nb));
    }
    return worst;
}

// Asymptotic two-sample critical value c(alpha) * sqrt((n+m)/(n*m)) with
// c(alpha) = sqrt(-ln(alpha/2)/2); alpha = 0.01 gives c = 1.628.
inline double ks_critical_value(std::size_t n, std::size_t m, double alpha = 0.01) {
    if (n == 0 || m == 0) throw MalformedInputError("ks_critical_value: empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw MalformedInputError("ks_critical_value: alpha must lie in (0, 1)");
    }
    const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
    const double dn = static_cast<double>(n);
    const double dm = static_cast<double>(m);
    return c * std::sqrt((dn + dm) / (dn * dm));
}

}  // namespace shapebridge
