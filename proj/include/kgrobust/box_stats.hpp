// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

#include <cstddef>
#include <span>

namespace kgrobust {

/// Five-number summary with Tukey outlier count (beyond 1.5 IQR of the quartiles).
/// Quartiles use linear interpolation between order statistics.
struct BoxStats {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    std::size_t n = 0;
    std::size_t outliers = 0;

    static BoxStats compute(std::span<const double> values);

    bool monotone() const { return min <= q1 && q1 <= median && median <= q3 && q3 <= max; }
};

/// Linear-interpolation quantile of already sorted values, p in [0, 1].
double sorted_quantile(std::span<const double> sorted, double p);

}  // namespace kgrobust
