#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace herald {

/// Partial exponential sum f_n(x) = sum_{l=0}^{n} x^l / l!.
///
/// Terms are built by the upward recurrence t_l = t_{l-1} * x / l, so no
/// factorial is ever formed explicitly. The result never exceeds e^x.
[[nodiscard]] inline double f_partial(std::size_t n, double x) {
    double term = 1.0;
    double sum = 1.0;
    for (std::size_t l = 1; l <= n; ++l) {
        term *= x / static_cast<double>(l);
        sum += term;
        if (term == 0.0) {
            break;
        }
    }
    return sum;
}

/// g_n(x, y) = sum_{l=0}^{n} x^l y^{n-l} = (x^{n+1} - y^{n+1}) / (x - y).
///
/// Equal arguments (|x - y| < 1e-12) take the limit (n + 1) x^n. Nearby
/// arguments are summed term by term, since the quotient form cancels there.
[[nodiscard]] inline double g_ratio(std::size_t n, double x, double y) {
    const double gap = std::abs(x - y);
    if (gap < 1e-12) {
        return static_cast<double>(n + 1) * std::pow(x, static_cast<double>(n));
    }
    const double scale = std::max(std::abs(x), std::abs(y));
    if (gap < 1e-3 * scale) {
        // Horner: ((x + y) x + y^2) x + ... accumulates sum x^l y^{n-l}.
        double sum = 1.0;
        double y_power = 1.0;
        for (std::size_t l = 1; l <= n; ++l) {
            y_power *= y;
            sum = sum * x + y_power;
        }
        return sum;
    }
    const auto p = static_cast<double>(n + 1);
    return (std::pow(x, p) - std::pow(y, p)) / (x - y);
}

}  // namespace herald
