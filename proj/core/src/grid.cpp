// SPDX-License-Identifier: Apache-2.0
#include "tdx/grid.hpp"

#include <cmath>

namespace tdx {

bool GridFunction::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

} // namespace tdx
