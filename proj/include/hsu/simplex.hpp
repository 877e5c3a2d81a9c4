#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "hsu/types.hpp"

namespace hsu {

// Euclidean projection onto the unit simplex {a >= 0, 1'a = 1}, exact
// sort-based algorithm (Held/Condat). In-place on a raw span so solvers
// can reuse a scratch buffer in per-pixel loops.
inline void project_simplex_inplace(double* v, int n, std::vector<double>& scratch) {
    scratch.assign(v, v + n);
    std::sort(scratch.begin(), scratch.end(), std::greater<double>());
    double running = 0.0;
    double theta = scratch[0] - 1.0;  // k = 1 fallback
    for (int k = 0; k < n; ++k) {
        running += scratch[k];
        const double t = (running - 1.0) / (k + 1);
        if (scratch[k] - t <= 0.0) break;
        theta = t;
    }
    for (int i = 0; i < n; ++i) v[i] = std::max(v[i] - theta, 0.0);
}

inline Vector project_simplex(Eigen::Ref<const Vector> v) {
    if (v.size() == 0) throw std::invalid_argument("project_simplex: empty vector");
    if (!v.allFinite()) throw std::invalid_argument("project_simplex: non-finite input");
    Vector out = v;
    std::vector<double> scratch;
    project_simplex_inplace(out.data(), static_cast<int>(out.size()), scratch);
    return out;
}

}  // namespace hsu
