#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "hsu/types.hpp"

namespace hsu {

constexpr double kPerspectiveFloor = 1e-10;

// Spectral angle (SAM) between two spectra, in radians. The cosine is
// clamped to [-1, 1]; rounding otherwise produces values like 1 + 1e-16.
inline double spectral_angle(Eigen::Ref<const Vector> s1, Eigen::Ref<const Vector> s2) {
    if (s1.size() != s2.size())
        throw std::invalid_argument("spectral_angle: length mismatch");
    const double n1 = s1.norm();
    const double n2 = s2.norm();
    if (n1 == 0.0 || n2 == 0.0)
        throw std::domain_error("spectral_angle: zero-norm spectrum");
    const double c = std::clamp(s1.dot(s2) / (n1 * n2), -1.0, 1.0);
    return std::acos(c);
}

inline double spectral_angle_deg(Eigen::Ref<const Vector> s1, Eigen::Ref<const Vector> s2) {
    return spectral_angle(s1, s2) * (180.0 / 3.14159265358979323846);
}

// Perspective projection of x onto the hyperplane u'x = 1: x / (x'u).
// Pixels nearly orthogonal to u are rejected rather than silently scaled;
// their direction is dominated by noise.
inline Vector perspective_project(Eigen::Ref<const Vector> x, Eigen::Ref<const Vector> u,
                                  double floor = kPerspectiveFloor) {
    if (x.size() != u.size())
        throw std::invalid_argument("perspective_project: length mismatch");
    const double denom = x.dot(u);
    if (std::abs(denom) <= floor)
        throw NearOrthogonalError("perspective_project: |x'u| = " + std::to_string(std::abs(denom)) +
                                  " is below floor");
    return x / denom;
}

// Noiseless image from per-pixel endmembers and abundances: column n is
// S_n a_n. Spatial dims are taken from the abundance layout (lines, samples).
inline SpectralCube reconstruct(const LocalEndmemberStack& locals, const AbundanceMatrix& abundances,
                                int lines, int samples) {
    const int n_pixels = locals.pixels();
    if (abundances.data.cols() != n_pixels)
        throw std::invalid_argument("reconstruct: pixel count mismatch");
    if (n_pixels == 0) throw std::invalid_argument("reconstruct: empty stack");
    const auto bands = locals.stack.front().rows();
    SpectralCube cube;
    cube.lines = lines;
    cube.samples = samples;
    cube.data.resize(bands, n_pixels);
    for (int n = 0; n < n_pixels; ++n) {
        const Matrix& s = locals.stack[n];
        if (s.rows() != bands || s.cols() != abundances.data.rows())
            throw std::invalid_argument("reconstruct: dimension mismatch at pixel " + std::to_string(n));
        cube.data.col(n).noalias() = s * abundances.data.col(n);
    }
    return cube;
}

}  // namespace hsu
