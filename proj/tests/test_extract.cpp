#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "hsu/extract.hpp"
#include "hsu/rng.hpp"
#include "oracles.hpp"

using hsu::Matrix;
using hsu::Vector;

namespace {

hsu::SpectralCube cube_from(const Matrix& data) {
    return hsu::SpectralCube(data, 1, static_cast<int>(data.cols()));
}

Matrix random_positive(int rows, int cols, hsu::Rng& rng, double lo = 0.05, double hi = 1.0) {
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(lo, hi);
    return m;
}

// Extreme-point oracle for P = 3 simplex data: the projected scatter is
// planar, so reduce to 2-D principal coordinates and take the convex hull
// (monotone chain). Hull vertices are exactly the extreme pixels.
std::set<int> extreme_points(const Matrix& data) {
    const Vector u = data.rowwise().mean();
    Matrix projected(data.rows(), data.cols());
    for (int i = 0; i < data.cols(); ++i) projected.col(i) = data.col(i) / data.col(i).dot(u);
    const Vector center = projected.rowwise().mean();
    Matrix centered = projected.colwise() - center;
    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU);

    struct Pt {
        double x, y;
        int idx;
    };
    std::vector<Pt> pts(data.cols());
    for (int i = 0; i < data.cols(); ++i) {
        pts[i] = {svd.matrixU().col(0).dot(centered.col(i)),
                  svd.matrixU().col(1).dot(centered.col(i)), i};
    }
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    auto cross = [](const Pt& o, const Pt& a, const Pt& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    std::vector<Pt> hull(2 * pts.size());
    size_t k = 0;
    for (size_t i = 0; i < pts.size(); ++i) {  // lower chain
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {  // upper chain
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    std::set<int> extremes;
    for (size_t i = 0; i + 1 < k; ++i) extremes.insert(hull[i].idx);
    return extremes;
}

}  // namespace

TEST_CASE("vca recovers the pure pixels of noiseless simplex data") {
    hsu::Rng rng(41);
    const int bands = 8, p = 3, n = 40;
    const Matrix s = random_positive(bands, p, rng, 0.1, 1.0);
    Matrix data(bands, n);
    for (int c = 0; c < p; ++c) data.col(c) = s.col(c);  // pure pixels up front
    for (int i = p; i < n; ++i) {
        Vector a(p);
        for (int c = 0; c < p; ++c) a[c] = 0.15 + rng.uniform();  // strictly mixed
        a /= a.sum();
        data.col(i) = s * a;
    }

    const std::set<int> truth = extreme_points(data);
    REQUIRE(truth == std::set<int>({0, 1, 2}));

    const auto result = hsu::vca(cube_from(data), p, 7);
    const std::set<int> got(result.pixel_indices.begin(), result.pixel_indices.end());
    CHECK(got == truth);
    // selected endmembers are actual pixels of the input
    for (int k = 0; k < p; ++k)
        CHECK((result.endmembers.data.col(k) - data.col(result.pixel_indices[k])).norm() == 0.0);
}

TEST_CASE("vca on conical data matches generator directions within 0.5 degrees") {
    hsu::Rng rng(42);
    const int bands = 20, p = 3, n = 200;
    const Matrix s = random_positive(bands, p, rng, 0.1, 1.0);
    Matrix data(bands, n);
    for (int i = 0; i < n; ++i) {
        const double psi = rng.uniform(0.5, 1.5);
        if (i < p) {
            data.col(i) = psi * s.col(i);  // scaled pure pixels
        } else {
            Vector a(p);
            for (int c = 0; c < p; ++c) a[c] = 0.1 + rng.uniform();
            a /= a.sum();
            data.col(i) = psi * (s * a);
        }
    }
    const auto result = hsu::vca(cube_from(data), p, 11);
    for (int c = 0; c < p; ++c) {
        double best = 180.0;
        for (int k = 0; k < p; ++k)
            best = std::min(best, hsu::spectral_angle_deg(result.endmembers.data.col(k), s.col(c)));
        CHECK(best < 0.5);
    }
}

TEST_CASE("vca failure mode: near-zero shadow pixels get extracted") {
    hsu::Rng rng(43);
    const int bands = 20, p = 3, n = 300;
    const Matrix s = random_positive(bands, p, rng, 0.1, 1.0);
    Matrix data(bands, n);
    for (int i = 0; i < n; ++i) {
        Vector a(p);
        for (int c = 0; c < p; ++c) a[c] = rng.uniform();
        a /= a.sum();
        const double psi = rng.uniform(0.5, 1.5);
        data.col(i) = psi * (s * a);
        if (i < p) data.col(i) = rng.uniform(0.8, 1.2) * s.col(i);  // pure pixels exist
    }
    // inject shadows: a tiny remnant of the scene plus sensor noise that
    // dominates the direction, as near-zero pixels look after acquisition
    for (int i = n - 6; i < n; ++i) {
        data.col(i) *= 0.005;
        for (int b = 0; b < bands; ++b) data(b, i) += 0.01 * rng.normal();
    }
    const auto result = hsu::vca(cube_from(data), p, 5);
    bool spurious = false;
    for (int k = 0; k < p; ++k) {
        double best = 180.0;
        for (int c = 0; c < p; ++c)
            best = std::min(best, hsu::spectral_angle_deg(result.endmembers.data.col(k), s.col(c)));
        if (best > 10.0) spurious = true;
    }
    CHECK(spurious);
}

TEST_CASE("spherical k-means recovers a well-separated directional partition") {
    hsu::Rng rng(44);
    const int bands = 16, p = 3, n = 240;
    // generators pairwise > 20 degrees apart
    Matrix gen(bands, p);
    for (;;) {
        gen = random_positive(bands, p, rng, 0.05, 1.0);
        double min_angle = 180.0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                min_angle = std::min(min_angle, hsu::spectral_angle_deg(gen.col(i), gen.col(j)));
        if (min_angle > 20.0) break;
    }
    Matrix data(bands, n);
    std::vector<int> truth(n);
    for (int i = 0; i < n; ++i) {
        const int c = i % p;
        truth[i] = c;
        Vector v;
        do {
            v = gen.col(c);
            for (int b = 0; b < bands; ++b) v[b] *= 1.0 + 0.01 * rng.normal();
        } while (hsu::spectral_angle_deg(v, gen.col(c)) >= 2.0);
        data.col(i) = rng.uniform(0.5, 2.0) * v;
    }

    const auto result = hsu::spherical_kmeans(cube_from(data), p, 3);
    // agreement up to permutation: every true class maps to exactly one label
    std::map<int, std::set<int>> mapping;
    for (int i = 0; i < n; ++i) mapping[truth[i]].insert(result.labels[i]);
    std::set<int> used;
    for (const auto& [cls, labels] : mapping) {
        CHECK(labels.size() == 1);
        used.insert(*labels.begin());
    }
    CHECK(used.size() == static_cast<size_t>(p));
}

TEST_CASE("spherical k-means: collinear pixels with P = 1") {
    hsu::Rng rng(45);
    const int bands = 10, n = 50;
    const Matrix dir = random_positive(bands, 1, rng);
    Matrix data(bands, n);
    for (int i = 0; i < n; ++i) data.col(i) = rng.uniform(0.1, 3.0) * dir.col(0);
    const auto result = hsu::spherical_kmeans(cube_from(data), 1, 9);
    // acos bottoms out near sqrt(eps); the direction itself is checkable at 1e-10
    CHECK(hsu::spectral_angle(result.endmembers.data.col(0), dir.col(0)) < 1e-7);
    CHECK((result.endmembers.data.col(0) - dir.col(0).normalized()).norm() < 1e-10);
}

TEST_CASE("spherical k-means centroids shrug off shadow pixels") {
    hsu::Rng rng(46);
    const int bands = 16, p = 3, n = 300;
    Matrix gen(bands, p);
    for (;;) {
        gen = random_positive(bands, p, rng, 0.05, 1.0);
        double min_angle = 180.0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                min_angle = std::min(min_angle, hsu::spectral_angle_deg(gen.col(i), gen.col(j)));
        if (min_angle > 20.0) break;
    }
    Matrix clean(bands, n);
    for (int i = 0; i < n; ++i) {
        Vector v = gen.col(i % p);
        for (int b = 0; b < bands; ++b) v[b] *= 1.0 + 0.01 * rng.normal();
        clean.col(i) = rng.uniform(0.5, 1.5) * v;
    }
    Matrix shadowed = clean;
    for (int i = 0; i < n; i += 40) shadowed.col(i) *= 0.01;

    const auto a = hsu::spherical_kmeans(cube_from(clean), p, 17);
    const auto b = hsu::spherical_kmeans(cube_from(shadowed), p, 17);
    for (int k = 0; k < p; ++k) {
        double best = 180.0;
        for (int j = 0; j < p; ++j)
            best = std::min(best,
                            hsu::spectral_angle_deg(a.endmembers.data.col(k), b.endmembers.data.col(j)));
        CHECK(best < 1.0);
    }
}

TEST_CASE("spherical k-means objective is non-decreasing") {
    hsu::Rng rng(47);
    const int bands = 12, n = 150;
    Matrix data = random_positive(bands, n, rng);
    const auto result = hsu::spherical_kmeans(cube_from(data), 4, 23);
    for (size_t t = 1; t < result.objective_trace.size(); ++t)
        CHECK(result.objective_trace[t] >= result.objective_trace[t - 1] - 1e-10);
}

TEST_CASE("spherical k-means is invariant to per-pixel rescaling") {
    hsu::Rng rng(48);
    const int bands = 12, p = 3, n = 200;
    Matrix gen(bands, p);
    for (;;) {
        gen = random_positive(bands, p, rng, 0.05, 1.0);
        double min_angle = 180.0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                min_angle = std::min(min_angle, hsu::spectral_angle_deg(gen.col(i), gen.col(j)));
        if (min_angle > 20.0) break;
    }
    Matrix data(bands, n);
    for (int i = 0; i < n; ++i) {
        Vector v = gen.col(i % p);
        for (int b = 0; b < bands; ++b) v[b] *= 1.0 + 0.02 * rng.normal();
        data.col(i) = v;
    }
    Matrix rescaled = data;
    for (int i = 0; i < n; ++i) rescaled.col(i) *= rng.uniform(0.2, 5.0);

    const auto a = hsu::spherical_kmeans(cube_from(data), p, 31);
    const auto b = hsu::spherical_kmeans(cube_from(rescaled), p, 31);
    CHECK(a.labels == b.labels);
    CHECK((a.endmembers.data - b.endmembers.data).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("extraction results have pairwise-distinct columns") {
    hsu::Rng rng(49);
    Matrix data = random_positive(10, 80, rng);
    const auto km = hsu::spherical_kmeans(cube_from(data), 3, 1);
    CHECK_NOTHROW(km.validate());
    const auto vc = hsu::vca(cube_from(data), 3, 1);
    CHECK_NOTHROW(vc.validate());
}
