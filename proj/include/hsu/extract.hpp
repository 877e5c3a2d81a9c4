#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "hsu/geometry.hpp"
#include "hsu/parallel.hpp"
#include "hsu/rng.hpp"
#include "hsu/types.hpp"

namespace hsu {

struct ExtractionResult {
    EndmemberMatrix endmembers;
    std::vector<int> pixel_indices;      // VCA only: source pixel of each column
    std::vector<int> labels;             // k-means only: cluster per pixel, -1 = excluded
    std::vector<double> objective_trace; // k-means only: sum of cosines per iteration (best restart)
    std::vector<std::string> warnings;

    void validate() const {
        endmembers.validate();
        for (int i = 0; i < endmembers.count(); ++i)
            for (int j = i + 1; j < endmembers.count(); ++j)
                if (spectral_angle(endmembers.data.col(i), endmembers.data.col(j)) <= 1e-6)
                    throw std::invalid_argument("ExtractionResult: duplicate endmember columns");
    }
};

// Vertex component analysis with a perspective-projection step: pixels are
// mapped onto the hyperplane u'x = 1 (u = data mean), which turns conical
// data into a simplex whose vertices are data points. Selected endmembers
// are actual pixels of the input.
inline ExtractionResult vca(const SpectralCube& cube, int p, std::uint64_t seed) {
    cube.validate();
    const int bands = cube.bands();
    const int n = cube.pixels();
    if (p < 1 || p > std::min(bands, n))
        throw std::invalid_argument("vca: endmember count out of range");

    ExtractionResult result;
    const Vector u = cube.data.rowwise().mean();

    // projection onto u'x = 1; near-orthogonal pixels are dropped with a warning
    std::vector<int> usable;
    usable.reserve(n);
    Matrix projected(bands, n);
    for (int i = 0; i < n; ++i) {
        const double denom = cube.data.col(i).dot(u);
        if (std::abs(denom) <= kPerspectiveFloor) continue;
        projected.col(static_cast<int>(usable.size())) = cube.data.col(i) / denom;
        usable.push_back(i);
    }
    if (static_cast<int>(usable.size()) < p)
        throw NumericalError("vca: fewer than P usable pixels after projection");
    if (static_cast<int>(usable.size()) < n)
        result.warnings.push_back("vca: dropped " + std::to_string(n - usable.size()) +
                                  " pixels near-orthogonal to the mean");
    const int m = static_cast<int>(usable.size());
    const auto proj = projected.leftCols(m);

    // reduce to the top-P singular directions of the projected scatter
    const Matrix gram = (proj * proj.transpose()) / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    Matrix basis(bands, p);
    for (int j = 0; j < p; ++j) basis.col(j) = eig.eigenvectors().col(bands - 1 - j);
    const Matrix z = basis.transpose() * proj;  // P x m

    Rng rng(seed);
    std::vector<int> picked;  // indices into `usable`
    Matrix span(p, 0);
    for (int k = 0; k < p; ++k) {
        // random direction orthogonal to the span of selected endmembers
        Vector f(p);
        for (;;) {
            for (int j = 0; j < p; ++j) f[j] = rng.normal();
            if (span.cols() > 0) {
                Eigen::HouseholderQR<Matrix> qr(span);
                const Matrix q = qr.householderQ() * Matrix::Identity(p, span.cols());
                f -= q * (q.transpose() * f);
            }
            const double norm = f.norm();
            if (norm > 1e-12) {
                f /= norm;
                break;
            }
        }
        const Vector scores = (f.transpose() * z).cwiseAbs().transpose();
        int best = -1;
        double best_score = -1.0;
        for (int i = 0; i < m; ++i) {
            if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
            if (scores[i] > best_score) {
                best_score = scores[i];
                best = i;
            }
        }
        picked.push_back(best);
        span.conservativeResize(p, span.cols() + 1);
        span.col(span.cols() - 1) = z.col(best);
    }

    result.endmembers.data.resize(bands, p);
    result.pixel_indices.resize(p);
    for (int k = 0; k < p; ++k) {
        result.pixel_indices[k] = usable[picked[k]];
        result.endmembers.data.col(k) = cube.data.col(usable[picked[k]]);
    }
    result.endmembers.normalized = false;
    return result;
}

struct KmeansConfig {
    int max_iter = 300;
    int restarts = 5;
    int threads = 0;
};

namespace detail {

struct KmeansRun {
    Matrix centroids;        // L x P, unit columns
    std::vector<int> labels; // over usable pixels
    double objective = 0.0;  // sum of cosines to assigned centroids
    std::vector<double> objective_trace;
    int iterations = 0;
};

// One seeded k-means run over unit-normalized pixels (columns of `dirs`).
inline KmeansRun kmeans_once(const Matrix& dirs, int p, Rng rng, int max_iter, int threads) {
    const int bands = static_cast<int>(dirs.rows());
    const int m = static_cast<int>(dirs.cols());
    KmeansRun run;
    run.centroids.resize(bands, p);
    run.labels.assign(m, -1);

    // k-means++ adapted to angular distance: weight (1 - cos)^2
    std::vector<int> chosen;
    chosen.push_back(static_cast<int>(rng.below(m)));
    run.centroids.col(0) = dirs.col(chosen[0]);
    Vector best_cos = (run.centroids.col(0).transpose() * dirs).transpose();
    for (int k = 1; k < p; ++k) {
        Vector weight(m);
        for (int i = 0; i < m; ++i) {
            const double d = 1.0 - std::clamp(best_cos[i], -1.0, 1.0);
            weight[i] = d * d;
        }
        const double total = weight.sum();
        int pick;
        if (total <= 0.0) {
            pick = static_cast<int>(rng.below(m));  // all points coincide with a centroid
        } else {
            double target = rng.uniform() * total;
            pick = m - 1;
            for (int i = 0; i < m; ++i) {
                target -= weight[i];
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
        run.centroids.col(k) = dirs.col(pick);
        best_cos = best_cos.cwiseMax((run.centroids.col(k).transpose() * dirs).transpose());
    }

    int reseeds = 0;
    for (run.iterations = 1; run.iterations <= max_iter; ++run.iterations) {
        // assignment maximizes cosine similarity; ties break to the lower index
        const Matrix sims = run.centroids.transpose() * dirs;  // P x m
        std::vector<int> labels(m);
        parallel_for(m, threads, [&](int i) {
            int best = 0;
            double best_sim = sims(0, i);
            for (int k = 1; k < p; ++k)
                if (sims(k, i) > best_sim) {
                    best_sim = sims(k, i);
                    best = k;
                }
            labels[i] = best;
        });

        // empty clusters steal the pixel with the largest angle to their stale centroid
        for (int k = 0; k < p; ++k) {
            if (std::find(labels.begin(), labels.end(), k) != labels.end()) continue;
            if (++reseeds > 10)
                throw NumericalError("spherical_kmeans: empty-cluster reseeding did not settle");
            int worst = 0;
            double worst_sim = sims(k, 0);
            for (int i = 1; i < m; ++i)
                if (sims(k, i) < worst_sim) {
                    worst_sim = sims(k, i);
                    worst = i;
                }
            run.centroids.col(k) = dirs.col(worst);
            labels[worst] = k;
        }

        const bool unchanged = labels == run.labels;
        run.labels = std::move(labels);
        if (unchanged) break;

        // centroid = normalized mean of member directions, fixed summation order
        Matrix sums = Matrix::Zero(bands, p);
        for (int i = 0; i < m; ++i) sums.col(run.labels[i]) += dirs.col(i);
        for (int k = 0; k < p; ++k) {
            const double norm = sums.col(k).norm();
            if (norm > 0.0) run.centroids.col(k) = sums.col(k) / norm;
        }

        run.objective_trace.push_back(deterministic_sum(m, threads, [&](int i) {
            return run.centroids.col(run.labels[i]).dot(dirs.col(i));
        }));
    }

    run.objective = run.objective_trace.empty()
                        ? deterministic_sum(m, threads,
                                            [&](int i) {
                                                return run.centroids.col(run.labels[i]).dot(dirs.col(i));
                                            })
                        : run.objective_trace.back();
    return run;
}

}  // namespace detail

// Spherical k-means: clusters pixel directions by spectral angle. Pixels are
// unit-normalized up front so assignments and centroids are scale-free;
// zero-norm pixels are excluded (label -1). Output centroids are unit norm,
// columns sorted by descending cluster size (ties by first member index).
inline ExtractionResult spherical_kmeans(const SpectralCube& cube, int p, std::uint64_t seed,
                                         KmeansConfig cfg = {}) {
    cube.validate();
    const int bands = cube.bands();
    const int n = cube.pixels();
    if (p < 1 || p > n) throw std::invalid_argument("spherical_kmeans: cluster count out of range");

    std::vector<int> usable;
    usable.reserve(n);
    for (int i = 0; i < n; ++i)
        if (cube.data.col(i).norm() > 0.0) usable.push_back(i);
    const int m = static_cast<int>(usable.size());
    if (m < p) throw NumericalError("spherical_kmeans: fewer nonzero pixels than clusters");

    Matrix dirs(bands, m);
    for (int i = 0; i < m; ++i) dirs.col(i) = cube.data.col(usable[i]).normalized();

    detail::KmeansRun best;
    best.objective = -std::numeric_limits<double>::infinity();
    const int restarts = std::max(cfg.restarts, 1);
    for (int r = 0; r < restarts; ++r) {
        auto run = detail::kmeans_once(dirs, p, Rng::stream(seed, static_cast<std::uint64_t>(r)),
                                       cfg.max_iter, cfg.threads);
        if (run.objective > best.objective) best = std::move(run);
    }

    // canonical order: descending size, ties by first member pixel index
    std::vector<int> size(p, 0), first(p, n);
    for (int i = 0; i < m; ++i) {
        const int k = best.labels[i];
        ++size[k];
        first[k] = std::min(first[k], usable[i]);
    }
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (size[a] != size[b]) return size[a] > size[b];
        return first[a] < first[b];
    });
    std::vector<int> rank(p);
    for (int k = 0; k < p; ++k) rank[order[k]] = k;

    ExtractionResult result;
    result.endmembers.data.resize(bands, p);
    for (int k = 0; k < p; ++k) result.endmembers.data.col(k) = best.centroids.col(order[k]);
    result.endmembers.normalized = true;
    result.objective_trace = best.objective_trace;
    result.labels.assign(n, -1);
    for (int i = 0; i < m; ++i) result.labels[usable[i]] = rank[best.labels[i]];
    if (m < n)
        result.warnings.push_back("spherical_kmeans: excluded " + std::to_string(n - m) +
                                  " zero-norm pixels");
    return result;
}

}  // namespace hsu
