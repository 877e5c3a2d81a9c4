#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "hsu/geometry.hpp"
#include "hsu/solvers.hpp"
#include "hsu/types.hpp"

namespace hsu {

// Permutation aligning estimated classes to true classes: perm[j] is the
// estimated column matching true class j, minimizing the total SAM.
// Exhaustive search for P <= 8, greedy matching above.
inline std::vector<int> align_classes(const EndmemberMatrix& est, const EndmemberMatrix& truth) {
    const int p = truth.count();
    if (est.count() != p) throw std::invalid_argument("align_classes: class count mismatch");
    Matrix cost(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) cost(i, j) = spectral_angle(est.data.col(i), truth.data.col(j));

    std::vector<int> best(p);
    if (p <= 8) {
        std::vector<int> perm(p);
        std::iota(perm.begin(), perm.end(), 0);
        double best_total = std::numeric_limits<double>::infinity();
        do {
            double total = 0.0;
            for (int j = 0; j < p; ++j) total += cost(perm[j], j);
            if (total < best_total) {
                best_total = total;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }

    std::vector<bool> est_used(p, false), true_used(p, false);
    for (int round = 0; round < p; ++round) {
        double lowest = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int i = 0; i < p; ++i) {
            if (est_used[i]) continue;
            for (int j = 0; j < p; ++j) {
                if (true_used[j]) continue;
                if (cost(i, j) < lowest) {
                    lowest = cost(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        best[bj] = bi;
        est_used[bi] = true;
        true_used[bj] = true;
    }
    return best;
}

inline Matrix permute_rows(const Matrix& m, const std::vector<int>& perm) {
    Matrix out(m.rows(), m.cols());
    for (int j = 0; j < static_cast<int>(perm.size()); ++j) out.row(j) = m.row(perm[j]);
    return out;
}

inline Matrix permute_cols(const Matrix& m, const std::vector<int>& perm) {
    Matrix out(m.rows(), m.cols());
    for (int j = 0; j < static_cast<int>(perm.size()); ++j) out.col(j) = m.col(perm[j]);
    return out;
}

// Abundance RMSE: 1/(N sqrt(P)) * sum_n ||a_est_n - a_true_n||_2.
// Classes must be aligned first.
inline double armse(const AbundanceMatrix& est, const AbundanceMatrix& truth) {
    if (est.data.rows() != truth.data.rows() || est.data.cols() != truth.data.cols())
        throw std::invalid_argument("armse: shape mismatch");
    const int n = static_cast<int>(truth.data.cols());
    const int p = static_cast<int>(truth.data.rows());
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += (est.data.col(i) - truth.data.col(i)).norm();
    return total / (static_cast<double>(n) * std::sqrt(static_cast<double>(p)));
}

// Mean spectral angle over all (pixel, class) pairs, in degrees. Pairs with
// a zero column on either side are skipped and counted.
inline double mean_sam_deg(const LocalEndmemberStack& est, const LocalEndmemberStack& truth,
                           int* skipped = nullptr) {
    if (est.pixels() != truth.pixels()) throw std::invalid_argument("mean_sam_deg: pixel count mismatch");
    double total = 0.0;
    long count = 0;
    long skip = 0;
    for (int i = 0; i < truth.pixels(); ++i) {
        const Matrix& a = est.stack[i];
        const Matrix& b = truth.stack[i];
        if (a.rows() != b.rows() || a.cols() != b.cols())
            throw std::invalid_argument("mean_sam_deg: stack shape mismatch");
        for (int j = 0; j < a.cols(); ++j) {
            if (a.col(j).norm() == 0.0 || b.col(j).norm() == 0.0) {
                ++skip;
                continue;
            }
            total += spectral_angle(a.col(j), b.col(j));
            ++count;
        }
    }
    if (skipped) *skipped = static_cast<int>(skip);
    if (count == 0) return 0.0;
    return (total / count) * (180.0 / 3.14159265358979323846);
}

struct EvalReport {
    double armse = 0.0;
    double mean_sam_deg = 0.0;
    double recon_rmse = 0.0;
    std::vector<int> permutation;
};

// Aligns the estimate to the ground truth once (from the final reference
// endmembers) and applies the same relabeling to abundances and locals.
inline EvalReport evaluate_unmix(const UnmixResult& est, const AbundanceMatrix& true_abundances,
                                 const LocalEndmemberStack& true_locals,
                                 const EndmemberMatrix& true_references, const SpectralCube& observed) {
    EvalReport report;
    report.permutation = align_classes(est.references, true_references);

    AbundanceMatrix aligned_a(permute_rows(est.abundances.data, report.permutation));
    report.armse = armse(aligned_a, true_abundances);

    LocalEndmemberStack aligned_locals;
    aligned_locals.stack.resize(est.locals.stack.size());
    for (size_t i = 0; i < est.locals.stack.size(); ++i)
        aligned_locals.stack[i] = permute_cols(est.locals.stack[i], report.permutation);
    report.mean_sam_deg = mean_sam_deg(aligned_locals, true_locals);

    double sq = 0.0;
    for (int i = 0; i < observed.pixels(); ++i)
        sq += (observed.data.col(i) - est.locals.stack[i] * est.abundances.data.col(i)).squaredNorm();
    report.recon_rmse = std::sqrt(sq / (static_cast<double>(observed.bands()) * observed.pixels()));
    return report;
}

}  // namespace hsu
