#pragma once

#include <Eigen/Cholesky>

#include <vector>

#include "hsu/types.hpp"

namespace hsu {

struct NnlsResult {
    Vector coefficients;
    bool converged = true;
    int iterations = 0;
};

// Nonnegative least squares min ||x - S phi||^2, phi >= 0, by Lawson-Hanson
// active sets on the normal equations: gram = S'S, rhs = S'x. Terminates at
// an exact KKT point (up to `tol` on the dual) for full-rank subproblems.
inline NnlsResult nnls_gram(const Matrix& gram, const Vector& rhs, int max_iter = 500) {
    const int p = static_cast<int>(gram.rows());
    NnlsResult result;
    result.coefficients = Vector::Zero(p);
    Vector& phi = result.coefficients;

    const double tol = 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
    std::vector<bool> passive(p, false);
    Vector w = rhs;  // negative gradient: rhs - gram * phi

    int iter = 0;
    while (iter < max_iter) {
        // most violated dual coordinate among the active (zero) set
        int j = -1;
        double wmax = tol;
        for (int i = 0; i < p; ++i) {
            if (!passive[i] && w[i] > wmax) {
                wmax = w[i];
                j = i;
            }
        }
        if (j < 0) break;  // KKT satisfied
        passive[j] = true;

        while (iter++ < max_iter) {
            // least squares restricted to the passive set
            std::vector<int> idx;
            for (int i = 0; i < p; ++i)
                if (passive[i]) idx.push_back(i);
            const int k = static_cast<int>(idx.size());
            Matrix sub(k, k);
            Vector b(k);
            for (int r = 0; r < k; ++r) {
                b[r] = rhs[idx[r]];
                for (int c = 0; c < k; ++c) sub(r, c) = gram(idx[r], idx[c]);
            }
            Vector z = sub.ldlt().solve(b);

            if (z.minCoeff() > 0.0) {
                phi.setZero();
                for (int r = 0; r < k; ++r) phi[idx[r]] = z[r];
                break;
            }
            // step back to the feasibility boundary, drop zeroed coordinates
            double alpha = 1.0;
            for (int r = 0; r < k; ++r) {
                if (z[r] <= 0.0) {
                    const double q = phi[idx[r]] / (phi[idx[r]] - z[r]);
                    alpha = std::min(alpha, q);
                }
            }
            for (int r = 0; r < k; ++r) {
                phi[idx[r]] += alpha * (z[r] - phi[idx[r]]);
                if (z[r] <= 0.0 && phi[idx[r]] <= 1e-14 * std::max(1.0, alpha)) {
                    phi[idx[r]] = 0.0;
                    passive[idx[r]] = false;
                }
            }
        }
        w.noalias() = rhs - gram * phi;
    }
    result.iterations = iter;
    result.converged = iter < max_iter;
    return result;
}

inline NnlsResult nnls(const EndmemberMatrix& s, Eigen::Ref<const Vector> x, int max_iter = 500) {
    if (s.data.rows() != x.size())
        throw std::invalid_argument("nnls: dimension mismatch");
    const Matrix gram = s.data.transpose() * s.data;
    const Vector rhs = s.data.transpose() * x;
    return nnls_gram(gram, rhs, max_iter);
}

}  // namespace hsu
