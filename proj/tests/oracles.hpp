// Independent brute-force oracles used to freeze expected values. These
// stay deliberately naive (exhaustive enumeration, triple loops) and share
// no code with the implementation paths they check.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "hsu/types.hpp"

namespace oracle {

using hsu::Matrix;
using hsu::Vector;

// Projection onto the unit simplex by KKT active-set enumeration: try every
// nonempty support, keep the candidate satisfying all KKT conditions.
inline Vector simplex_projection(const Vector& v) {
    const int p = static_cast<int>(v.size());
    for (unsigned mask = 1; mask < (1u << p); ++mask) {
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < p; ++i)
            if (mask & (1u << i)) {
                sum += v[i];
                ++count;
            }
        const double tau = (sum - 1.0) / count;
        bool ok = true;
        Vector a = Vector::Zero(p);
        for (int i = 0; i < p && ok; ++i) {
            if (mask & (1u << i)) {
                a[i] = v[i] - tau;
                if (a[i] < -1e-12) ok = false;
            } else if (v[i] - tau > 1e-12) {
                ok = false;  // dual feasibility
            }
        }
        if (ok) return a;
    }
    throw std::logic_error("simplex_projection oracle: no KKT point found");
}

// NNLS by support enumeration: solve unconstrained LS on every support,
// keep KKT-feasible candidates, return the one with the lowest objective.
inline Vector nnls(const Matrix& s, const Vector& x) {
    const int p = static_cast<int>(s.cols());
    Vector best = Vector::Zero(p);
    double best_obj = x.squaredNorm();  // empty support
    {
        const Vector g = -s.transpose() * x;
        bool kkt = true;
        for (int i = 0; i < p; ++i)
            if (g[i] < -1e-10) kkt = false;
        if (kkt) return best;
    }
    for (unsigned mask = 1; mask < (1u << p); ++mask) {
        std::vector<int> idx;
        for (int i = 0; i < p; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        Matrix sub(s.rows(), idx.size());
        for (size_t c = 0; c < idx.size(); ++c) sub.col(c) = s.col(idx[c]);
        const Vector z = sub.colPivHouseholderQr().solve(x);
        if (z.minCoeff() < -1e-12) continue;
        Vector phi = Vector::Zero(p);
        for (size_t c = 0; c < idx.size(); ++c) phi[idx[c]] = std::max(z[c], 0.0);
        const Vector g = s.transpose() * (s * phi - x);
        bool kkt = true;
        for (int i = 0; i < p; ++i)
            if (phi[i] == 0.0 && g[i] < -1e-8) kkt = false;
        if (!kkt) continue;
        const double obj = (x - s * phi).squaredNorm();
        if (obj < best_obj) {
            best_obj = obj;
            best = phi;
        }
    }
    return best;
}

// min ||y - B a||^2 over the unit simplex, by support enumeration with an
// equality-constrained KKT solve per support. Returns the best feasible
// candidate (lowest objective).
inline Vector simplex_least_squares(const Matrix& b, const Vector& y) {
    const int p = static_cast<int>(b.cols());
    Vector best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << p); ++mask) {
        std::vector<int> idx;
        for (int i = 0; i < p; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        const int k = static_cast<int>(idx.size());
        Matrix sub(b.rows(), k);
        for (int c = 0; c < k; ++c) sub.col(c) = b.col(idx[c]);
        Matrix kkt = Matrix::Zero(k + 1, k + 1);
        kkt.topLeftCorner(k, k) = sub.transpose() * sub;
        kkt.topRightCorner(k, 1).setOnes();
        kkt.bottomLeftCorner(1, k).setOnes();
        Vector rhs(k + 1);
        rhs.head(k) = sub.transpose() * y;
        rhs[k] = 1.0;
        const Vector sol = kkt.fullPivLu().solve(rhs);
        if (!sol.allFinite()) continue;
        if (sol.head(k).minCoeff() < -1e-12) continue;
        Vector a = Vector::Zero(p);
        for (int c = 0; c < k; ++c) a[idx[c]] = std::max(sol[c], 0.0);
        const double obj = (y - b * a).squaredNorm();
        if (obj < best_obj) {
            best_obj = obj;
            best = a;
        }
    }
    return best;
}

// Entrywise triple-loop reconstruction, the naive summation oracle.
inline Matrix reconstruct(const std::vector<Matrix>& stack, const Matrix& abundances) {
    const int bands = static_cast<int>(stack[0].rows());
    const int n = static_cast<int>(stack.size());
    const int p = static_cast<int>(abundances.rows());
    Matrix out = Matrix::Zero(bands, n);
    for (int i = 0; i < n; ++i)
        for (int b = 0; b < bands; ++b)
            for (int j = 0; j < p; ++j) out(b, i) += stack[i](b, j) * abundances(j, i);
    return out;
}

// Numerical rank at a relative singular-value threshold.
inline int numerical_rank(const Matrix& m, double rel_tol = 1e-8) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] <= 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > rel_tol * sv[0]) ++rank;
    return rank;
}

}  // namespace oracle
