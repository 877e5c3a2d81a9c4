#pragma once

#include <cmath>
#include <functional>

#include "hsu/types.hpp"

namespace hsu {

// V = P*I - 11'; tr(S0 V S0') equals the sum of pairwise squared distances
// between the columns of S0.
inline Matrix volume_matrix(int p) {
    return static_cast<double>(p) * Matrix::Identity(p, p) - Matrix::Ones(p, p);
}

inline double pairwise_sq_distance_sum(const Matrix& s0) {
    double total = 0.0;
    for (int i = 0; i < s0.cols(); ++i)
        for (int j = i + 1; j < s0.cols(); ++j) total += (s0.col(i) - s0.col(j)).squaredNorm();
    return total;
}

// Tangent projection on the oblique manifold: per column, remove the radial
// component. Assumes unit-norm columns of `point`.
inline Matrix oblique_tangent_project(const Matrix& point, const Matrix& ambient) {
    Matrix out = ambient;
    for (int p = 0; p < point.cols(); ++p)
        out.col(p) -= point.col(p).dot(ambient.col(p)) * point.col(p);
    return out;
}

// Retraction: column-wise renormalization of point + tangent.
inline Matrix oblique_retract(const Matrix& point, const Matrix& tangent) {
    Matrix out = point + tangent;
    for (int p = 0; p < out.cols(); ++p) {
        const double norm = out.col(p).norm();
        if (!(norm > 0.0)) throw NumericalError("oblique_retract: column collapsed to zero");
        out.col(p) /= norm;
    }
    return out;
}

// Smooth objective on the oblique manifold, supplied as value + Euclidean
// gradient; the Riemannian gradient is the tangent projection of the latter.
struct ObliqueObjective {
    std::function<double(const Matrix&)> value;
    std::function<Matrix(const Matrix&)> euclidean_gradient;
};

inline Matrix riemannian_gradient(const ObliqueObjective& objective, const Matrix& point) {
    return oblique_tangent_project(point, objective.euclidean_gradient(point));
}

// The RELMM S0 subproblem
//   f(S0) = lambda_s/2 * sum_n ||S_n - S0 Psi_n||_F^2 + lambda_s0/2 * tr(S0 V S0')
// collapsed over pixels: with D = sum_n Psi_n^2 (diagonal, as a vector),
// M = sum_n S_n Psi_n and c0 = sum_n ||S_n||_F^2,
//   f(S0) = lambda_s/2 * (c0 - 2 tr(S0'M) + sum_p D_p ||s0_p||^2) + lambda_s0/2 * tr(S0 V S0')
// so the cost per evaluation is independent of N.
struct S0Objective {
    Matrix m;        // L x P
    Vector d;        // length P, diagonal of sum_n Psi_n^2
    double c0 = 0.0; // sum_n ||S_n||_F^2
    double lambda_s = 0.0;
    double lambda_s0 = 0.0;
    Matrix v;        // P x P volume matrix

    double value(const Matrix& s0) const {
        double fit = c0 - 2.0 * (s0.array() * m.array()).sum();
        for (int p = 0; p < s0.cols(); ++p) fit += d[p] * s0.col(p).squaredNorm();
        const double volume = (s0 * v).cwiseProduct(s0).sum();
        return 0.5 * lambda_s * fit + 0.5 * lambda_s0 * volume;
    }

    Matrix euclidean_gradient(const Matrix& s0) const {
        Matrix g = lambda_s * (s0 * d.asDiagonal() - m);
        g.noalias() += lambda_s0 * (s0 * v);
        return g;
    }

    ObliqueObjective as_objective() const {
        return ObliqueObjective{
            [this](const Matrix& s0) { return value(s0); },
            [this](const Matrix& s0) { return euclidean_gradient(s0); },
        };
    }
};

struct ObliqueCgResult {
    Matrix point;
    double value = 0.0;
    int iterations = 0;
    bool stalled = false;
};

// Riemannian conjugate gradient on the oblique manifold: Hestenes-Stiefel
// directions with projection-based vector transport, Armijo backtracking,
// restart on lost conjugacy / non-descent and every P*L iterations. Falls
// back to a plain gradient step when the line search fails; if that fails
// too, returns the current point with the stalled flag set.
inline ObliqueCgResult oblique_cg_step(const EndmemberMatrix& s0, const ObliqueObjective& objective,
                                       int max_iter = 100, double grad_tol = 1e-8) {
    if (!s0.normalized)
        throw std::invalid_argument("oblique_cg_step: S0 must carry the normalized flag");

    ObliqueCgResult result;
    Matrix x = s0.data;
    const int restart_period = static_cast<int>(x.rows() * x.cols());

    double fx = objective.value(x);
    Matrix grad = oblique_tangent_project(x, objective.euclidean_gradient(x));
    Matrix dir = -grad;
    const double tol = grad_tol * std::max(1.0, grad.norm());
    double step_hint = 1.0;

    constexpr double kArmijo = 1e-4;
    for (int it = 0; it < max_iter; ++it) {
        const double gnorm = grad.norm();
        if (gnorm <= tol) break;

        double slope = (dir.array() * grad.array()).sum();
        if (!(slope < 0.0)) {  // lost descent: restart with steepest descent
            dir = -grad;
            slope = -gnorm * gnorm;
        }

        // Armijo backtracking, gradient fallback on failure
        double step = step_hint;
        Matrix candidate;
        double fc = fx;
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            for (int halvings = 0; halvings < 40; ++halvings) {
                candidate = oblique_retract(x, step * dir);
                fc = objective.value(candidate);
                if (fc <= fx + kArmijo * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted && attempt == 0) {
                dir = -grad;
                slope = -gnorm * gnorm;
                step = step_hint;
            }
        }
        if (!accepted) {
            result.stalled = true;
            break;
        }

        const Matrix grad_new = oblique_tangent_project(candidate, objective.euclidean_gradient(candidate));
        // Hestenes-Stiefel with projection transport
        const Matrix grad_old_t = oblique_tangent_project(candidate, grad);
        const Matrix dir_t = oblique_tangent_project(candidate, dir);
        const Matrix y = grad_new - grad_old_t;
        const double denom = (dir_t.array() * y.array()).sum();
        double beta = 0.0;
        if (std::abs(denom) > 1e-30) beta = (grad_new.array() * y.array()).sum() / denom;
        if (!std::isfinite(beta) || (it + 1) % restart_period == 0) beta = 0.0;

        x = candidate;
        fx = fc;
        grad = grad_new;
        dir = -grad + beta * dir_t;
        if (!((dir.array() * grad.array()).sum() < 0.0)) dir = -grad;
        step_hint = std::min(step * 2.0, 1e6);
        result.iterations = it + 1;
    }

    if (!std::isfinite(fx)) throw NumericalError("oblique_cg_step: non-finite objective");
    result.point = std::move(x);
    result.value = fx;
    return result;
}

}  // namespace hsu
