#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <string>
#include <vector>

#include "hsu/parallel.hpp"
#include "hsu/types.hpp"

namespace hsu {

struct NoiseEstimate {
    Matrix residuals;      // L x N regression residuals xi
    Vector band_variance;  // per-band mean squared residual
    std::vector<std::string> warnings;
};

struct IdEstimate {
    int dimension = 1;
    Vector noise_band_power;   // per-band noise variance estimates
    Vector eigen_signal_power; // eigenvalues of the denoised correlation, descending
};

namespace detail {

// LDLT solve of the (L-1)x(L-1) normal system. Rank-deficient systems
// (exactly collinear bands, N < L) get a rank-revealing minimum-norm
// solve, which reproduces exact fits that a ridge would blur; a
// trace-scaled ridge remains as the last resort.
inline Vector solve_regression(const Matrix& normal, const Vector& rhs, bool& fallback) {
    Eigen::LDLT<Matrix> ldlt(normal);
    bool bad = ldlt.info() != Eigen::Success;
    if (!bad) {
        const Vector d = ldlt.vectorD();
        const double dmax = d.maxCoeff();
        const double dmin = d.minCoeff();
        bad = !(dmin > 0.0) || dmax / dmin > 1e12;
    }
    if (!bad) {
        fallback = false;
        return ldlt.solve(rhs);
    }
    fallback = true;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(normal);
    Vector beta = cod.solve(rhs);
    if (beta.allFinite()) return beta;
    const double ridge = 1e-6 * normal.trace() / static_cast<double>(normal.rows());
    Matrix reg = normal;
    reg.diagonal().array() += ridge;
    return reg.ldlt().solve(rhs);
}

}  // namespace detail

// Multiple-regression noise estimation: each band is regressed on all the
// others and the residual is the per-band noise estimate.
inline NoiseEstimate estimate_noise(const SpectralCube& cube, int threads = 0) {
    cube.validate();
    const int bands = cube.bands();
    const int n = cube.pixels();
    if (bands < 2) throw std::invalid_argument("estimate_noise: need at least 2 bands");

    NoiseEstimate est;
    if (n <= bands)
        est.warnings.push_back("estimate_noise: N <= L, regression is underdetermined; ridge applied");

    const Matrix gram = cube.data * cube.data.transpose();  // L x L
    est.residuals.resize(bands, n);
    est.band_variance.resize(bands);
    std::vector<char> ridge_used(bands, 0);

    parallel_for(bands, threads, [&](int i) {
        // normal system over the other L-1 bands
        Matrix sub(bands - 1, bands - 1);
        Vector rhs(bands - 1);
        for (int r = 0, rr = 0; r < bands; ++r) {
            if (r == i) continue;
            rhs[rr] = gram(r, i);
            for (int c = 0, cc = 0; c < bands; ++c) {
                if (c == i) continue;
                sub(rr, cc) = gram(r, c);
                ++cc;
            }
            ++rr;
        }
        bool fallback = false;
        const Vector beta = detail::solve_regression(sub, rhs, fallback);
        ridge_used[i] = fallback ? 1 : 0;

        // residual row = (e_i - beta_full)' X, without materializing X_{-i}
        Vector coeff = Vector::Zero(bands);
        coeff[i] = 1.0;
        for (int r = 0, rr = 0; r < bands; ++r) {
            if (r == i) continue;
            coeff[r] = -beta[rr++];
        }
        est.residuals.row(i).noalias() = coeff.transpose() * cube.data;
        est.band_variance[i] = est.residuals.row(i).squaredNorm() / static_cast<double>(n);
    });

    for (int i = 0; i < bands; ++i)
        if (ridge_used[i]) {
            est.warnings.push_back("estimate_noise: rank-deficient regression, fallback solver used");
            break;
        }
    return est;
}

// Signal-subspace dimension: eigen-decompose the correlation of the
// denoised signal and keep directions whose power exceeds twice the noise
// power projected on them. A relative floor guards the noiseless case,
// where stray eigenvalues of a numerically rank-d Gram matrix would
// otherwise all pass the 2x test.
inline IdEstimate estimate_id(const SpectralCube& cube, int threads = 0) {
    const NoiseEstimate noise = estimate_noise(cube, threads);
    const int bands = cube.bands();
    const double n = static_cast<double>(cube.pixels());

    const Matrix signal = cube.data - noise.residuals;
    const Matrix corr_signal = (signal * signal.transpose()) / n;
    const Matrix corr_noise = (noise.residuals * noise.residuals.transpose()) / n;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(corr_signal);
    if (eig.info() != Eigen::Success)
        throw NumericalError("estimate_id: eigendecomposition failed");

    IdEstimate est;
    est.noise_band_power = noise.band_variance;
    est.eigen_signal_power.resize(bands);

    const double lambda_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double floor = 1e-12 * lambda_max;
    int selected = 0;
    for (int i = 0; i < bands; ++i) {
        const int src = bands - 1 - i;  // Eigen sorts ascending
        const double lambda = eig.eigenvalues()[src];
        est.eigen_signal_power[i] = lambda;
        const Vector dir = eig.eigenvectors().col(src);
        const double projected_noise = dir.dot(corr_noise * dir);
        if (lambda > std::max(2.0 * projected_noise, floor)) ++selected;
    }
    est.dimension = std::max(selected, 1);
    return est;
}

}  // namespace hsu
