#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

#include "hsu/nnls.hpp"
#include "hsu/oblique.hpp"
#include "hsu/parallel.hpp"
#include "hsu/simplex.hpp"
#include "hsu/types.hpp"

namespace hsu {

struct SolverConfig {
    double lambda_s = 0.0;   // local-endmember tether weight (ELMM/RELMM, > 0)
    double lambda_s0 = 0.0;  // volume regularization weight (RELMM)
    double epsilon = 1e-3;   // outer convergence: relative change of every block
    int max_outer_iter = 200;
    int max_inner_iter = 500;
    double psi_floor = 1e-8;
    std::uint64_t seed = 0;
    int threads = 0;             // 0 = hardware concurrency
    bool unnormalized_s0 = false;  // RELMM: closed-form S0 update, no oblique constraint
    int s0_cg_max_iter = 50;     // CG budget per RELMM outer iteration

    void validate(bool needs_lambda_s) const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("SolverConfig: epsilon must be positive");
        if (!(psi_floor > 0.0)) throw std::invalid_argument("SolverConfig: psi_floor must be positive");
        if (needs_lambda_s && !(lambda_s > 0.0))
            throw std::invalid_argument("SolverConfig: lambda_s must be positive for ELMM/RELMM");
        if (lambda_s < 0.0 || lambda_s0 < 0.0)
            throw std::invalid_argument("SolverConfig: negative regularization weight");
    }
};

struct UnmixResult {
    AbundanceMatrix abundances;
    ScalingMatrix scalings;
    EndmemberMatrix references;
    LocalEndmemberStack locals;
    std::vector<double> objective_trace;  // [initial, after iter 1, after iter 2, ...]
    double reconstruction_rmse = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<int> flagged_pixels;
};

namespace detail {

// Projected gradient on the unit simplex for 1/2 ||x - S a||^2 given the
// Gram form (G = S'S, b = S'x). Fixed step 1/lambda_max(G) keeps every
// iterate a descent point. Returns false if the tolerance was not met.
inline bool simplex_pgd(const Matrix& gram, const Vector& rhs, double lipschitz, Vector& a,
                        double tol, int max_iter, std::vector<double>& scratch) {
    const double step = 1.0 / lipschitz;
    const int p = static_cast<int>(a.size());
    Vector next(p);
    for (int it = 0; it < max_iter; ++it) {
        next = a - step * (gram * a - rhs);
        project_simplex_inplace(next.data(), p, scratch);
        const double change = (next - a).norm();
        const double scale = std::max(a.norm(), 1e-30);
        a = next;
        if (change / scale < tol) return true;
    }
    return false;
}

inline double spectral_radius(const Matrix& gram) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    // tiny inflation so 1/lambda_max stays a safe gradient step under rounding
    return std::max(eig.eigenvalues().maxCoeff(), 1e-30) * (1.0 + 1e-10);
}

inline double stack_sq_norm(const LocalEndmemberStack& stack, int threads) {
    return deterministic_sum(stack.pixels(), threads,
                             [&](int n) { return stack.stack[n].squaredNorm(); });
}

inline double stack_sq_diff(const LocalEndmemberStack& a, const LocalEndmemberStack& b, int threads) {
    return deterministic_sum(a.pixels(), threads,
                             [&](int n) { return (a.stack[n] - b.stack[n]).squaredNorm(); });
}

inline double relative_change(double diff_norm, double old_norm) {
    return diff_norm / std::max(old_norm, 1e-30);
}

}  // namespace detail

// Fully constrained least squares: per pixel, min ||x_n - S a_n||^2 over the
// unit simplex by projected gradient with step 1/sigma_max(S'S).
inline UnmixResult fclsu(const SpectralCube& cube, const EndmemberMatrix& s, SolverConfig cfg = {}) {
    cube.validate();
    s.validate();
    cfg.validate(false);
    const int p = s.count();
    const int n = cube.pixels();
    if (p > cube.bands()) throw std::invalid_argument("fclsu: more endmembers than bands");
    if (s.bands() != cube.bands()) throw std::invalid_argument("fclsu: band count mismatch");

    const Matrix gram = s.data.transpose() * s.data;
    const double lipschitz = detail::spectral_radius(gram);
    const double tol = cfg.epsilon * 1e-2;

    UnmixResult result;
    result.abundances.data.resize(p, n);
    std::vector<char> failed(n, 0);
    parallel_for(n, cfg.threads, [&](int i) {
        std::vector<double> scratch;
        Vector a = Vector::Constant(p, 1.0 / p);
        const Vector rhs = s.data.transpose() * cube.data.col(i);
        if (!detail::simplex_pgd(gram, rhs, lipschitz, a, tol, cfg.max_inner_iter, scratch))
            failed[i] = 1;
        result.abundances.data.col(i) = a;
    });
    for (int i = 0; i < n; ++i)
        if (failed[i]) result.flagged_pixels.push_back(i);

    result.scalings.data = Matrix::Ones(p, n);
    result.references = s;
    result.locals.stack.assign(n, s.data);
    const double sq_err = deterministic_sum(n, cfg.threads, [&](int i) {
        return (cube.data.col(i) - s.data * result.abundances.data.col(i)).squaredNorm();
    });
    result.reconstruction_rmse = std::sqrt(sq_err / (static_cast<double>(cube.bands()) * n));
    result.objective_trace = {0.5 * sq_err};
    result.iterations = 1;
    result.converged = result.flagged_pixels.empty();
    return result;
}

// Scaled constrained least squares: per pixel, phi = nnls(S0, x), a single
// scaling psi_n = sum(phi) shared by all endmembers, a_n = phi / psi_n.
// Pixels with psi below the floor (shadows, zero pixels) are flagged and
// given uniform abundances.
inline UnmixResult sclsu(const SpectralCube& cube, const EndmemberMatrix& s0, SolverConfig cfg = {}) {
    cube.validate();
    s0.validate();
    cfg.validate(false);
    const int p = s0.count();
    const int n = cube.pixels();
    if (p > cube.bands()) throw std::invalid_argument("sclsu: more endmembers than bands");
    if (s0.bands() != cube.bands()) throw std::invalid_argument("sclsu: band count mismatch");

    const Matrix gram = s0.data.transpose() * s0.data;

    UnmixResult result;
    result.abundances.data.resize(p, n);
    result.scalings.data.resize(p, n);
    result.locals.stack.assign(n, Matrix());
    std::vector<char> flagged(n, 0);
    parallel_for(n, cfg.threads, [&](int i) {
        const Vector rhs = s0.data.transpose() * cube.data.col(i);
        auto sol = nnls_gram(gram, rhs, cfg.max_inner_iter);
        const double psi = sol.coefficients.sum();
        if (!sol.converged || psi < cfg.psi_floor) {
            flagged[i] = 1;
            result.abundances.data.col(i).setConstant(1.0 / p);
            result.scalings.data.col(i).setConstant(cfg.psi_floor);
            result.locals.stack[i] = cfg.psi_floor * s0.data;
        } else {
            result.abundances.data.col(i) = sol.coefficients / psi;
            result.scalings.data.col(i).setConstant(psi);
            result.locals.stack[i] = psi * s0.data;
        }
    });
    for (int i = 0; i < n; ++i)
        if (flagged[i]) result.flagged_pixels.push_back(i);

    result.references = s0;
    const double sq_err = deterministic_sum(n, cfg.threads, [&](int i) {
        const Vector phi = result.abundances.data.col(i).cwiseProduct(result.scalings.data.col(i));
        return (cube.data.col(i) - s0.data * phi).squaredNorm();
    });
    result.reconstruction_rmse = std::sqrt(sq_err / (static_cast<double>(cube.bands()) * n));
    result.objective_trace = {0.5 * sq_err};
    result.iterations = 1;
    result.converged = true;
    return result;
}

namespace detail {

struct BlockChanges {
    double locals = 0.0, abundances = 0.0, scalings = 0.0, references = 0.0;
    bool all_below(double eps) const {
        return locals < eps && abundances < eps && scalings < eps && references < eps;
    }
};

struct ElmmState {
    Matrix a;    // P x N
    Matrix psi;  // P x N
    LocalEndmemberStack locals;
};

// One pass of the per-pixel blocks shared by ELMM and RELMM:
//   A:   projected gradient on 1/2 ||x_n - S_n a_n||^2 over the simplex
//   Psi: psi_pn = s0_p' s_np / ||s0_p||^2, floored
//   S_n: (x_n a_n' + lambda_s S0 Psi_n)(a_n a_n' + lambda_s I)^{-1}
// `order_s_first` selects the RELMM block order (S_n before {A, Psi}).
inline void elmm_blocks(const SpectralCube& cube, const Matrix& s0, const SolverConfig& cfg,
                        bool order_s_first, ElmmState& state) {
    const int n = cube.pixels();
    const int p = static_cast<int>(s0.cols());
    const double tol = cfg.epsilon * 1e-2;
    Vector s0_sq(p);
    for (int j = 0; j < p; ++j) s0_sq[j] = s0.col(j).squaredNorm();

    constexpr int kChunk = 256;
    const int chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, cfg.threads, [&](int c) {
        std::vector<double> scratch;
        Matrix rhs_s(cube.bands(), p);
        Matrix gram_k(p, p);
        const int lo = c * kChunk;
        const int hi = std::min(n, lo + kChunk);
        for (int i = lo; i < hi; ++i) {
            Matrix& local = state.locals.stack[i];
            Vector a = state.a.col(i);

            auto update_a = [&] {
                const Matrix gram = local.transpose() * local;
                const Vector rhs = local.transpose() * cube.data.col(i);
                simplex_pgd(gram, rhs, spectral_radius(gram), a, tol, cfg.max_inner_iter, scratch);
                state.a.col(i) = a;
            };
            auto update_psi = [&] {
                for (int j = 0; j < p; ++j)
                    state.psi(j, i) = std::max(s0.col(j).dot(local.col(j)) / s0_sq[j], cfg.psi_floor);
            };
            auto update_s = [&] {
                rhs_s.noalias() = cube.data.col(i) * a.transpose();
                rhs_s.noalias() += cfg.lambda_s * s0 * state.psi.col(i).asDiagonal();
                gram_k.noalias() = a * a.transpose();
                gram_k.diagonal().array() += cfg.lambda_s;
                local = gram_k.llt().solve(rhs_s.transpose()).transpose();
            };

            if (order_s_first) {
                update_s();
                update_a();
                update_psi();
            } else {
                update_a();
                update_psi();
                update_s();
            }
        }
    });
}

inline double elmm_fidelity(const SpectralCube& cube, const Matrix& s0, const ElmmState& state,
                            double lambda_s, int threads) {
    return deterministic_sum(cube.pixels(), threads, [&](int i) {
        const Matrix& local = state.locals.stack[i];
        const double fit = (cube.data.col(i) - local * state.a.col(i)).squaredNorm();
        const double tether = (local - s0 * state.psi.col(i).asDiagonal()).squaredNorm();
        return 0.5 * (fit + lambda_s * tether);
    });
}

}  // namespace detail

// Extended linear mixing model: block-coordinate descent over {A}, {Psi},
// {S_n} with the references fixed, minimizing
//   1/2 sum_n ( ||x_n - S_n a_n||^2 + lambda_s ||S_n - S0 Psi_n||_F^2 ).
// `init` supplies the starting abundances and scalings (typically SCLSU).
inline UnmixResult elmm(const SpectralCube& cube, const EndmemberMatrix& s0, SolverConfig cfg,
                        const UnmixResult& init) {
    cube.validate();
    s0.validate();
    cfg.validate(true);
    const int n = cube.pixels();
    const int p = s0.count();
    if (init.abundances.data.cols() != n || init.abundances.data.rows() != p)
        throw std::invalid_argument("elmm: init abundance shape mismatch");

    detail::ElmmState state;
    state.a = init.abundances.data;
    state.psi = init.scalings.data.cwiseMax(cfg.psi_floor);
    state.locals.stack.assign(n, Matrix());
    parallel_for(n, cfg.threads, [&](int i) {
        state.locals.stack[i] = s0.data * state.psi.col(i).asDiagonal();
    });

    UnmixResult result;
    result.objective_trace.push_back(
        detail::elmm_fidelity(cube, s0.data, state, cfg.lambda_s, cfg.threads));

    for (int outer = 1; outer <= cfg.max_outer_iter; ++outer) {
        const Matrix a_old = state.a;
        const Matrix psi_old = state.psi;
        const LocalEndmemberStack locals_old = state.locals;

        detail::elmm_blocks(cube, s0.data, cfg, /*order_s_first=*/false, state);

        const double objective =
            detail::elmm_fidelity(cube, s0.data, state, cfg.lambda_s, cfg.threads);
        if (!std::isfinite(objective)) throw NumericalError("elmm: non-finite objective");
        result.objective_trace.push_back(objective);
        result.iterations = outer;

        detail::BlockChanges change;
        change.abundances = detail::relative_change((state.a - a_old).norm(), a_old.norm());
        change.scalings = detail::relative_change((state.psi - psi_old).norm(), psi_old.norm());
        change.locals = detail::relative_change(
            std::sqrt(detail::stack_sq_diff(state.locals, locals_old, cfg.threads)),
            std::sqrt(detail::stack_sq_norm(locals_old, cfg.threads)));
        if (change.all_below(cfg.epsilon)) {
            result.converged = true;
            break;
        }
    }

    result.abundances.data = std::move(state.a);
    result.scalings.data = std::move(state.psi);
    result.references = s0;
    result.locals = std::move(state.locals);
    const double sq_err = deterministic_sum(n, cfg.threads, [&](int i) {
        return (cube.data.col(i) - result.locals.stack[i] * result.abundances.data.col(i)).squaredNorm();
    });
    result.reconstruction_rmse = std::sqrt(sq_err / (static_cast<double>(cube.bands()) * n));
    return result;
}

// Robust ELMM: 3-block BCD over {S_n}, {A, Psi} and S0, where S0 carries a
// pairwise-distance volume penalty and lives on the oblique manifold
// (Riemannian CG), or is updated in closed form when `unnormalized_s0`.
inline UnmixResult relmm(const SpectralCube& cube, const EndmemberMatrix& s0_init, SolverConfig cfg) {
    cube.validate();
    s0_init.validate();
    cfg.validate(true);
    const int n = cube.pixels();
    const int p = s0_init.count();

    // Always renormalize the init: positive column scalings of S0_init then
    // reduce to the same starting point.
    EndmemberMatrix s0 = s0_init.unit_normalized();
    const Matrix volume = volume_matrix(p);

    // init: SCLSU against the normalized references
    const UnmixResult init = sclsu(cube, s0, cfg);
    detail::ElmmState state;
    state.a = init.abundances.data;
    state.psi = init.scalings.data.cwiseMax(cfg.psi_floor);
    state.locals.stack.assign(n, Matrix());
    parallel_for(n, cfg.threads, [&](int i) {
        state.locals.stack[i] = s0.data * state.psi.col(i).asDiagonal();
    });

    auto full_objective = [&]() {
        return detail::elmm_fidelity(cube, s0.data, state, cfg.lambda_s, cfg.threads) +
               0.5 * cfg.lambda_s0 * (s0.data * volume).cwiseProduct(s0.data).sum();
    };

    UnmixResult result;
    result.objective_trace.push_back(full_objective());

    for (int outer = 1; outer <= cfg.max_outer_iter; ++outer) {
        const Matrix a_old = state.a;
        const Matrix psi_old = state.psi;
        const Matrix s0_old = s0.data;
        const LocalEndmemberStack locals_old = state.locals;

        // blocks 1 and 2: S_n, then {A, Psi}, all per pixel
        detail::elmm_blocks(cube, s0.data, cfg, /*order_s_first=*/true, state);

        // block 3: S0 against the collapsed stack statistics
        S0Objective sub;
        sub.lambda_s = cfg.lambda_s;
        sub.lambda_s0 = cfg.lambda_s0;
        sub.v = volume;
        sub.c0 = detail::stack_sq_norm(state.locals, cfg.threads);
        sub.d = Vector::Zero(p);
        for (int j = 0; j < p; ++j)
            sub.d[j] = deterministic_sum(n, cfg.threads,
                                         [&](int i) { return state.psi(j, i) * state.psi(j, i); });
        sub.m.resize(cube.bands(), p);
        for (int j = 0; j < p; ++j) {
            Matrix col = Matrix::Zero(cube.bands(), 1);
            constexpr int kBlock = 1024;
            const int blocks = (n + kBlock - 1) / kBlock;
            std::vector<Matrix> partial(blocks);
            parallel_for(blocks, cfg.threads, [&](int b) {
                Matrix acc = Matrix::Zero(cube.bands(), 1);
                const int lo = b * kBlock;
                const int hi = std::min(n, lo + kBlock);
                for (int i = lo; i < hi; ++i)
                    acc += state.locals.stack[i].col(j) * state.psi(j, i);
                partial[b] = std::move(acc);
            });
            for (const auto& block : partial) col += block;
            sub.m.col(j) = col;
        }

        if (cfg.unnormalized_s0) {
            Matrix system = cfg.lambda_s * sub.d.asDiagonal().toDenseMatrix() + cfg.lambda_s0 * volume;
            s0.data = system.llt().solve(cfg.lambda_s * sub.m.transpose()).transpose();
            s0.normalized = false;
            if (!s0.data.allFinite()) throw NumericalError("relmm: S0 update diverged");
        } else {
            const auto objective = sub.as_objective();
            auto cg = oblique_cg_step(s0, objective, cfg.s0_cg_max_iter, 1e-8);
            s0.data = std::move(cg.point);
        }

        const double objective_value = full_objective();
        if (!std::isfinite(objective_value)) throw NumericalError("relmm: non-finite objective");
        result.objective_trace.push_back(objective_value);
        result.iterations = outer;

        detail::BlockChanges change;
        change.abundances = detail::relative_change((state.a - a_old).norm(), a_old.norm());
        change.scalings = detail::relative_change((state.psi - psi_old).norm(), psi_old.norm());
        change.references = detail::relative_change((s0.data - s0_old).norm(), s0_old.norm());
        change.locals = detail::relative_change(
            std::sqrt(detail::stack_sq_diff(state.locals, locals_old, cfg.threads)),
            std::sqrt(detail::stack_sq_norm(locals_old, cfg.threads)));
        if (change.all_below(cfg.epsilon)) {
            result.converged = true;
            break;
        }
    }

    result.abundances.data = std::move(state.a);
    result.scalings.data = std::move(state.psi);
    result.references = s0;
    result.locals = std::move(state.locals);
    const double sq_err = deterministic_sum(n, cfg.threads, [&](int i) {
        return (cube.data.col(i) - result.locals.stack[i] * result.abundances.data.col(i)).squaredNorm();
    });
    result.reconstruction_rmse = std::sqrt(sq_err / (static_cast<double>(cube.bands()) * n));
    return result;
}

}  // namespace hsu
