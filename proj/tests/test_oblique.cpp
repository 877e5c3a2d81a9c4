#include <catch2/catch_amalgamated.hpp>

#include "hsu/oblique.hpp"
#include "hsu/rng.hpp"

using hsu::Matrix;
using hsu::Vector;

namespace {

Matrix random_oblique(int rows, int cols, hsu::Rng& rng) {
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = rng.normal();
        m.col(c).normalize();
    }
    return m;
}

hsu::S0Objective random_subproblem(int rows, int cols, hsu::Rng& rng, double lambda_s,
                                   double lambda_s0) {
    hsu::S0Objective sub;
    sub.lambda_s = lambda_s;
    sub.lambda_s0 = lambda_s0;
    sub.v = hsu::volume_matrix(cols);
    sub.m.resize(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) sub.m(r, c) = rng.normal();
    sub.d.resize(cols);
    for (int c = 0; c < cols; ++c) sub.d[c] = rng.uniform(0.5, 4.0);
    sub.c0 = rng.uniform(1.0, 10.0);
    return sub;
}

}  // namespace

TEST_CASE("trace identity: tr(S0 V S0') equals the pairwise squared distances") {
    hsu::Rng rng(81);
    for (int p = 2; p <= 6; ++p) {
        for (int trial = 0; trial < 20; ++trial) {
            Matrix s0(8, p);
            for (int c = 0; c < p; ++c)
                for (int r = 0; r < 8; ++r) s0(r, c) = rng.normal();
            const double trace_form = (s0 * hsu::volume_matrix(p)).cwiseProduct(s0).sum();
            CHECK(trace_form ==
                  Catch::Approx(hsu::pairwise_sq_distance_sum(s0)).margin(1e-9));
        }
    }
}

TEST_CASE("with lambda_s = 0 the Euclidean gradient is the volume term alone") {
    hsu::S0Objective sub;
    sub.lambda_s = 0.0;
    sub.lambda_s0 = 0.7;
    sub.v = hsu::volume_matrix(2);
    sub.m = Matrix::Zero(4, 2);
    sub.d = Vector::Zero(2);
    sub.c0 = 0.0;
    Matrix s0 = Matrix::Zero(4, 2);
    s0(0, 0) = 1.0;  // scaled canonical basis, normalized
    s0(1, 1) = 1.0;
    const Matrix expected = 0.7 * (s0 * sub.v);
    CHECK((sub.euclidean_gradient(s0) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Riemannian gradient matches central finite differences") {
    hsu::Rng rng(82);
    const int bands = 12, p = 3;
    const auto sub = random_subproblem(bands, p, rng, 0.8, 0.4);
    const Matrix s0 = random_oblique(bands, p, rng);
    const Matrix grad = hsu::oblique_tangent_project(s0, sub.euclidean_gradient(s0));

    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        Matrix xi = hsu::oblique_tangent_project(s0, random_oblique(bands, p, rng));
        xi /= xi.norm();
        const double fd =
            (sub.value(hsu::oblique_retract(s0, h * xi)) - sub.value(hsu::oblique_retract(s0, -h * xi))) /
            (2.0 * h);
        const double analytic = (grad.array() * xi.array()).sum();
        CHECK(std::abs(fd - analytic) / std::max(std::abs(fd), 1e-12) < 1e-5);
    }
}

TEST_CASE("one CG step strictly decreases the objective away from stationarity") {
    hsu::Rng rng(83);
    const auto sub = random_subproblem(10, 3, rng, 1.0, 0.5);
    const hsu::EndmemberMatrix s0(random_oblique(10, 3, rng), true);
    const double before = sub.value(s0.data);
    const auto objective = sub.as_objective();
    const auto result = hsu::oblique_cg_step(s0, objective, 1);
    CHECK(result.value < before);
    CHECK(!result.stalled);
}

TEST_CASE("CG drives the Riemannian gradient to zero and keeps unit columns") {
    hsu::Rng rng(84);
    const auto sub = random_subproblem(15, 4, rng, 1.0, 0.3);
    const hsu::EndmemberMatrix s0(random_oblique(15, 4, rng), true);
    const auto objective = sub.as_objective();
    const auto result = hsu::oblique_cg_step(s0, objective, 500, 1e-12);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(result.point.col(c).norm() - 1.0) < 1e-10);
    const Matrix grad = hsu::oblique_tangent_project(result.point, sub.euclidean_gradient(result.point));
    CHECK(grad.norm() < 1e-6);

    // objective value never above the start (descent method contract)
    CHECK(result.value <= sub.value(s0.data));
}

TEST_CASE("CG requires the normalized flag") {
    hsu::Rng rng(85);
    const auto sub = random_subproblem(6, 2, rng, 1.0, 0.1);
    const hsu::EndmemberMatrix s0(random_oblique(6, 2, rng), false);
    const auto objective = sub.as_objective();
    CHECK_THROWS_AS(hsu::oblique_cg_step(s0, objective, 10), std::invalid_argument);
}
