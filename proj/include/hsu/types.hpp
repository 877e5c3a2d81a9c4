#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace hsu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown when a pixel is (near-)orthogonal to the projection reference u,
// i.e. |x'u| is below the configured floor. Callers may drop or flag it.
struct NearOrthogonalError : std::domain_error {
    using std::domain_error::domain_error;
};

// Thrown when a solver produces a non-finite objective or otherwise breaks
// down numerically. The CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on bad files / bad arguments. The CLI maps this to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Hyperspectral image X: L x N reflectance matrix, pixel n in column n,
// band-major so solvers can address full spectra column-wise. Pixel n maps
// to spatial position (line = n / samples, sample = n % samples).
struct SpectralCube {
    Matrix data;
    int lines = 0;
    int samples = 0;

    SpectralCube() = default;
    SpectralCube(Matrix d, int lines_, int samples_)
        : data(std::move(d)), lines(lines_), samples(samples_) {}

    int bands() const { return static_cast<int>(data.rows()); }
    int pixels() const { return static_cast<int>(data.cols()); }
    Eigen::Ref<const Vector> pixel(int n) const { return data.col(n); }

    void validate() const {
        if (lines <= 0 || samples <= 0 || data.rows() <= 0)
            throw std::invalid_argument("SpectralCube: dimensions must be positive");
        if (data.cols() != static_cast<Eigen::Index>(lines) * samples)
            throw std::invalid_argument("SpectralCube: pixel count != lines * samples");
        if (!data.allFinite())
            throw std::invalid_argument("SpectralCube: non-finite reflectance value");
    }
};

// Endmember signatures in columns (S or S0). `normalized` marks membership
// of the oblique manifold (unit-norm columns).
struct EndmemberMatrix {
    Matrix data;
    bool normalized = false;

    EndmemberMatrix() = default;
    explicit EndmemberMatrix(Matrix d, bool normalized_ = false)
        : data(std::move(d)), normalized(normalized_) {}

    int bands() const { return static_cast<int>(data.rows()); }
    int count() const { return static_cast<int>(data.cols()); }

    // Column-normalized copy with the oblique flag set.
    EndmemberMatrix unit_normalized() const {
        EndmemberMatrix out;
        out.data = data;
        for (int p = 0; p < out.data.cols(); ++p) {
            const double norm = out.data.col(p).norm();
            if (norm <= 0.0)
                throw std::invalid_argument("EndmemberMatrix: zero-norm column");
            out.data.col(p) /= norm;
        }
        out.normalized = true;
        return out;
    }

    void validate() const {
        if (!data.allFinite())
            throw std::invalid_argument("EndmemberMatrix: non-finite entry");
        for (int p = 0; p < data.cols(); ++p) {
            const double norm = data.col(p).norm();
            if (norm <= 0.0)
                throw std::invalid_argument("EndmemberMatrix: zero-norm column");
            if (normalized && std::abs(norm - 1.0) > 1e-10)
                throw std::invalid_argument("EndmemberMatrix: column not unit norm");
        }
    }
};

// P x N abundance fractions; simplex-constrained solvers keep each column
// on the unit simplex.
struct AbundanceMatrix {
    Matrix data;

    AbundanceMatrix() = default;
    explicit AbundanceMatrix(Matrix d) : data(std::move(d)) {}

    void validate(bool sum_to_one = true) const {
        if (!data.allFinite())
            throw std::invalid_argument("AbundanceMatrix: non-finite entry");
        if (data.minCoeff() < -1e-12)
            throw std::invalid_argument("AbundanceMatrix: negative abundance");
        if (sum_to_one) {
            for (int n = 0; n < data.cols(); ++n)
                if (std::abs(data.col(n).sum() - 1.0) > 1e-9)
                    throw std::invalid_argument("AbundanceMatrix: column does not sum to one");
        }
    }
};

// P x N positive scaling factors psi_pn.
struct ScalingMatrix {
    Matrix data;

    ScalingMatrix() = default;
    explicit ScalingMatrix(Matrix d) : data(std::move(d)) {}

    void validate(double floor = 1e-8) const {
        if (!data.allFinite())
            throw std::invalid_argument("ScalingMatrix: non-finite entry");
        if (data.minCoeff() < floor)
            throw std::invalid_argument("ScalingMatrix: entry below positivity floor");
    }
};

// Per-pixel endmember matrices S_n, one L x P matrix per pixel.
struct LocalEndmemberStack {
    std::vector<Matrix> stack;

    LocalEndmemberStack() = default;
    explicit LocalEndmemberStack(std::vector<Matrix> s) : stack(std::move(s)) {}

    int pixels() const { return static_cast<int>(stack.size()); }

    void validate(int expected_pixels = -1) const {
        if (expected_pixels >= 0 && pixels() != expected_pixels)
            throw std::invalid_argument("LocalEndmemberStack: pixel count mismatch");
        for (const auto& m : stack)
            if (!m.allFinite())
                throw std::invalid_argument("LocalEndmemberStack: non-finite entry");
    }
};

// Phi = A (.) Psi, the nonnegative NMF coefficients (no sum-to-one).
struct CoefficientMatrix {
    Matrix data;

    CoefficientMatrix() = default;
    explicit CoefficientMatrix(Matrix d) : data(std::move(d)) {}

    void validate() const {
        if (!data.allFinite() || data.minCoeff() < 0.0)
            throw std::invalid_argument("CoefficientMatrix: entries must be finite and nonnegative");
    }
};

}  // namespace hsu
