#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "hsu/geometry.hpp"
#include "hsu/parallel.hpp"
#include "hsu/rng.hpp"
#include "hsu/types.hpp"

namespace hsu {

struct GmmComponent {
    double mean = 1.0;
    double stddev = 0.0;
    double weight = 1.0;
};

struct SceneSpec {
    int bands = 200;
    int lines = 100;
    int samples = 100;
    int classes = 3;
    int variants_per_class = 10;
    double dirichlet_alpha = 0.3;
    // multimodal positive scaling factors; defaults are configurable stand-ins
    // for a fit against real scaling-factor histograms
    std::array<GmmComponent, 4> gmm = {{{0.6, 0.05, 0.2}, {0.9, 0.05, 0.3}, {1.1, 0.05, 0.3}, {1.5, 0.1, 0.2}}};
    double snr_db = 30.0;  // +inf disables noise
    double shadow_fraction = 0.0;
    std::uint64_t seed = 0;

    int pixels() const { return lines * samples; }

    void validate() const {
        if (bands < 1 || lines < 1 || samples < 1 || classes < 1 || variants_per_class < 1)
            throw std::invalid_argument("SceneSpec: dimensions must be positive");
        if (!(dirichlet_alpha > 0.0)) throw std::invalid_argument("SceneSpec: dirichlet_alpha must be positive");
        if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
            throw std::invalid_argument("SceneSpec: snr_db must be finite or +inf");
        if (shadow_fraction < 0.0 || shadow_fraction > 1.0)
            throw std::invalid_argument("SceneSpec: shadow_fraction out of [0, 1]");
        double wsum = 0.0;
        for (const auto& c : gmm) {
            if (!(c.mean > 0.0)) throw std::invalid_argument("SceneSpec: gmm mean must be positive");
            if (c.stddev < 0.0 || c.weight < 0.0) throw std::invalid_argument("SceneSpec: bad gmm component");
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-12) throw std::invalid_argument("SceneSpec: gmm weights must sum to 1");
    }
};

struct ClassLibrary {
    std::vector<Matrix> classes;  // per class: bands x K, unit-norm variant columns
    EndmemberMatrix references;   // per-class mean direction, unit norm

    int class_count() const { return static_cast<int>(classes.size()); }
    int variants_per_class() const { return classes.empty() ? 0 : static_cast<int>(classes[0].cols()); }
};

struct GroundTruth {
    AbundanceMatrix abundances;
    ScalingMatrix scalings;     // single scalar per pixel, replicated across rows
    LocalEndmemberStack locals; // psi_n * chosen variants; variant = column / psi_n
    ClassLibrary library;
};

namespace detail {

// Smooth positive spectrum: baseline plus 3-6 Gaussian bumps along the band
// axis, bump centers biased to a per-class home interval so classes start
// well separated.
inline Vector bump_spectrum(int bands, int cls, int classes, Rng& rng) {
    Vector s = Vector::Constant(bands, 0.05);
    const int n_bumps = 3 + static_cast<int>(rng.below(4));
    const double home_lo = static_cast<double>(cls) / classes;
    const double home_hi = static_cast<double>(cls + 1) / classes;
    for (int j = 0; j < n_bumps; ++j) {
        const bool home = j == 0 || rng.uniform() < 0.7;
        const double center = home ? rng.uniform(home_lo, home_hi) : rng.uniform();
        const double width = rng.uniform(0.03, 0.12);
        const double weight = rng.uniform(0.3, 1.0);
        for (int b = 0; b < bands; ++b) {
            const double t = bands > 1 ? static_cast<double>(b) / (bands - 1) : 0.0;
            const double z = (t - center) / width;
            s[b] += weight * std::exp(-0.5 * z * z);
        }
    }
    return s;
}

// Smooth multiplicative perturbation in [-1, 1]: a short cosine series
// normalized to unit peak.
inline Vector smooth_wiggle(int bands, Rng& rng) {
    Vector g = Vector::Zero(bands);
    for (int j = 0; j < 4; ++j) {
        const double w = rng.uniform(-1.0, 1.0);
        const double f = rng.uniform(0.5, 4.0);
        const double phase = rng.uniform(0.0, 6.283185307179586477);
        for (int b = 0; b < bands; ++b) {
            const double t = bands > 1 ? static_cast<double>(b) / (bands - 1) : 0.0;
            g[b] += w * std::cos(6.283185307179586477 * f * t + phase);
        }
    }
    const double peak = g.cwiseAbs().maxCoeff();
    if (peak > 0.0) g /= peak;
    return g;
}

}  // namespace detail

// P base spectra plus K smooth multiplicative variants each (amplitude
// <= 10%, kept within 4 degrees of the base), all unit-normalized. Base
// classes are redrawn until pairwise SAM >= 10 degrees.
inline ClassLibrary make_class_library(int bands, int classes, int variants, std::uint64_t seed) {
    if (variants < 1) throw std::invalid_argument("make_class_library: need at least one variant");
    Rng rng(seed);
    constexpr double kMinCrossAngle = 10.0 * 3.14159265358979323846 / 180.0;
    constexpr double kMaxVariantAngle = 4.0 * 3.14159265358979323846 / 180.0;

    std::vector<Vector> bases(classes);
    int draws = 0;
    for (int p = 0; p < classes;) {
        if (++draws > 1000)
            throw NumericalError("make_class_library: could not separate base classes");
        Vector candidate = detail::bump_spectrum(bands, p, classes, rng);
        bool ok = true;
        for (int q = 0; q < p; ++q)
            if (spectral_angle(candidate, bases[q]) < kMinCrossAngle) {
                ok = false;
                break;
            }
        if (!ok) continue;
        bases[p++] = candidate;
    }

    ClassLibrary lib;
    lib.classes.resize(classes);
    lib.references.data.resize(bands, classes);
    lib.references.normalized = true;
    for (int p = 0; p < classes; ++p) {
        lib.classes[p].resize(bands, variants);
        for (int k = 0; k < variants;) {
            if (++draws > 1000 * (classes + variants))
                throw NumericalError("make_class_library: variant rejection did not settle");
            const double amplitude = rng.uniform(0.05, 0.10);
            const Vector wiggle = detail::smooth_wiggle(bands, rng);
            const Vector variant =
                bases[p].array() * (1.0 + amplitude * wiggle.array());
            if (spectral_angle(variant, bases[p]) > kMaxVariantAngle) continue;
            lib.classes[p].col(k++) = variant.normalized();
        }
        if (variants == 1) {
            lib.references.data.col(p) = lib.classes[p].col(0);
        } else {
            lib.references.data.col(p) = lib.classes[p].rowwise().sum().normalized();
        }
    }
    return lib;
}

// Synthetic variability scene: per pixel one variant per class, Dirichlet
// abundances, a single positive GMM scaling factor, optional near-zero
// shadow pixels, then white Gaussian noise at the requested SNR (computed
// from the realized signal energy). Bitwise deterministic for a given spec,
// independent of thread count (one RNG stream per pixel).
inline std::pair<SpectralCube, GroundTruth> generate_scene(const SceneSpec& spec, int threads = 0) {
    spec.validate();
    const int n = spec.pixels();
    const int p = spec.classes;
    const int k = spec.variants_per_class;

    GroundTruth truth;
    truth.library = make_class_library(spec.bands, p, k, Rng(spec.seed).next_u64());

    // deterministic shadow subset: first entries of a seeded permutation
    std::vector<char> shadowed(n, 0);
    {
        const int count = static_cast<int>(std::llround(spec.shadow_fraction * n));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = Rng::stream(spec.seed, 0x51ade5ULL);
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }
        for (int i = 0; i < count; ++i) shadowed[order[i]] = 1;
    }

    SpectralCube cube;
    cube.lines = spec.lines;
    cube.samples = spec.samples;
    cube.data.resize(spec.bands, n);
    truth.abundances.data.resize(p, n);
    truth.scalings.data.resize(p, n);
    truth.locals.stack.assign(n, Matrix());

    parallel_for(n, threads, [&](int i) {
        Rng rng = Rng::stream(spec.seed, 1 + static_cast<std::uint64_t>(i));

        Matrix local(spec.bands, p);
        for (int c = 0; c < p; ++c)
            local.col(c) = truth.library.classes[c].col(static_cast<int>(rng.below(k)));

        // Dirichlet(alpha * 1_P), largest entry nudged so the sum is exactly 1
        Vector a(p);
        for (int c = 0; c < p; ++c) a[c] = rng.gamma(spec.dirichlet_alpha);
        a /= a.sum();
        int amax = 0;
        a.maxCoeff(&amax);
        a[amax] += 1.0 - a.sum();

        // positive scaling factor from the truncated Gaussian mixture
        double psi = 0.0;
        do {
            double u = rng.uniform();
            int comp = static_cast<int>(spec.gmm.size()) - 1;
            for (int c = 0; c < static_cast<int>(spec.gmm.size()); ++c) {
                u -= spec.gmm[c].weight;
                if (u <= 0.0) {
                    comp = c;
                    break;
                }
            }
            psi = spec.gmm[comp].mean + spec.gmm[comp].stddev * rng.normal();
        } while (psi <= 0.0);
        if (shadowed[i]) psi *= 0.01;

        truth.abundances.data.col(i) = a;
        truth.scalings.data.col(i).setConstant(psi);
        truth.locals.stack[i] = psi * local;
        cube.data.col(i).noalias() = truth.locals.stack[i] * a;
    });

    if (std::isfinite(spec.snr_db)) {
        const double signal_energy =
            deterministic_sum(n, threads, [&](int i) { return cube.data.col(i).squaredNorm(); });
        const double sigma =
            std::sqrt(signal_energy / (static_cast<double>(spec.bands) * n * std::pow(10.0, spec.snr_db / 10.0)));
        parallel_for(n, threads, [&](int i) {
            Rng rng = Rng::stream(spec.seed, 1 + static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(i));
            for (int b = 0; b < spec.bands; ++b) cube.data(b, i) += sigma * rng.normal();
        });
    }
    return {std::move(cube), std::move(truth)};
}

}  // namespace hsu
