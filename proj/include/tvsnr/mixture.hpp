// mixture.hpp — exact marginal density, score and posterior mean when the
// data distribution is a weighted delta or isotropic-Gaussian mixture.
// Convolving the mixture with the perturbation kernel keeps it a Gaussian
// mixture, so the score oracle is closed-form and needs no trained model.

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tvsnr/schedule.hpp"

namespace tvsnr {

struct not_implemented : std::logic_error {
    using std::logic_error::logic_error;
};

/// Weighted mixture of point masses (center_var = 0) or isotropic Gaussians
/// (center_var > 0) in R^dim. Centers are stored row-major, one row per
/// component. Immutable by convention after construction.
struct mixture {
    std::vector<double> weights;
    std::vector<double> centers;  // size() == weights.size() * dim
    std::size_t dim = 1;
    double center_var = 0.0;

    std::size_t components() const { return weights.size(); }
    std::span<const double> center(std::size_t i) const {
        return {centers.data() + i * dim, dim};
    }

    void validate() const {
        detail::require(dim >= 1, "mixture: need dim >= 1");
        detail::require(!weights.empty(), "mixture: need at least one component");
        detail::require(centers.size() == weights.size() * dim,
                        "mixture: centers size must be components * dim");
        detail::require(center_var >= 0.0, "mixture: need center_var >= 0");
        double sum = 0.0;
        for (double w : weights) {
            detail::require(w >= 0.0, "mixture: weights must be nonnegative");
            sum += w;
        }
        detail::require(std::abs(sum - 1.0) <= 1e-12, "mixture: weights must sum to 1");
    }
};

/// The canonical three-peak toy: equal-weight deltas at 0 and +-sqrt(3/2),
/// standardized to zero mean and unit variance.
inline mixture three_delta() {
    const double r = std::sqrt(1.5);
    mixture m;
    m.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    m.centers = {0.0, r, -r};
    m.dim = 1;
    m.center_var = 0.0;
    return m;
}

/// Single delta at the given center (dim 1).
inline mixture single_delta(double center = 0.0) {
    mixture m;
    m.weights = {1.0};
    m.centers = {center};
    m.dim = 1;
    m.center_var = 0.0;
    return m;
}

namespace detail {

// Marginal variance per axis at kernel (a, b): a^2 center_var + b^2.
inline double marginal_var(const mixture& mix, const kernel_coeffs& k) {
    const double v = k.a * k.a * mix.center_var + k.b * k.b;
    if (!(v > 0.0))
        throw std::domain_error("mixture: degenerate density (b = 0 and center_var = 0)");
    return v;
}

// Per-component log densities log(w_i N(x; a c_i, var I)) into out.
inline void component_logpdfs(const mixture& mix, const kernel_coeffs& k,
                              std::span<const double> x, std::span<double> out) {
    const double var = marginal_var(mix, k);
    const double norm = -0.5 * static_cast<double>(mix.dim) *
                        std::log(2.0 * std::numbers::pi * var);
    for (std::size_t i = 0; i < mix.components(); ++i) {
        const auto c = mix.center(i);
        double sq = 0.0;
        for (std::size_t d = 0; d < mix.dim; ++d) {
            const double diff = x[d] - k.a * c[d];
            sq += diff * diff;
        }
        out[i] = std::log(mix.weights[i]) + norm - 0.5 * sq / var;
    }
}

// Softmax over component log densities; no validation, r is caller scratch.
inline void responsibilities_core(const mixture& mix, const kernel_coeffs& k,
                                  std::span<const double> x, std::span<double> r) {
    component_logpdfs(mix, k, x, r);
    double peak = r[0];
    for (double v : r) peak = std::max(peak, v);
    double acc = 0.0;
    for (double& v : r) {
        v = std::exp(v - peak);
        acc += v;
    }
    for (double& v : r) v /= acc;
}

// Unvalidated score kernel for hot loops; r is caller scratch of size
// mix.components().
inline void score_core(const mixture& mix, const kernel_coeffs& k,
                       std::span<const double> x, std::span<double> out,
                       std::span<double> r) {
    const double var = marginal_var(mix, k);
    responsibilities_core(mix, k, x, r);
    for (std::size_t d = 0; d < mix.dim; ++d) out[d] = 0.0;
    for (std::size_t i = 0; i < mix.components(); ++i) {
        const auto c = mix.center(i);
        for (std::size_t d = 0; d < mix.dim; ++d) {
            out[d] += r[i] * (k.a * c[d] - x[d]);
        }
    }
    for (std::size_t d = 0; d < mix.dim; ++d) out[d] /= var;
}

}  // namespace detail

/// Log of the marginal mixture density at x, via one shared log-sum-exp.
inline double marginal_logpdf(const mixture& mix, const kernel_coeffs& kern,
                              std::span<const double> x) {
    mix.validate();
    detail::require(x.size() == mix.dim, "mixture: state dimension mismatch");
    std::vector<double> lp(mix.components());
    detail::component_logpdfs(mix, kern, x, lp);
    double peak = lp[0];
    for (double v : lp) peak = std::max(peak, v);
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - peak);
    return peak + std::log(acc);
}

/// Posterior component probabilities r_i(x) (softmax over component log
/// densities); sums to 1.
inline void responsibilities(const mixture& mix, const kernel_coeffs& kern,
                             std::span<const double> x, std::span<double> out) {
    mix.validate();
    detail::require(x.size() == mix.dim, "mixture: state dimension mismatch");
    detail::require(out.size() == mix.components(), "mixture: responsibility size mismatch");
    detail::responsibilities_core(mix, kern, x, out);
}

/// Exact score grad_x log p_t(x) = sum_i r_i (a c_i - x) / var_t.
inline void score_into(const mixture& mix, const kernel_coeffs& kern,
                       std::span<const double> x, std::span<double> out) {
    mix.validate();
    detail::require(x.size() == mix.dim, "mixture: state dimension mismatch");
    detail::require(out.size() == mix.dim, "mixture: score size mismatch");
    std::vector<double> r(mix.components());
    detail::score_core(mix, kern, x, out, r);
}

inline std::vector<double> score(const mixture& mix, const kernel_coeffs& kern,
                                 std::span<const double> x) {
    std::vector<double> out(mix.dim);
    score_into(mix, kern, x, out);
    return out;
}

/// Posterior mean E[x(0) | x(t)] = sum_i r_i c_i for delta mixtures. The
/// score then satisfies score = (a E[x(0)|x(t)] - x) / b^2.
inline std::vector<double> posterior_mean(const mixture& mix, const kernel_coeffs& kern,
                                          std::span<const double> x) {
    mix.validate();
    if (mix.center_var > 0.0)
        throw not_implemented("posterior_mean: only delta mixtures (center_var = 0) supported");
    detail::require(kern.b > 0.0, "posterior_mean: need b > 0");
    std::vector<double> r(mix.components());
    responsibilities(mix, kern, x, r);
    std::vector<double> mean(mix.dim, 0.0);
    for (std::size_t i = 0; i < mix.components(); ++i) {
        const auto c = mix.center(i);
        for (std::size_t d = 0; d < mix.dim; ++d) mean[d] += r[i] * c[d];
    }
    return mean;
}

}  // namespace tvsnr
