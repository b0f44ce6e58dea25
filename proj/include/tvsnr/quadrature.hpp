// quadrature.hpp — adaptive Gauss-Kronrod (G7,K15) integration and the
// quadrature route from SDE coefficients back to kernel coefficients:
//   a(t) = exp(int_0^t f du)
//   b^2(t) = a^2(t) int_0^t g^2(s) / a^2(s) ds

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tvsnr/schedule.hpp"

namespace tvsnr {

struct quadrature_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// 15-point Kronrod extension of 7-point Gauss: {abscissa, gauss w, kronrod w}.
// Abscissae are symmetric about the interval midpoint.
inline constexpr double gk15[8][3] = {
    {0.000000000000000, 0.417959183673469, 0.209482141084728},
    {0.405845151377397, 0.381830050505119, 0.190350578064785},
    {0.741531185599394, 0.279705391489277, 0.140653259715525},
    {0.949107912342759, 0.129484966168870, 0.063092092629979},
    {0.207784955007898, 0.0, 0.204432940075298},
    {0.586087235467691, 0.0, 0.169004726639267},
    {0.864864423359769, 0.0, 0.104790010322250},
    {0.991455371120813, 0.0, 0.022935322010529},
};

template <class F>
void gk15_segment(F&& f, double a, double b, double& value, double& err) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double y0 = f(mid);
    double g7 = gk15[0][1] * y0;
    double k15 = gk15[0][2] * y0;
    for (int i = 1; i < 8; ++i) {
        const double dx = half * gk15[i][0];
        const double yi = f(mid + dx) + f(mid - dx);
        g7 += gk15[i][1] * yi;
        k15 += gk15[i][2] * yi;
    }
    value = k15 * half;
    err = std::abs((k15 - g7) * half);
}

struct quad_segment {
    double a, b, value, err;
};

}  // namespace detail

/// Integrate f over [a, b] by adaptive bisection of G7K15 panels until the
/// summed error estimate satisfies max(abs_tol, rel_tol * |integral|).
/// Throws quadrature_error if the tolerance is not met within the segment
/// budget.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 1e-14,
                 std::size_t max_segments = 4000) {
    if (a == b) return 0.0;
    detail::require(rel_tol > 0.0 || abs_tol > 0.0, "integrate: need a positive tolerance");

    std::vector<detail::quad_segment> segs;
    segs.reserve(64);
    detail::quad_segment first{a, b, 0.0, 0.0};
    detail::gk15_segment(f, a, b, first.value, first.err);
    segs.push_back(first);

    double total = first.value;
    double total_err = first.err;
    while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (segs.size() >= max_segments)
            throw quadrature_error("integrate: tolerance not reached within segment budget");
        // split the segment with the largest error estimate
        auto worst = std::max_element(segs.begin(), segs.end(),
                                      [](const auto& l, const auto& r) { return l.err < r.err; });
        const detail::quad_segment old = *worst;
        const double mid = 0.5 * (old.a + old.b);
        if (mid <= old.a || mid >= old.b)
            throw quadrature_error("integrate: interval too small to subdivide further");
        detail::quad_segment left{old.a, mid, 0.0, 0.0};
        detail::quad_segment right{mid, old.b, 0.0, 0.0};
        detail::gk15_segment(f, left.a, left.b, left.value, left.err);
        detail::gk15_segment(f, right.a, right.b, right.value, right.err);
        *worst = left;
        segs.push_back(right);
        total = 0.0;
        total_err = 0.0;
        for (const auto& s : segs) {
            total += s.value;
            total_err += s.err;
        }
    }
    return total;
}

/// Kernel coefficients at time t recovered from SDE coefficient callables by
/// adaptive quadrature:
///   a(t) = a0 exp(int F),  b^2(t) = exp(2 int F) (b0^2 + int g^2(s) e^(-2 F(s)) ds)
/// with F(s) = int_(t_start)^s f du. The nested exponential integral is
/// reduced to a single integral through the a^2(t)/a^2(s) factorization; the
/// inner log-scale integral of f is re-evaluated adaptively at every outer
/// node. The default initial state (a0, b0) = (1, 0) describes diffusion
/// started from a point mass; schedules whose kernel already carries noise
/// at the start time pass their (a, b) there instead.
template <class F, class G>
kernel_coeffs sde_to_kernel_quadrature(F&& f, G&& g_sq, double t, double rel_tol = 1e-9,
                                       kernel_coeffs init = {1.0, 0.0}, double t_start = 0.0) {
    detail::require(t >= t_start, "sde_to_kernel_quadrature: need t >= t_start");
    detail::require(rel_tol > 0.0, "sde_to_kernel_quadrature: need rel_tol > 0");
    detail::require(init.a > 0.0 && init.b >= 0.0, "sde_to_kernel_quadrature: bad init");
    if (t == t_start) return init;

    const double inner_tol = 0.1 * rel_tol;
    auto log_gain_at = [&](double s) { return integrate(f, t_start, s, inner_tol, 1e-15); };

    const double log_gain = log_gain_at(t);
    const double gain = std::exp(log_gain);
    auto integrand = [&](double s) { return g_sq(s) * std::exp(-2.0 * log_gain_at(s)); };
    const double noise_sq = integrate(integrand, t_start, t, rel_tol, 1e-16);
    const double b_sq = gain * gain * (init.b * init.b + std::max(noise_sq, 0.0));
    return {init.a * gain, std::sqrt(b_sq)};
}

}  // namespace tvsnr
