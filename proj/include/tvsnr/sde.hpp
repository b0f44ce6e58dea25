// sde.hpp — drift/diffusion coefficients of the affine SDE
//   dx = x f(t) dt + g(t) dw
// induced by a TV/SNR schedule, the kernel->SDE conversion, and the reverse
// process right-hand side with stochasticity knob lambda.
//
// The reverse process is integrated in forward time t marching downward from
// t_max to t_min (step increments are negative); the time-reversed
// parametrization t~ = 1 - t that is sometimes used elsewhere is not.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "tvsnr/schedule.hpp"

namespace tvsnr {

struct sde_coeffs {
    double f;     // drift coefficient, 1/time
    double g_sq;  // squared diffusion coefficient, >= 0
};

/// Coefficients of the forward SDE matching a schedule point:
///   f = dlog_tv + dlog_snr / (1 + gamma^2)
///   g^2 = -2 tau^2 dlog_snr / (1 + gamma^2)
/// Requires a strictly decreasing SNR (dlog_snr < 0), which makes g^2 > 0.
inline sde_coeffs tvsnr_sde(const schedule_point& p) {
    detail::require(p.tv_sq > 0.0 && p.snr_sq > 0.0, "tvsnr_sde: invalid schedule point");
    if (!(p.dlog_snr < 0.0))
        throw std::invalid_argument("tvsnr_sde: SNR must be strictly decreasing (dlog_snr < 0)");
    const double inv1p = detail::inv_one_plus(p.snr_sq);
    return {p.dlog_tv + p.dlog_snr * inv1p, -2.0 * p.tv_sq * p.dlog_snr * inv1p};
}

/// SDE coefficients from kernel coefficients and their time derivatives:
///   f = a'/a,  g^2 = 2 a b d/dt (b/a).
inline sde_coeffs kernel_to_sde(double a, double a_dot, double b, double b_dot) {
    detail::require(a > 0.0 && b > 0.0, "kernel_to_sde: need a > 0 and b > 0");
    const double ratio_dot = (b_dot * a - a_dot * b) / (a * a);
    if (!(ratio_dot > 0.0))
        throw std::invalid_argument("kernel_to_sde: need d/dt (b/a) > 0");
    return {a_dot / a, 2.0 * a * b * ratio_dot};
}

/// Right-hand side of the reverse process at one state. Writes the drift (in
/// forward-time parametrization, to be integrated from t_max down to t_min)
///   f x - (1 + lambda^2)/2 g^2 score
/// into drift_out and returns the noise scale lambda * g. lambda = 0 is the
/// probability flow ODE.
inline double reverse_rhs(const sde_coeffs& c, double lambda,
                          std::span<const double> x, std::span<const double> score,
                          std::span<double> drift_out) {
    detail::require(lambda >= 0.0, "reverse_rhs: need lambda >= 0");
    detail::require(x.size() == score.size() && x.size() == drift_out.size(),
                    "reverse_rhs: size mismatch");
    const double score_gain = 0.5 * (1.0 + lambda * lambda) * c.g_sq;
    for (std::size_t i = 0; i < x.size(); ++i) {
        drift_out[i] = c.f * x[i] - score_gain * score[i];
    }
    return lambda * std::sqrt(c.g_sq);
}

/// f(t) and g^2(t) of a schedule as plain callables, clamping t into the
/// schedule's valid domain. Handy for quadrature and CSV export.
struct schedule_sde_fn {
    schedule_spec spec;

    sde_coeffs operator()(double t) const {
        const auto dom = spec.domain();
        return tvsnr_sde(eval_point(spec, std::clamp(t, dom.lo, dom.hi)));
    }
    double f(double t) const { return (*this)(t).f; }
    double g_sq(double t) const { return (*this)(t).g_sq; }
};

}  // namespace tvsnr
