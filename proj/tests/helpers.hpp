// Shared test utilities: tolerance helpers, independently coded closed-form
// kernel coefficients per schedule family (used as oracles against the
// library's log-space evaluation paths), and a forward Euler-Maruyama
// simulator for moment-matching checks.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "tvsnr/rng.hpp"
#include "tvsnr/schedule.hpp"
#include "tvsnr/sde.hpp"

namespace testutil {

inline double rel_err(double got, double want) {
    if (want == 0.0) return std::abs(got);
    return std::abs(got - want) / std::abs(want);
}

inline bool close(double got, double want, double rel, double abs = 0.0) {
    return std::abs(got - want) <= std::max(abs, rel * std::abs(want));
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    }
    return v;
}

/// n points strictly inside (lo, hi).
inline std::vector<double> interior_points(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * (static_cast<double>(i) + 1.0) / (static_cast<double>(n) + 1.0);
    }
    return v;
}

/// Kernel coefficients a, b and their time derivatives, written straight
/// from each family's a(t), b(t) closed form -- a deliberately separate
/// route from the library's tau/gamma log-space evaluation.
struct kernel_closed_form {
    double a, a_dot, b, b_dot;
};

inline kernel_closed_form vp_from_gamma(double gamma, double gamma_dot) {
    const double den = 1.0 + gamma * gamma;
    return {gamma / std::sqrt(den), gamma_dot / std::pow(den, 1.5),
            1.0 / std::sqrt(den), -gamma * gamma_dot / std::pow(den, 1.5)};
}

inline kernel_closed_form closed_form_kernel(const tvsnr::schedule_spec& spec, double t) {
    using tvsnr::schedule_family;
    if (spec.vp || spec.family == schedule_family::issnr) {
        // all VP variants: a = gamma/sqrt(1+gamma^2), b = 1/sqrt(1+gamma^2)
        double gamma = 0.0, gamma_dot = 0.0;
        switch (spec.family) {
            case schedule_family::smld: {
                const auto& p = std::get<tvsnr::ve_params>(spec.params);
                const double big_l = std::log(p.sigma_max / p.sigma_min);
                gamma = std::exp(-std::log(p.sigma_min) - big_l * t);
                gamma_dot = -big_l * gamma;
                break;
            }
            case schedule_family::edm_ut: {
                const auto& p = std::get<tvsnr::edm_params>(spec.params);
                const double ra = std::pow(p.sigma_max, 1.0 / p.rho);
                const double rb = std::pow(p.sigma_min, 1.0 / p.rho);
                const double s = ra + (1.0 - t) * (rb - ra);
                gamma = std::pow(s, -p.rho);
                gamma_dot = -p.rho * (ra - rb) / s * gamma;
                break;
            }
            case schedule_family::otfm: {
                gamma = (1.0 - t) / t;
                gamma_dot = -1.0 / (t * t);
                break;
            }
            case schedule_family::issnr: {
                const auto& p = std::get<tvsnr::issnr_params>(spec.params);
                const double w = p.t_max - p.t_min;
                const double u = t * w + p.t_min;
                gamma = std::pow((1.0 - u) / u, p.eta) * std::exp(p.kappa);
                gamma_dot = -p.eta * w / (u * (1.0 - u)) * gamma;
                break;
            }
            default:
                throw std::logic_error("closed_form_kernel: unsupported vp family here");
        }
        return vp_from_gamma(gamma, gamma_dot);
    }
    switch (spec.family) {
        case schedule_family::smld: {
            const auto& p = std::get<tvsnr::ve_params>(spec.params);
            const double big_l = std::log(p.sigma_max / p.sigma_min);
            const double b = p.sigma_min * std::exp(big_l * t);
            return {1.0, 0.0, b, big_l * b};
        }
        case schedule_family::edm:
            return {1.0, 0.0, t, 1.0};
        case schedule_family::edm_ut: {
            const auto& p = std::get<tvsnr::edm_params>(spec.params);
            const double ra = std::pow(p.sigma_max, 1.0 / p.rho);
            const double rb = std::pow(p.sigma_min, 1.0 / p.rho);
            const double s = ra + (1.0 - t) * (rb - ra);
            const double b = std::pow(s, p.rho);
            return {1.0, 0.0, b, p.rho * (ra - rb) / s * b};
        }
        case schedule_family::otfm:
            return {1.0 - t, -1.0, t, 1.0};
        case schedule_family::ddpm_linear: {
            const auto& p = std::get<tvsnr::ddpm_linear_params>(spec.params);
            const double spread = p.beta_max - p.beta_min;
            const double big_b = 0.5 * t * t * spread + t * p.beta_min;
            const double db = t * spread + p.beta_min;
            const double a = std::exp(-0.5 * big_b);
            const double b = std::sqrt(-std::expm1(-big_b));
            return {a, -0.5 * db * a, b, 0.5 * db * std::exp(-big_b) / b};
        }
        case schedule_family::ddpm_cos: {
            const auto& p = std::get<tvsnr::ddpm_cos_params>(spec.params);
            const double c = (std::numbers::pi / 2.0) / (1.0 + p.s);
            const double theta0 = c * p.s;
            const double theta = c * (std::pow(t, p.nu) + p.s);
            const double dtheta = c * p.nu * std::pow(t, p.nu - 1.0);
            const double a = std::cos(theta) / std::cos(theta0);
            const double a_dot = -std::sin(theta) * dtheta / std::cos(theta0);
            const double b = std::sqrt(1.0 - a * a);
            return {a, a_dot, b, -a * a_dot / b};
        }
        default:
            throw std::logic_error("closed_form_kernel: unsupported family");
    }
}

/// Exact probability-flow endpoint for a single-delta mixture: the flow is
/// the affine quantile transport x(t) = a(t) c + b(t)/b(s) (x(s) - a(s) c).
inline double transport_exact(const tvsnr::schedule_spec& spec, double center, double t_from,
                              double x_from, double t_to) {
    const auto k0 = tvsnr::to_kernel(tvsnr::eval_point(spec, t_from));
    const auto k1 = tvsnr::to_kernel(tvsnr::eval_point(spec, t_to));
    return k1.a * center + k1.b / k0.b * (x_from - k0.a * center);
}

inline double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (double v : xs) mx += v;
    for (double v : ys) my += v;
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
}

struct forward_moments {
    double t;
    double mean;
    double var;
    std::size_t paths;
};

/// Euler-Maruyama simulation of dx = x f dt + g dw from x(t_lo) = x0, with
/// moments collected at the requested checkpoints (sorted ascending).
inline std::vector<forward_moments> simulate_forward_em(
    const tvsnr::schedule_spec& spec, double x0, std::size_t n_paths, std::size_t n_steps,
    const std::vector<double>& checkpoints, std::uint64_t seed) {
    const auto dom = spec.domain();
    const double t_lo = dom.lo;
    const double t_hi = checkpoints.back();
    const double dt = (t_hi - t_lo) / static_cast<double>(n_steps);

    // coefficient tables at the step left endpoints
    std::vector<double> f(n_steps), g(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const auto c = tvsnr::tvsnr_sde(tvsnr::eval_point(spec, t_lo + dt * static_cast<double>(k)));
        f[k] = c.f;
        g[k] = std::sqrt(c.g_sq);
    }
    // checkpoints snap to the nearest step boundary; the reported t is the
    // snapped node time so that comparisons use the exact same instant
    std::vector<std::size_t> check_step;
    std::vector<double> check_time;
    for (double tc : checkpoints) {
        const auto k = static_cast<std::size_t>(std::llround((tc - t_lo) / dt));
        check_step.push_back(k);
        check_time.push_back(t_lo + dt * static_cast<double>(k));
    }

    std::vector<double> sum(checkpoints.size(), 0.0), sum_sq(checkpoints.size(), 0.0);
    const double sqrt_dt = std::sqrt(dt);
    for (std::size_t p = 0; p < n_paths; ++p) {
        auto rng = tvsnr::rng_stream::from_seed(seed, p);
        double x = x0;
        std::size_t next_check = 0;
        for (std::size_t k = 0; k < n_steps && next_check < check_step.size(); ++k) {
            x += x * f[k] * dt + g[k] * sqrt_dt * rng.normal();
            while (next_check < check_step.size() && k + 1 == check_step[next_check]) {
                sum[next_check] += x;
                sum_sq[next_check] += x * x;
                ++next_check;
            }
        }
    }

    std::vector<forward_moments> out;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        const double n = static_cast<double>(n_paths);
        const double mean = sum[i] / n;
        out.push_back({check_time[i], mean, (sum_sq[i] - n * mean * mean) / (n - 1.0), n_paths});
    }
    return out;
}

}  // namespace testutil
