// schedule.hpp — TV/SNR schedule catalog, pointwise evaluation and the
// Gaussian perturbation-kernel coefficients (a, b).
//
// A schedule is a pair of functions on diffusion time t: the total variance
// tau^2(t) = a^2 + b^2 and the signal-to-noise ratio gamma(t) = a/b. tau may
// be any positive function; gamma must be positive and strictly decreasing.
// Time runs in the forward diffusion direction: t = 0 is data, t = 1 (or the
// schedule's upper bound) is the Gaussian prior.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace tvsnr {

enum class schedule_family {
    smld,         // exponential VE noise, sigma_min..sigma_max
    edm,          // sigma(t) = t, evaluated on sigma-valued time
    edm_ut,       // EDM sigma range remapped to unit time
    otfm,         // linear interpolation path, sigma_min taken as 0
    ddpm_linear,  // classic linear-beta VP schedule
    ddpm_cos,     // cosine VP schedule with exponent nu
    issnr,        // inverse-sigmoid SNR with constant TV
};

// Defaults on the parameter records are the usual literature settings for
// each family (EDM reference sigma range and rho, the classic DDPM betas and
// cosine shift); the ISSNR defaults are the fixed molecule-generation
// parameters.

struct ve_params {
    double sigma_min = 0.01;
    double sigma_max = 50.0;
};

struct edm_params {
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;
};

struct otfm_params {};

struct ddpm_linear_params {
    double beta_min = 0.1;
    double beta_max = 20.0;
};

struct ddpm_cos_params {
    double s = 0.008;
    double nu = 1.0;
};

struct issnr_params {
    double eta = 1.0;
    double kappa = 2.0;
    double t_min = 0.01;
    double t_max = 0.99;
};

using schedule_params = std::variant<ve_params, edm_params, otfm_params,
                                     ddpm_linear_params, ddpm_cos_params, issnr_params>;

/// Closed interval of valid evaluation times for a schedule.
struct time_interval {
    double lo;
    double hi;
    bool contains(double t) const { return t >= lo && t <= hi; }
};

/// One row of the schedule catalog plus its parameters. `vp` forces
/// tau^2(t) = 1 while leaving the SNR schedule untouched. `eval_eps` is the
/// clamp distance used at endpoints where gamma is singular (OTFM at t = 0
/// or 1, DDPM at one end, EDM at sigma = 0); set it to 0 to get a domain
/// error instead of clamping.
struct schedule_spec {
    schedule_family family = schedule_family::issnr;
    bool vp = false;
    schedule_params params = issnr_params{};
    double eval_eps = 1e-5;

    void validate() const;
    time_interval domain() const;
    bool singular_at_data_end() const;
};

/// tau^2, gamma^2 and their log-derivatives at one time t.
struct schedule_point {
    double tv_sq;      // tau^2(t)
    double snr_sq;     // gamma^2(t)
    double dlog_tv;    // d log tau / dt
    double dlog_snr;   // d log gamma / dt, always < 0
};

/// Signal scale a(t) and noise scale b(t) of the perturbation kernel
/// N(x(t); a(t) x(0), b(t)^2 I).
struct kernel_coeffs {
    double a;
    double b;
};

/// SNR values at the schedule's natural endpoints (t = 0 and t = 1, or the
/// sigma range ends for EDM). Unbounded limits are reported as +infinity,
/// vanishing ones as 0.
struct snr_range {
    double gamma_max;  // gamma at the data end
    double gamma_min;  // gamma at the prior end
};

namespace detail {

inline void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// 1/(1 + x) for x >= 0, stable against overflow of intermediate sums.
inline double inv_one_plus(double x) {
    return std::exp(-std::log1p(x));
}

struct tv_part {
    double tv_sq;
    double dlog_tv;
};

struct snr_part {
    double log_snr_sq;
    double dlog_snr;
};

inline double edm_sigma_root(const edm_params& p, double which_min) {
    return std::pow(which_min, 1.0 / p.rho);
}

}  // namespace detail

inline void schedule_spec::validate() const {
    using detail::require;
    require(eval_eps >= 0.0 && eval_eps < 0.5, "schedule: eval_eps must lie in [0, 0.5)");
    switch (family) {
        case schedule_family::smld: {
            const auto* p = std::get_if<ve_params>(&params);
            require(p != nullptr, "schedule: smld expects ve_params");
            require(p->sigma_min > 0.0 && p->sigma_min < p->sigma_max,
                    "schedule: need 0 < sigma_min < sigma_max");
            break;
        }
        case schedule_family::edm:
        case schedule_family::edm_ut: {
            const auto* p = std::get_if<edm_params>(&params);
            require(p != nullptr, "schedule: edm/edm-ut expects edm_params");
            require(p->sigma_min > 0.0 && p->sigma_min < p->sigma_max,
                    "schedule: need 0 < sigma_min < sigma_max");
            require(p->rho > 0.0, "schedule: need rho > 0");
            break;
        }
        case schedule_family::otfm:
            require(std::holds_alternative<otfm_params>(params),
                    "schedule: otfm expects otfm_params");
            break;
        case schedule_family::ddpm_linear: {
            const auto* p = std::get_if<ddpm_linear_params>(&params);
            require(p != nullptr, "schedule: ddpm-linear expects ddpm_linear_params");
            require(p->beta_min > 0.0 && p->beta_min < p->beta_max,
                    "schedule: need 0 < beta_min < beta_max");
            break;
        }
        case schedule_family::ddpm_cos: {
            const auto* p = std::get_if<ddpm_cos_params>(&params);
            require(p != nullptr, "schedule: ddpm-cos expects ddpm_cos_params");
            require(p->s > 0.0, "schedule: need s > 0");
            require(p->nu > 0.0, "schedule: need nu > 0");
            break;
        }
        case schedule_family::issnr: {
            const auto* p = std::get_if<issnr_params>(&params);
            require(p != nullptr, "schedule: issnr expects issnr_params");
            require(p->eta > 0.0, "schedule: need eta > 0");
            require(p->t_min > 0.0 && p->t_min < p->t_max && p->t_max < 1.0,
                    "schedule: need 0 < t_min < t_max < 1");
            break;
        }
    }
}

inline time_interval schedule_spec::domain() const {
    switch (family) {
        case schedule_family::smld:
        case schedule_family::edm_ut:
        case schedule_family::issnr:
            return {0.0, 1.0};
        case schedule_family::edm:
            // time is the sigma value itself; gamma blows up at sigma = 0
            return {eval_eps, std::get<edm_params>(params).sigma_max};
        case schedule_family::otfm:
        case schedule_family::ddpm_cos:
            return {eval_eps, 1.0 - eval_eps};
        case schedule_family::ddpm_linear:
            return {eval_eps, 1.0};
    }
    throw std::logic_error("schedule: unknown family");
}

inline bool schedule_spec::singular_at_data_end() const {
    switch (family) {
        case schedule_family::otfm:
        case schedule_family::ddpm_linear:
        case schedule_family::ddpm_cos:
        case schedule_family::edm:
            return true;
        default:
            return false;
    }
}

/// gamma^2 of the inverse-sigmoid SNR schedule,
///   gamma^2(t) = (1/u - 1)^(2 eta) * exp(2 kappa),  u = t (t_max - t_min) + t_min,
/// evaluated in log space.
inline double eval_issnr(double t, double eta, double kappa, double t_min, double t_max) {
    detail::require(eta > 0.0, "issnr: need eta > 0");
    detail::require(t_min > 0.0 && t_min < t_max && t_max < 1.0,
                    "issnr: need 0 < t_min < t_max < 1");
    detail::require(t >= 0.0 && t <= 1.0, "issnr: need t in [0, 1]");
    const double u = t * (t_max - t_min) + t_min;
    const double log_snr_sq = 2.0 * eta * (std::log1p(-u) - std::log(u)) + 2.0 * kappa;
    return std::exp(log_snr_sq);
}

/// eta of the NFE-scaled ISSNR variant: 2 + max(0, log2(nfe + 1) - 3),
/// used with kappa = 0.
inline double issnr_scaled_eta(std::size_t nfe) {
    detail::require(nfe >= 1, "issnr_scaled_eta: need nfe >= 1");
    return 2.0 + std::max(0.0, std::log2(static_cast<double>(nfe) + 1.0) - 3.0);
}

namespace detail {

inline tv_part eval_tv(const schedule_spec& spec, double t) {
    if (spec.vp || spec.family == schedule_family::issnr ||
        spec.family == schedule_family::ddpm_linear ||
        spec.family == schedule_family::ddpm_cos) {
        return {1.0, 0.0};
    }
    switch (spec.family) {
        case schedule_family::smld: {
            const auto& p = std::get<ve_params>(spec.params);
            const double big_l = std::log(p.sigma_max / p.sigma_min);
            const double b2 = p.sigma_min * p.sigma_min * std::exp(2.0 * big_l * t);
            const double tv = 1.0 + b2;
            return {tv, big_l * b2 / tv};
        }
        case schedule_family::edm: {
            const double tv = 1.0 + t * t;
            return {tv, t / tv};
        }
        case schedule_family::edm_ut: {
            const auto& p = std::get<edm_params>(spec.params);
            const double ra = std::pow(p.sigma_max, 1.0 / p.rho);
            const double rb = std::pow(p.sigma_min, 1.0 / p.rho);
            const double s = ra + (1.0 - t) * (rb - ra);
            const double sig_sq = std::exp(2.0 * p.rho * std::log(s));
            const double tv = 1.0 + sig_sq;
            // d tau^2/dt = 2 rho s^(2 rho - 1) (ra - rb)
            return {tv, p.rho * (ra - rb) * sig_sq / (s * tv)};
        }
        case schedule_family::otfm: {
            const double tv = 1.0 - 2.0 * t * (1.0 - t);
            return {tv, (2.0 * t - 1.0) / tv};
        }
        default:
            throw std::logic_error("schedule: unreachable tv branch");
    }
}

// gamma^2 in log space plus d log gamma / dt. Throws std::domain_error where
// gamma is undefined; callers are expected to pass times inside the domain.
inline snr_part eval_snr(const schedule_spec& spec, double t) {
    switch (spec.family) {
        case schedule_family::smld: {
            const auto& p = std::get<ve_params>(spec.params);
            const double big_l = std::log(p.sigma_max / p.sigma_min);
            return {-2.0 * (std::log(p.sigma_min) + big_l * t), -big_l};
        }
        case schedule_family::edm: {
            if (t <= 0.0) throw std::domain_error("edm: gamma undefined at sigma = 0");
            return {-2.0 * std::log(t), -1.0 / t};
        }
        case schedule_family::edm_ut: {
            const auto& p = std::get<edm_params>(spec.params);
            const double ra = std::pow(p.sigma_max, 1.0 / p.rho);
            const double rb = std::pow(p.sigma_min, 1.0 / p.rho);
            const double s = ra + (1.0 - t) * (rb - ra);
            return {-2.0 * p.rho * std::log(s), -p.rho * (ra - rb) / s};
        }
        case schedule_family::otfm: {
            if (t <= 0.0 || t >= 1.0)
                throw std::domain_error("otfm: gamma undefined at t = 0 or t = 1");
            return {2.0 * (std::log1p(-t) - std::log(t)), -1.0 / (t * (1.0 - t))};
        }
        case schedule_family::ddpm_linear: {
            if (t <= 0.0) throw std::domain_error("ddpm-linear: gamma undefined at t = 0");
            const auto& p = std::get<ddpm_linear_params>(spec.params);
            const double spread = p.beta_max - p.beta_min;
            const double big_b = 0.5 * t * t * spread + t * p.beta_min;
            const double db = t * spread + p.beta_min;
            // gamma^2 = 1/(e^B - 1); d log gamma^2/dt = -B'/(1 - e^-B)
            return {-std::log(std::expm1(big_b)), 0.5 * db / std::expm1(-big_b)};
        }
        case schedule_family::ddpm_cos: {
            if (t <= 0.0 || t >= 1.0)
                throw std::domain_error("ddpm-cos: gamma undefined at t = 0 or t = 1");
            const auto& p = std::get<ddpm_cos_params>(spec.params);
            const double c = (std::numbers::pi / 2.0) / (1.0 + p.s);
            const double theta0 = c * p.s;
            const double theta = c * (std::pow(t, p.nu) + p.s);
            const double u = std::cos(theta) * std::cos(theta);
            const double u0 = std::cos(theta0) * std::cos(theta0);
            // u0 - u = sin(theta + theta0) sin(theta - theta0), cancellation-free
            const double gap = std::sin(theta + theta0) * std::sin(theta - theta0);
            const double dtheta = c * p.nu * std::pow(t, p.nu - 1.0);
            const double du = -std::sin(2.0 * theta) * dtheta;
            return {std::log(u) - std::log(gap), 0.5 * du * u0 / (u * gap)};
        }
        case schedule_family::issnr: {
            const auto& p = std::get<issnr_params>(spec.params);
            const double w = p.t_max - p.t_min;
            const double u = t * w + p.t_min;
            return {2.0 * p.eta * (std::log1p(-u) - std::log(u)) + 2.0 * p.kappa,
                    -p.eta * w / (u * (1.0 - u))};
        }
    }
    throw std::logic_error("schedule: unknown family");
}

}  // namespace detail

/// Evaluate the schedule at time t. The TV side is defined for any t in the
/// family's natural range and is evaluated at the requested time; the SNR
/// side is evaluated at t clamped into domain(), so that singular endpoints
/// (OTFM at exactly 0 or 1, ...) yield the clamped value rather than an
/// error. With eval_eps = 0 the clamp is a no-op and singular times throw
/// std::domain_error.
inline schedule_point eval_point(const schedule_spec& spec, double t) {
    spec.validate();
    const auto dom = spec.domain();
    const double natural_hi = (spec.family == schedule_family::edm) ? dom.hi : 1.0;
    detail::require(t >= 0.0 && t <= natural_hi, "eval_point: t outside the schedule's range");

    const double tg = std::clamp(t, dom.lo, dom.hi);
    const auto snr = detail::eval_snr(spec, tg);
    const auto tv = detail::eval_tv(spec, t);
    return {tv.tv_sq, std::exp(snr.log_snr_sq), tv.dlog_tv, snr.dlog_snr};
}

/// SNR at the schedule's natural endpoints; singular limits map to +inf / 0.
inline snr_range snr_endpoints(const schedule_spec& spec) {
    spec.validate();
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (spec.family) {
        case schedule_family::smld: {
            const auto& p = std::get<ve_params>(spec.params);
            return {1.0 / p.sigma_min, 1.0 / p.sigma_max};
        }
        case schedule_family::edm: {
            const auto& p = std::get<edm_params>(spec.params);
            return {inf, 1.0 / p.sigma_max};
        }
        case schedule_family::edm_ut: {
            const auto& p = std::get<edm_params>(spec.params);
            return {1.0 / p.sigma_min, 1.0 / p.sigma_max};
        }
        case schedule_family::otfm:
        case schedule_family::ddpm_cos:
            return {inf, 0.0};
        case schedule_family::ddpm_linear: {
            const auto& p = std::get<ddpm_linear_params>(spec.params);
            const double big_b1 = 0.5 * (p.beta_max - p.beta_min) + p.beta_min;
            return {inf, 1.0 / std::sqrt(std::expm1(big_b1))};
        }
        case schedule_family::issnr: {
            const auto& p = std::get<issnr_params>(spec.params);
            const double gmax = std::exp(p.eta * std::log(1.0 / p.t_min - 1.0) + p.kappa);
            const double gmin = std::exp(p.eta * std::log(1.0 / p.t_max - 1.0) + p.kappa);
            return {gmax, gmin};
        }
    }
    throw std::logic_error("schedule: unknown family");
}

/// Kernel coefficients from a schedule point:
///   a = sqrt(tau^2 gamma^2 / (1 + gamma^2)),  b = sqrt(tau^2 / (1 + gamma^2)).
/// Computed via logs so that huge gamma^2 degrades gracefully to (tau, 0).
inline kernel_coeffs to_kernel(const schedule_point& p) {
    detail::require(p.tv_sq > 0.0 && p.snr_sq > 0.0, "to_kernel: need tv_sq > 0 and snr_sq > 0");
    const double tau = std::sqrt(p.tv_sq);
    const double l1p = std::log1p(p.snr_sq);
    const double a = std::isinf(p.snr_sq) ? tau : tau * std::exp(0.5 * (std::log(p.snr_sq) - l1p));
    const double b = std::isinf(p.snr_sq) ? 0.0 : tau * std::exp(-0.5 * l1p);
    return {a, b};
}

// ---------------------------------------------------------------------------
// Catalog

struct catalog_entry {
    std::string name;
    schedule_spec spec;
};

/// The ten standard catalog rows with their default parameters.
inline const std::vector<catalog_entry>& catalog() {
    static const std::vector<catalog_entry> rows = [] {
        std::vector<catalog_entry> v;
        v.push_back({"smld", {schedule_family::smld, false, ve_params{}}});
        v.push_back({"edm", {schedule_family::edm, false, edm_params{}}});
        v.push_back({"edm-ut", {schedule_family::edm_ut, false, edm_params{}}});
        v.push_back({"otfm", {schedule_family::otfm, false, otfm_params{}}});
        v.push_back({"ddpm-linear", {schedule_family::ddpm_linear, false, ddpm_linear_params{}}});
        v.push_back({"ddpm-cos", {schedule_family::ddpm_cos, false, ddpm_cos_params{}}});
        v.push_back({"vp-smld", {schedule_family::smld, true, ve_params{}}});
        v.push_back({"vp-edm-ut", {schedule_family::edm_ut, true, edm_params{}}});
        v.push_back({"vp-otfm", {schedule_family::otfm, true, otfm_params{}}});
        v.push_back({"vp-issnr", {schedule_family::issnr, false, issnr_params{}}});
        return v;
    }();
    return rows;
}

inline const char* family_name(schedule_family f) {
    switch (f) {
        case schedule_family::smld: return "smld";
        case schedule_family::edm: return "edm";
        case schedule_family::edm_ut: return "edm-ut";
        case schedule_family::otfm: return "otfm";
        case schedule_family::ddpm_linear: return "ddpm-linear";
        case schedule_family::ddpm_cos: return "ddpm-cos";
        case schedule_family::issnr: return "issnr";
    }
    return "?";
}

inline schedule_family family_from_name(const std::string& name) {
    for (auto f : {schedule_family::smld, schedule_family::edm, schedule_family::edm_ut,
                   schedule_family::otfm, schedule_family::ddpm_linear,
                   schedule_family::ddpm_cos, schedule_family::issnr}) {
        if (name == family_name(f)) return f;
    }
    throw std::invalid_argument("schedule: unknown family '" + name + "'");
}

/// Look up a spec by catalog name. Accepts the ten catalog rows, bare family
/// names, a "vp-" prefix on any family, and the "issnr-mol" preset
/// (eta = 1, kappa = 2, t in [0.01, 0.99]).
inline schedule_spec spec_by_name(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == "issnr-mol") {
        return {schedule_family::issnr, false, issnr_params{1.0, 2.0, 0.01, 0.99}};
    }
    for (const auto& row : catalog()) {
        if (row.name == name) return row.spec;
    }
    bool vp = false;
    std::string base = name;
    if (base.rfind("vp-", 0) == 0) {
        vp = true;
        base = base.substr(3);
    }
    schedule_spec spec;
    spec.family = family_from_name(base);
    spec.vp = vp;
    switch (spec.family) {
        case schedule_family::smld: spec.params = ve_params{}; break;
        case schedule_family::edm:
        case schedule_family::edm_ut: spec.params = edm_params{}; break;
        case schedule_family::otfm: spec.params = otfm_params{}; break;
        case schedule_family::ddpm_linear: spec.params = ddpm_linear_params{}; break;
        case schedule_family::ddpm_cos: spec.params = ddpm_cos_params{}; break;
        case schedule_family::issnr: spec.params = issnr_params{}; break;
    }
    return spec;
}

}  // namespace tvsnr
