// grid.hpp — reverse-integration time grids: uniform spacing and the
// rho-power sigma grid
//   sigma_i = (sigma_max^(1/rho) + i/(N-1) (sigma_min^(1/rho) - sigma_max^(1/rho)))^rho
// with sigma_N = 0. Grids are stored in integration order, largest time
// first.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tvsnr/schedule.hpp"

namespace tvsnr {

enum class grid_kind { uniform, edm_rho };

struct time_grid {
    std::vector<double> times;  // strictly decreasing, size = steps + 1
    grid_kind kind = grid_kind::uniform;

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    double t_max() const { return times.front(); }
    double t_min() const { return times.back(); }

    void validate() const {
        detail::require(times.size() >= 2, "time_grid: need at least one step");
        for (std::size_t i = 1; i < times.size(); ++i) {
            detail::require(times[i] < times[i - 1], "time_grid: times must strictly decrease");
        }
    }
};

/// steps + 1 equally spaced nodes from t_max down to t_min.
inline time_grid uniform_grid(std::size_t steps, double t_min, double t_max) {
    detail::require(steps >= 1, "uniform_grid: need steps >= 1");
    detail::require(t_min >= 0.0 && t_min < t_max, "uniform_grid: need 0 <= t_min < t_max");
    time_grid g;
    g.kind = grid_kind::uniform;
    g.times.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        g.times[k] = t_max + (t_min - t_max) * (static_cast<double>(k) / steps);
    }
    g.times.back() = t_min;
    return g;
}

/// The rho-power grid over N steps: sigma_0 = sigma_max, sigma_(N-1) =
/// sigma_min, sigma_N = 0. Since sigma(t) = t for the matching schedule,
/// times equal sigmas; the final sigma = 0 node is mapped to t_last (the
/// schedule's clamped lower bound) to keep gamma finite.
inline time_grid edm_grid(std::size_t steps, double sigma_min, double sigma_max, double rho,
                          double t_last = 1e-5) {
    detail::require(steps >= 2, "edm_grid: need steps >= 2");
    detail::require(sigma_min > 0.0 && sigma_min < sigma_max,
                    "edm_grid: need 0 < sigma_min < sigma_max");
    detail::require(rho > 0.0, "edm_grid: need rho > 0");
    detail::require(t_last >= 0.0 && t_last < sigma_min, "edm_grid: need 0 <= t_last < sigma_min");
    time_grid g;
    g.kind = grid_kind::edm_rho;
    g.times.resize(steps + 1);
    const double ra = std::pow(sigma_max, 1.0 / rho);
    const double rb = std::pow(sigma_min, 1.0 / rho);
    for (std::size_t i = 0; i < steps; ++i) {
        const double frac = static_cast<double>(i) / (steps - 1);
        g.times[i] = std::pow(ra + frac * (rb - ra), rho);
    }
    g.times[0] = sigma_max;
    g.times[steps - 1] = sigma_min;
    g.times[steps] = t_last;
    return g;
}

}  // namespace tvsnr
