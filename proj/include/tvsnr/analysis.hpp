// analysis.hpp — trajectory diagnostics: local curvature
//   E[ || (x(1) - x(0)) - x'(t) ||^2 ]
// with its time integral, the relative support b(t)/b(t_max) of the
// marginal, peak-capture statistics and density shadows on a lattice.
// x(1) and x(0) are the trajectory's endpoint states (prior draw and
// generated sample); x'(t) is the analytic reverse-ODE right-hand side, not
// a finite difference, so the local curvature is grid-independent up to
// solve error.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tvsnr/mixture.hpp"
#include "tvsnr/solvers.hpp"

namespace tvsnr {

struct curvature_report {
    std::vector<double> times;
    std::vector<double> local;  // squared state units, >= 0
    double global = 0.0;        // trapezoidal integral of local over t
};

struct support_report {
    std::vector<double> times;
    std::vector<double> rel_support;  // b(t)/b(t_max), in [0, 1]
};

struct peak_report {
    std::vector<std::size_t> counts;  // per center, same order as the mixture
    std::size_t outside = 0;
    std::size_t total = 0;

    std::vector<double> fractions() const {
        std::vector<double> f(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) {
            f[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
        }
        return f;
    }
    double outside_fraction() const {
        return static_cast<double>(outside) / static_cast<double>(total);
    }
};

struct shadow_report {
    std::vector<double> t_grid;
    std::vector<double> x_grid;
    std::vector<double> pdf;  // t-major: pdf[ti * x_grid.size() + xi]
};

namespace detail {

inline void check_shared_ode_batch(const std::vector<trajectory>& batch) {
    require(!batch.empty(), "curvature: empty batch");
    const auto& ref = batch.front().grid.times;
    for (const auto& traj : batch) {
        require(traj.lambda == 0.0, "curvature: defined for ODE batches (lambda = 0) only");
        require(traj.grid.times == ref, "curvature: trajectories must share one grid");
        require(traj.dim == batch.front().dim, "curvature: dimension mismatch in batch");
    }
}

// Order-independent sum: sorting the addends first makes the result
// invariant under batch permutation and thread count.
inline double stable_mean(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

}  // namespace detail

/// Curvature with a caller-supplied velocity oracle
/// rhs(traj_index, node_index, x, out). Used by the schedule-based overload
/// below and by synthetic test flows.
template <class Rhs>
curvature_report curvature_core(const std::vector<trajectory>& batch, Rhs&& rhs) {
    detail::check_shared_ode_batch(batch);
    const auto& times = batch.front().grid.times;
    const std::size_t nodes = times.size();
    const std::size_t d = batch.front().dim;

    curvature_report report;
    report.times = times;
    report.local.assign(nodes, 0.0);

    std::vector<double> velocity(d), chord(d), per_traj(batch.size());
    for (std::size_t k = 0; k < nodes; ++k) {
        for (std::size_t j = 0; j < batch.size(); ++j) {
            const auto& traj = batch[j];
            const auto prior = traj.state(0);
            const auto sample = traj.final_state();
            for (std::size_t i = 0; i < d; ++i) chord[i] = prior[i] - sample[i];
            rhs(j, k, traj.state(k), std::span<double>(velocity));
            double sq = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double dev = chord[i] - velocity[i];
                sq += dev * dev;
            }
            per_traj[j] = sq;
        }
        report.local[k] = detail::stable_mean(per_traj);
    }

    double acc = 0.0;  // times decrease, so t_k - t_(k+1) > 0
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        acc += 0.5 * (report.local[k] + report.local[k + 1]) * (times[k] - times[k + 1]);
    }
    report.global = acc;
    return report;
}

/// Local and global curvature of an ODE batch under the schedule's exact
/// reverse right-hand side.
inline curvature_report curvature(const std::vector<trajectory>& batch,
                                  const schedule_spec& spec, const mixture& mix) {
    detail::check_shared_ode_batch(batch);
    mix.validate();
    detail::require(batch.front().dim == mix.dim, "curvature: mixture dimension mismatch");
    const auto tab = tabulate_nodes(spec, batch.front().grid);
    std::vector<double> scr(mix.components()), score_buf(mix.dim);
    auto rhs = [&](std::size_t, std::size_t k, std::span<const double> x,
                   std::span<double> out) {
        detail::score_core(mix, tab[k].kern, x, score_buf, scr);
        reverse_rhs(tab[k].sde, 0.0, x, score_buf, out);
    };
    return curvature_core(batch, rhs);
}

/// b(t)/b(t_max) along the grid; equals 1 at the grid's largest time.
inline support_report relative_support(const schedule_spec& spec, const time_grid& grid) {
    const auto tab = tabulate_nodes(spec, grid);
    support_report report;
    report.times = grid.times;
    report.rel_support.reserve(tab.size());
    const double b_max = tab.front().kern.b;
    for (const auto& nc : tab) report.rel_support.push_back(nc.kern.b / b_max);
    return report;
}

/// Assign each sample to the nearest mixture center if within tol (ties go
/// to the lowest center index), else count it as outside.
inline peak_report peak_capture(const std::vector<std::vector<double>>& samples,
                                const mixture& mix, double tol) {
    mix.validate();
    detail::require(tol > 0.0, "peak_capture: need tol > 0");
    detail::require(!samples.empty(), "peak_capture: empty sample set");
    peak_report report;
    report.counts.assign(mix.components(), 0);
    report.total = samples.size();
    for (const auto& x : samples) {
        detail::require(x.size() == mix.dim, "peak_capture: sample dimension mismatch");
        std::size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mix.components(); ++i) {
            const auto c = mix.center(i);
            double sq = 0.0;
            for (std::size_t d = 0; d < mix.dim; ++d) {
                const double diff = x[d] - c[d];
                sq += diff * diff;
            }
            const double dist = std::sqrt(sq);
            if (dist < best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        if (best_dist <= tol) {
            ++report.counts[best];
        } else {
            ++report.outside;
        }
    }
    return report;
}

inline std::vector<std::vector<double>> final_states(const std::vector<trajectory>& batch) {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& traj : batch) {
        const auto s = traj.final_state();
        out.emplace_back(s.begin(), s.end());
    }
    return out;
}

/// Marginal density p_t(x) on a (t, x) lattice, for 1-D mixtures.
inline shadow_report density_shadow(const mixture& mix, const schedule_spec& spec,
                                    const std::vector<double>& t_grid,
                                    const std::vector<double>& x_grid) {
    mix.validate();
    detail::require(mix.dim == 1, "density_shadow: 1-D mixtures only");
    detail::require(!t_grid.empty() && !x_grid.empty(), "density_shadow: empty grid");
    spec.validate();
    const auto dom = spec.domain();

    shadow_report report;
    report.t_grid = t_grid;
    report.x_grid = x_grid;
    report.pdf.resize(t_grid.size() * x_grid.size());
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
        const auto kern =
            to_kernel(eval_point(spec, std::clamp(t_grid[ti], dom.lo, dom.hi)));
        for (std::size_t xi = 0; xi < x_grid.size(); ++xi) {
            const double x = x_grid[xi];
            report.pdf[ti * x_grid.size() + xi] =
                std::exp(marginal_logpdf(mix, kern, std::span<const double>(&x, 1)));
        }
    }
    return report;
}

/// Default lattice of the density shadow: 201 uniform times over the valid
/// interval, 401 x values spanning +-4 tau(t_max).
inline shadow_report density_shadow(const mixture& mix, const schedule_spec& spec) {
    const auto dom = spec.domain();
    const double half_width = 4.0 * std::sqrt(eval_point(spec, dom.hi).tv_sq);
    std::vector<double> t_grid(201), x_grid(401);
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        t_grid[i] = dom.lo + (dom.hi - dom.lo) * static_cast<double>(i) / (t_grid.size() - 1);
    }
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        x_grid[i] = -half_width + 2.0 * half_width * static_cast<double>(i) / (x_grid.size() - 1);
    }
    return density_shadow(mix, spec, t_grid, x_grid);
}

}  // namespace tvsnr
