// solvers.hpp — reverse-process integrators over a time grid: first-order
// Euler and second-order Heun for the probability flow ODE, Euler-Maruyama
// for the reverse SDE with stochasticity lambda. All solvers march forward
// time downward (t_max -> t_min) and record the state at every node.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tvsnr/grid.hpp"
#include "tvsnr/mixture.hpp"
#include "tvsnr/rng.hpp"
#include "tvsnr/schedule.hpp"
#include "tvsnr/sde.hpp"

namespace tvsnr {

enum class solver_kind { euler, heun, sde };

/// A solved reverse path: states[0] is the prior draw at grid.t_max(),
/// states[steps] is the generated sample at grid.t_min().
struct trajectory {
    time_grid grid;
    std::size_t dim = 1;
    std::vector<double> states;  // (steps + 1) x dim, row-major
    std::uint64_t seed = 0;
    double lambda = 0.0;

    std::span<const double> state(std::size_t node) const {
        return {states.data() + node * dim, dim};
    }
    std::span<double> state(std::size_t node) {
        return {states.data() + node * dim, dim};
    }
    std::span<const double> final_state() const { return state(grid.steps()); }
};

/// Schedule quantities pre-evaluated at one grid node; shared across a batch.
struct node_coeffs {
    double t;
    kernel_coeffs kern;
    sde_coeffs sde;
};

inline std::vector<node_coeffs> tabulate_nodes(const schedule_spec& spec, const time_grid& grid) {
    spec.validate();
    grid.validate();
    const auto dom = spec.domain();
    std::vector<node_coeffs> tab;
    tab.reserve(grid.times.size());
    for (double t : grid.times) {
        const auto p = eval_point(spec, std::clamp(t, dom.lo, dom.hi));
        tab.push_back({t, to_kernel(p), tvsnr_sde(p)});
    }
    return tab;
}

/// Draw from the prior N(0, tau^2(t_hi) I) at the schedule's upper bound.
inline std::vector<double> sample_prior(const schedule_spec& spec, std::size_t dim,
                                        rng_stream& rng) {
    spec.validate();
    detail::require(dim >= 1, "sample_prior: need dim >= 1");
    const double tau = std::sqrt(eval_point(spec, spec.domain().hi).tv_sq);
    std::vector<double> x(dim);
    for (double& v : x) v = tau * rng.normal();
    return x;
}

namespace detail {

// Whether the last step should drop to Euler: standard practice for the
// rho grid's final sigma = 0 node, and for schedules whose gamma blows up at
// the data end when the grid runs all the way to the clamped bound.
inline bool euler_final_step(const schedule_spec& spec, const time_grid& grid) {
    if (grid.kind == grid_kind::edm_rho) return true;
    if (!spec.singular_at_data_end()) return false;
    const double lo = spec.domain().lo;
    return grid.t_min() <= lo + 1e-12 * std::max(1.0, lo);
}

// One Euler-Maruyama sweep; lambda = 0 reproduces the Euler ODE path bit for
// bit because the noise branch is skipped entirely.
inline trajectory em_sweep(const std::vector<node_coeffs>& tab,
                           const time_grid& grid, const mixture& mix,
                           std::span<const double> prior, double lambda, rng_stream rng,
                           std::uint64_t seed_label) {
    const std::size_t n = grid.steps();
    const std::size_t d = mix.dim;
    trajectory traj{grid, d, std::vector<double>((n + 1) * d), seed_label, lambda};
    std::copy(prior.begin(), prior.end(), traj.state(0).begin());

    std::vector<double> scr(mix.components()), score_buf(d), drift(d);
    for (std::size_t k = 0; k < n; ++k) {
        const double h = grid.times[k + 1] - grid.times[k];  // negative
        const auto xk = traj.state(k);
        auto xn = traj.state(k + 1);
        score_core(mix, tab[k].kern, xk, score_buf, scr);
        const double noise_scale = reverse_rhs(tab[k].sde, lambda, xk, score_buf, drift);
        for (std::size_t i = 0; i < d; ++i) xn[i] = xk[i] + h * drift[i];
        if (lambda > 0.0 && k + 1 < n) {  // final step injects no noise
            const double amp = noise_scale * std::sqrt(-h);
            for (std::size_t i = 0; i < d; ++i) xn[i] += amp * rng.normal();
        }
    }
    return traj;
}

inline trajectory heun_sweep(const schedule_spec& spec, const std::vector<node_coeffs>& tab,
                             const time_grid& grid, const mixture& mix,
                             std::span<const double> prior, std::uint64_t seed_label) {
    const std::size_t n = grid.steps();
    const std::size_t d = mix.dim;
    trajectory traj{grid, d, std::vector<double>((n + 1) * d), seed_label, 0.0};
    std::copy(prior.begin(), prior.end(), traj.state(0).begin());

    const bool euler_last = euler_final_step(spec, grid);
    std::vector<double> scr(mix.components()), score_buf(d), d1(d), d2(d), xe(d);
    for (std::size_t k = 0; k < n; ++k) {
        const double h = grid.times[k + 1] - grid.times[k];
        const auto xk = traj.state(k);
        auto xn = traj.state(k + 1);
        score_core(mix, tab[k].kern, xk, score_buf, scr);
        reverse_rhs(tab[k].sde, 0.0, xk, score_buf, d1);
        if (k + 1 == n && euler_last) {
            for (std::size_t i = 0; i < d; ++i) xn[i] = xk[i] + h * d1[i];
            continue;
        }
        for (std::size_t i = 0; i < d; ++i) xe[i] = xk[i] + h * d1[i];
        score_core(mix, tab[k + 1].kern, xe, score_buf, scr);
        reverse_rhs(tab[k + 1].sde, 0.0, xe, score_buf, d2);
        for (std::size_t i = 0; i < d; ++i) xn[i] = xk[i] + 0.5 * h * (d1[i] + d2[i]);
    }
    return traj;
}

}  // namespace detail

/// Probability-flow ODE solve with first-order Euler steps.
inline trajectory solve_euler(const schedule_spec& spec, const time_grid& grid,
                              const mixture& mix, std::span<const double> prior_sample) {
    mix.validate();
    detail::require(prior_sample.size() == mix.dim, "solve: prior dimension mismatch");
    const auto tab = tabulate_nodes(spec, grid);
    return detail::em_sweep(tab, grid, mix, prior_sample, 0.0, rng_stream{}, 0);
}

/// Probability-flow ODE solve with Heun's trapezoidal predictor-corrector;
/// the step onto the final node falls back to Euler when the schedule is
/// singular there.
inline trajectory solve_heun(const schedule_spec& spec, const time_grid& grid,
                             const mixture& mix, std::span<const double> prior_sample) {
    mix.validate();
    detail::require(prior_sample.size() == mix.dim, "solve: prior dimension mismatch");
    const auto tab = tabulate_nodes(spec, grid);
    return detail::heun_sweep(spec, tab, grid, mix, prior_sample, 0);
}

/// Euler-Maruyama solve of the reverse SDE. lambda = 0 reproduces
/// solve_euler exactly; the last step injects no noise.
inline trajectory solve_sde(const schedule_spec& spec, const time_grid& grid,
                            const mixture& mix, std::span<const double> prior_sample,
                            double lambda, std::uint64_t seed) {
    mix.validate();
    detail::require(lambda >= 0.0, "solve_sde: need lambda >= 0");
    detail::require(prior_sample.size() == mix.dim, "solve: prior dimension mismatch");
    const auto tab = tabulate_nodes(spec, grid);
    return detail::em_sweep(tab, grid, mix, prior_sample, lambda,
                            rng_stream::from_seed(seed, 0), seed);
}

// ---------------------------------------------------------------------------
// Batches

/// Run fn(i) for i in [0, n) on up to `threads` workers. Output slots must be
/// disjoint per index; any exception is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    const unsigned workers =
        std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Solve `batch` independent trajectories. Trajectory j draws its prior and
/// noise from the stream derived from (seed, j), so results do not depend on
/// the thread count or scheduling order.
inline std::vector<trajectory> solve_batch(const schedule_spec& spec, const time_grid& grid,
                                           const mixture& mix, solver_kind solver,
                                           double lambda, std::size_t batch,
                                           std::uint64_t seed, unsigned threads = 1) {
    spec.validate();
    mix.validate();
    detail::require(batch >= 1, "solve_batch: need batch >= 1");
    detail::require(lambda >= 0.0, "solve_batch: need lambda >= 0");
    if (solver != solver_kind::sde)
        detail::require(lambda == 0.0, "solve_batch: lambda > 0 requires the sde solver");

    const auto tab = tabulate_nodes(spec, grid);
    std::vector<trajectory> out(batch);
    parallel_for(batch, threads, [&](std::size_t j) {
        rng_stream rng = rng_stream::from_seed(seed, j);
        const auto prior = sample_prior(spec, mix.dim, rng);
        switch (solver) {
            case solver_kind::euler:
                out[j] = detail::em_sweep(tab, grid, mix, prior, 0.0, rng, seed);
                break;
            case solver_kind::heun:
                out[j] = detail::heun_sweep(spec, tab, grid, mix, prior, seed);
                break;
            case solver_kind::sde:
                out[j] = detail::em_sweep(tab, grid, mix, prior, lambda, rng, seed);
                break;
        }
    });
    return out;
}

/// The grid a schedule is usually integrated on: uniform over its valid
/// domain, except the rho grid for the sigma-valued EDM family.
inline time_grid default_grid(const schedule_spec& spec, std::size_t steps) {
    const auto dom = spec.domain();
    if (spec.family == schedule_family::edm) {
        const auto& p = std::get<edm_params>(spec.params);
        return edm_grid(std::max<std::size_t>(steps, 2), p.sigma_min, p.sigma_max, p.rho, dom.lo);
    }
    return uniform_grid(steps, dom.lo, dom.hi);
}

}  // namespace tvsnr
