#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "tvsnr/analysis.hpp"
#include "tvsnr/quadrature.hpp"
#include "helpers.hpp"

using namespace tvsnr;
using testutil::rel_err;

namespace {

// Hand-built straight-line batch x(t) = x0 + t (x1 - x0) over the full unit
// interval; its velocity oracle is the constant chord.
std::vector<trajectory> straight_batch(std::size_t count) {
    std::vector<trajectory> batch(count);
    auto rng = rng_stream::from_seed(31);
    const auto grid = uniform_grid(64, 0.0, 1.0);
    for (auto& traj : batch) {
        const double x1 = rng.normal();          // prior end
        const double x0 = 2.0 * rng.uniform();   // data end
        traj.grid = grid;
        traj.dim = 1;
        traj.lambda = 0.0;
        traj.states.resize(grid.times.size());
        for (std::size_t k = 0; k < grid.times.size(); ++k) {
            traj.states[k] = x0 + grid.times[k] * (x1 - x0);
        }
    }
    return batch;
}

}  // namespace

TEST_CASE("curvature: straight lines with matching velocity have zero curvature") {
    const auto batch = straight_batch(16);
    auto rhs = [&](std::size_t j, std::size_t, std::span<const double>, std::span<double> out) {
        out[0] = batch[j].state(0)[0] - batch[j].final_state()[0];
    };
    const auto report = curvature_core(batch, rhs);
    for (double v : report.local) CHECK(v == 0.0);
    CHECK(report.global == 0.0);
}

TEST_CASE("curvature: single-atom otfm flow is a straight line") {
    const auto spec = spec_by_name("otfm");
    const auto mix = single_delta(0.0);
    const auto batch =
        solve_batch(spec, default_grid(spec, 512), mix, solver_kind::heun, 0.0, 64, 9, 1);
    const auto report = curvature(batch, spec, mix);
    CHECK(report.global >= 0.0);
    CHECK(report.global <= 1e-8);
}

TEST_CASE("curvature: rejects mixed grids and stochastic batches") {
    const auto spec = spec_by_name("vp-otfm");
    const auto mix = three_delta();
    auto batch = solve_batch(spec, default_grid(spec, 32), mix, solver_kind::heun, 0.0, 4, 9, 1);

    auto mixed = batch;
    mixed.push_back(solve_batch(spec, default_grid(spec, 64), mix, solver_kind::heun, 0.0,
                                1, 9, 1)[0]);
    CHECK_THROWS_AS(curvature(mixed, spec, mix), std::invalid_argument);

    auto noisy = batch;
    noisy[0].lambda = 1.0;
    CHECK_THROWS_AS(curvature(noisy, spec, mix), std::invalid_argument);
}

TEST_CASE("curvature: invariant under batch permutation") {
    const auto spec = spec_by_name("issnr-mol");
    const auto mix = three_delta();
    auto batch = solve_batch(spec, default_grid(spec, 64), mix, solver_kind::heun, 0.0, 50, 9, 1);
    const auto before = curvature(batch, spec, mix);
    std::shuffle(batch.begin(), batch.end(), std::mt19937{1234});
    const auto after = curvature(batch, spec, mix);
    CHECK(before.global == after.global);
    CHECK(before.local == after.local);
}

TEST_CASE("curvature ordering on the toy: vp-issnr below otfm below edm-ut") {
    const auto mix = three_delta();
    auto global_of = [&](const schedule_spec& spec) {
        const auto batch =
            solve_batch(spec, default_grid(spec, 256), mix, solver_kind::heun, 0.0, 200, 9, 1);
        return curvature(batch, spec, mix).global;
    };
    const double c_issnr = global_of(spec_by_name("issnr-mol"));
    const double c_otfm = global_of(spec_by_name("otfm"));
    const double c_edm_ut = global_of(spec_by_name("edm-ut"));
    CHECK(c_issnr < c_otfm);
    CHECK(c_otfm < c_edm_ut);
}

TEST_CASE("relative_support: endpoint and closed-form values") {
    const auto smld = spec_by_name("smld");
    {
        const auto report = relative_support(smld, uniform_grid(2, 0.0, 1.0));
        CHECK(report.rel_support[0] == 1.0);
        CHECK(rel_err(report.rel_support[1], 0.01414213562373095) <= 1e-10);  // 5000^-1/2
        for (std::size_t i = 1; i < report.rel_support.size(); ++i) {
            CHECK(report.rel_support[i] <= report.rel_support[i - 1]);
        }
    }
    // VP-OTFM crosses 0.9 near t = 0.674
    const auto vp_otfm = spec_by_name("vp-otfm");
    const auto grid = default_grid(vp_otfm, 4096);
    const auto report = relative_support(vp_otfm, grid);
    double crossing = 0.0;
    for (std::size_t i = report.times.size(); i-- > 1;) {
        if (report.rel_support[i - 1] >= 0.9 && report.rel_support[i] < 0.9) {
            crossing = report.times[i - 1];
            break;
        }
    }
    CHECK(std::abs(crossing - 0.6737082178731281) <= 5e-3);

    for (const auto& row : catalog()) {
        const auto rep = relative_support(row.spec, default_grid(row.spec, 128));
        CHECK(rep.rel_support.front() == 1.0);
        for (double v : rep.rel_support) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("peak_capture: counting and the tie rule") {
    const auto mix = three_delta();
    const double r = std::sqrt(1.5);
    std::vector<std::vector<double>> samples{{0.0}, {r}, {-r}, {r}, {5.0}};
    const auto report = peak_capture(samples, mix, 1e-2);
    CHECK(report.counts == std::vector<std::size_t>{1, 2, 1});
    CHECK(report.outside == 1);
    CHECK(report.total == 5);
    CHECK(report.outside_fraction() == doctest::Approx(0.2));

    // equidistant within tol goes to the lower center index
    mixture two;
    two.weights = {0.5, 0.5};
    two.centers = {0.0, 1.0};
    const auto tie = peak_capture({{0.5}}, two, 0.6);
    CHECK(tie.counts == std::vector<std::size_t>{1, 0});

    std::size_t total = 0;
    for (auto c : report.counts) total += c;
    CHECK(total + report.outside == report.total);
}

TEST_CASE("density_shadow: single-component columns are the exact gaussian") {
    const auto spec = spec_by_name("vp-otfm");
    const auto mix = single_delta(0.4);
    const std::vector<double> t_grid{0.3, 0.7};
    const auto x_grid = testutil::linspace(-4.0, 4.0, 101);
    const auto report = density_shadow(mix, spec, t_grid, x_grid);
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
        const auto k = to_kernel(eval_point(spec, t_grid[ti]));
        for (std::size_t xi = 0; xi < x_grid.size(); ++xi) {
            const double mean = k.a * 0.4;
            const double want = std::exp(-0.5 * (x_grid[xi] - mean) * (x_grid[xi] - mean) /
                                         (k.b * k.b)) /
                                std::sqrt(2.0 * std::numbers::pi * k.b * k.b);
            CHECK(rel_err(report.pdf[ti * x_grid.size() + xi], want) <= 1e-12);
        }
    }
}

TEST_CASE("density_shadow: columns integrate to one") {
    const auto spec = spec_by_name("vp-otfm");
    const auto mix = three_delta();
    const auto dom = spec.domain();
    const auto t_grid = testutil::linspace(dom.lo + 0.05, dom.hi, 7);
    // +-8 sigma_t window, trapezoid in x
    for (double t : t_grid) {
        const auto k = to_kernel(eval_point(spec, t));
        const double tau = std::sqrt(k.a * k.a + k.b * k.b);
        const auto x_grid = testutil::linspace(-8.0 * tau, 8.0 * tau, 2001);
        const auto report = density_shadow(mix, spec, {t}, x_grid);
        double mass = 0.0;
        for (std::size_t i = 0; i + 1 < x_grid.size(); ++i) {
            mass += 0.5 * (report.pdf[i] + report.pdf[i + 1]) * (x_grid[i + 1] - x_grid[i]);
        }
        CHECK_MESSAGE(std::abs(mass - 1.0) <= 1e-4, "t=" << t);
    }
}

TEST_CASE("density_shadow: near-data columns are three spikes at the scaled centers") {
    const auto spec = spec_by_name("issnr-mol");
    const auto mix = three_delta();
    const double t = spec.domain().lo;
    const auto k = to_kernel(eval_point(spec, t));
    const auto x_grid = testutil::linspace(-2.0, 2.0, 4001);
    const auto report = density_shadow(mix, spec, {t}, x_grid);
    // local maxima of the column sit within one grid cell of a*center
    std::vector<double> maxima;
    for (std::size_t i = 1; i + 1 < x_grid.size(); ++i) {
        if (report.pdf[i] > report.pdf[i - 1] && report.pdf[i] > report.pdf[i + 1] &&
            report.pdf[i] > 1.0) {
            maxima.push_back(x_grid[i]);
        }
    }
    REQUIRE(maxima.size() == 3);
    const double r = std::sqrt(1.5);
    const double cell = x_grid[1] - x_grid[0];
    CHECK(std::abs(maxima[0] - k.a * -r) <= cell);
    CHECK(std::abs(maxima[1] - k.a * 0.0) <= cell);
    CHECK(std::abs(maxima[2] - k.a * r) <= cell);
}

TEST_CASE("default shadow lattice covers the documented window") {
    const auto spec = spec_by_name("vp-otfm");
    const auto report = density_shadow(three_delta(), spec);
    CHECK(report.t_grid.size() == 201);
    CHECK(report.x_grid.size() == 401);
    const double tau_max = std::sqrt(eval_point(spec, spec.domain().hi).tv_sq);
    CHECK(report.x_grid.front() == doctest::Approx(-4.0 * tau_max));
    CHECK(report.x_grid.back() == doctest::Approx(4.0 * tau_max));
}
