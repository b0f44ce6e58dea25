// io.hpp — JSON serialization of specs, mixtures, grids and experiment
// configs, plus the CSV writers. Floats are printed with 17 significant
// digits so that rereading a file reproduces the exact doubles.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvsnr/analysis.hpp"
#include "tvsnr/grid.hpp"
#include "tvsnr/mixture.hpp"
#include "tvsnr/schedule.hpp"
#include "tvsnr/solvers.hpp"

namespace tvsnr {

using json = nlohmann::json;

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Schedule spec <-> JSON: {"family": str, "vp": bool, "params": {...}}

inline json to_json(const schedule_spec& spec) {
    json params = json::object();
    switch (spec.family) {
        case schedule_family::smld: {
            const auto& p = std::get<ve_params>(spec.params);
            params = {{"sigma_min", p.sigma_min}, {"sigma_max", p.sigma_max}};
            break;
        }
        case schedule_family::edm:
        case schedule_family::edm_ut: {
            const auto& p = std::get<edm_params>(spec.params);
            params = {{"sigma_min", p.sigma_min}, {"sigma_max", p.sigma_max}, {"rho", p.rho}};
            break;
        }
        case schedule_family::otfm:
            break;
        case schedule_family::ddpm_linear: {
            const auto& p = std::get<ddpm_linear_params>(spec.params);
            params = {{"beta_min", p.beta_min}, {"beta_max", p.beta_max}};
            break;
        }
        case schedule_family::ddpm_cos: {
            const auto& p = std::get<ddpm_cos_params>(spec.params);
            params = {{"s", p.s}, {"nu", p.nu}};
            break;
        }
        case schedule_family::issnr: {
            const auto& p = std::get<issnr_params>(spec.params);
            params = {{"eta", p.eta}, {"kappa", p.kappa}, {"t_min", p.t_min},
                      {"t_max", p.t_max}};
            break;
        }
    }
    json j = {{"family", family_name(spec.family)}, {"vp", spec.vp}, {"params", params}};
    if (spec.eval_eps != 1e-5) j["eval_eps"] = spec.eval_eps;
    return j;
}

inline schedule_spec spec_from_json(const json& j) {
    if (!j.is_object() || !j.contains("family"))
        throw io_error("schedule json: expected an object with a 'family' field");
    schedule_spec spec;
    spec.family = family_from_name(j.at("family").get<std::string>());
    spec.vp = j.value("vp", false);
    spec.eval_eps = j.value("eval_eps", 1e-5);
    const json params = j.value("params", json::object());
    auto get = [&](const char* key, double fallback) { return params.value(key, fallback); };
    switch (spec.family) {
        case schedule_family::smld: {
            ve_params p;
            p.sigma_min = get("sigma_min", p.sigma_min);
            p.sigma_max = get("sigma_max", p.sigma_max);
            spec.params = p;
            break;
        }
        case schedule_family::edm:
        case schedule_family::edm_ut: {
            edm_params p;
            p.sigma_min = get("sigma_min", p.sigma_min);
            p.sigma_max = get("sigma_max", p.sigma_max);
            p.rho = get("rho", p.rho);
            spec.params = p;
            break;
        }
        case schedule_family::otfm:
            spec.params = otfm_params{};
            break;
        case schedule_family::ddpm_linear: {
            ddpm_linear_params p;
            p.beta_min = get("beta_min", p.beta_min);
            p.beta_max = get("beta_max", p.beta_max);
            spec.params = p;
            break;
        }
        case schedule_family::ddpm_cos: {
            ddpm_cos_params p;
            p.s = get("s", p.s);
            p.nu = get("nu", p.nu);
            spec.params = p;
            break;
        }
        case schedule_family::issnr: {
            issnr_params p;
            p.eta = get("eta", p.eta);
            p.kappa = get("kappa", p.kappa);
            p.t_min = get("t_min", p.t_min);
            p.t_max = get("t_max", p.t_max);
            spec.params = p;
            break;
        }
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Mixture <-> JSON: {"weights": [...], "centers": [[...]], "center_var": v}
// The string "three-delta" names the canonical preset.

inline json to_json(const mixture& mix) {
    json centers = json::array();
    for (std::size_t i = 0; i < mix.components(); ++i) {
        const auto c = mix.center(i);
        centers.push_back(std::vector<double>(c.begin(), c.end()));
    }
    return {{"weights", mix.weights}, {"centers", centers}, {"center_var", mix.center_var}};
}

inline mixture mixture_from_json(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "three-delta") return three_delta();
        if (name == "single-delta") return single_delta();
        throw io_error("mixture json: unknown preset '" + name + "'");
    }
    if (!j.is_object() || !j.contains("weights") || !j.contains("centers"))
        throw io_error("mixture json: expected 'weights' and 'centers'");
    mixture mix;
    mix.weights = j.at("weights").get<std::vector<double>>();
    const auto& centers = j.at("centers");
    if (!centers.is_array() || centers.empty() || !centers[0].is_array())
        throw io_error("mixture json: 'centers' must be a list of vectors");
    mix.dim = centers[0].size();
    for (const auto& row : centers) {
        const auto v = row.get<std::vector<double>>();
        if (v.size() != mix.dim) throw io_error("mixture json: ragged centers");
        mix.centers.insert(mix.centers.end(), v.begin(), v.end());
    }
    mix.center_var = j.value("center_var", 0.0);
    mix.validate();
    return mix;
}

// ---------------------------------------------------------------------------
// Grids and configs

inline json to_json(const time_grid& grid) {
    return {{"kind", grid.kind == grid_kind::uniform ? "uniform" : "edm_rho"},
            {"times", grid.times}};
}

/// Everything one experiment run needs. The grid block applies only to
/// grid_name == "edm_rho"; "uniform" grids span the schedule's valid domain.
struct experiment_config {
    schedule_spec schedule;
    mixture mix = three_delta();
    std::string mixture_name = "three-delta";  // preset name, or "" if inline
    solver_kind solver = solver_kind::heun;
    double lambda = 0.0;
    std::size_t steps = 512;
    std::string grid_name = "auto";  // auto = the family's table grid
    std::size_t batch = 1;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    double peak_tol = 1e-2;
    bool save_trajectories = true;

    void validate() const {
        schedule.validate();
        mix.validate();
        detail::require(steps >= 1, "config: need steps >= 1");
        detail::require(batch >= 1, "config: need batch >= 1");
        detail::require(lambda >= 0.0, "config: need lambda >= 0");
        if (solver != solver_kind::sde)
            detail::require(lambda == 0.0, "config: lambda > 0 requires solver = sde");
        detail::require(grid_name == "auto" || grid_name == "uniform" ||
                            grid_name == "edm_rho",
                        "config: grid must be 'auto', 'uniform' or 'edm_rho'");
        detail::require(peak_tol > 0.0, "config: need peak_tol > 0");
    }

    time_grid make_grid() const {
        const auto dom = schedule.domain();
        if (grid_name == "edm_rho") {
            // rho grid needs a sigma range: take it from the schedule when it
            // has one, else the EDM defaults
            if (const auto* p = std::get_if<edm_params>(&schedule.params)) {
                return edm_grid(std::max<std::size_t>(steps, 2), p->sigma_min, p->sigma_max,
                                p->rho, std::min(dom.lo, p->sigma_min * 0.5));
            }
            edm_params p;
            return edm_grid(std::max<std::size_t>(steps, 2), p.sigma_min, p.sigma_max, p.rho,
                            std::min(dom.lo, p.sigma_min * 0.5));
        }
        if (grid_name == "uniform") return uniform_grid(steps, dom.lo, dom.hi);
        return default_grid(schedule, steps);
    }
};

inline const char* solver_name(solver_kind s) {
    switch (s) {
        case solver_kind::euler: return "euler";
        case solver_kind::heun: return "heun";
        case solver_kind::sde: return "sde";
    }
    return "?";
}

inline solver_kind solver_from_name(const std::string& name) {
    if (name == "euler") return solver_kind::euler;
    if (name == "heun") return solver_kind::heun;
    if (name == "sde") return solver_kind::sde;
    throw std::invalid_argument("config: unknown solver '" + name + "'");
}

inline json to_json(const experiment_config& cfg) {
    json j;
    j["schedule"] = to_json(cfg.schedule);
    j["mixture"] = cfg.mixture_name.empty() ? to_json(cfg.mix) : json(cfg.mixture_name);
    j["solver"] = solver_name(cfg.solver);
    j["lambda"] = cfg.lambda;
    j["steps"] = cfg.steps;
    j["grid"] = cfg.grid_name;
    j["batch"] = cfg.batch;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["peak_tol"] = cfg.peak_tol;
    j["save_trajectories"] = cfg.save_trajectories;
    return j;
}

inline experiment_config config_from_json(const json& j) {
    experiment_config cfg;
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        cfg.schedule = s.is_string() ? spec_by_name(s.get<std::string>()) : spec_from_json(s);
    }
    if (j.contains("mixture")) {
        const auto& m = j.at("mixture");
        cfg.mixture_name = m.is_string() ? m.get<std::string>() : "";
        cfg.mix = mixture_from_json(m);
    }
    if (j.contains("solver")) cfg.solver = solver_from_name(j.at("solver").get<std::string>());
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.grid_name = j.value("grid", cfg.grid_name);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.peak_tol = j.value("peak_tol", cfg.peak_tol);
    cfg.save_trajectories = j.value("save_trajectories", cfg.save_trajectories);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// CSV writers

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);  // binary: byte-stable newlines
    if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
    return out;
}

}  // namespace detail

/// One trajectory per file: header t,x_0,...,x_(d-1).
inline void write_trajectory_csv(const std::filesystem::path& path, const trajectory& traj) {
    auto out = detail::open_out(path);
    out << "t";
    for (std::size_t d = 0; d < traj.dim; ++d) out << ",x_" << d;
    out << "\n";
    for (std::size_t k = 0; k < traj.grid.times.size(); ++k) {
        out << fmt17(traj.grid.times[k]);
        const auto x = traj.state(k);
        for (double v : x) out << "," << fmt17(v);
        out << "\n";
    }
}

/// Combined long format: traj_id,t,dim,value.
inline void write_batch_csv(const std::filesystem::path& path,
                            const std::vector<trajectory>& batch) {
    auto out = detail::open_out(path);
    out << "traj_id,t,dim,value\n";
    std::string line;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& traj = batch[j];
        for (std::size_t k = 0; k < traj.grid.times.size(); ++k) {
            const auto x = traj.state(k);
            for (std::size_t d = 0; d < traj.dim; ++d) {
                line.clear();
                line += std::to_string(j);
                line += ',';
                line += fmt17(traj.grid.times[k]);
                line += ',';
                line += std::to_string(d);
                line += ',';
                line += fmt17(x[d]);
                line += '\n';
                out << line;
            }
        }
    }
}

inline void write_curvature_csv(const std::filesystem::path& path,
                                const curvature_report& report) {
    auto out = detail::open_out(path);
    out << "t,local\n";
    for (std::size_t i = 0; i < report.times.size(); ++i) {
        out << fmt17(report.times[i]) << "," << fmt17(report.local[i]) << "\n";
    }
}

inline void write_support_csv(const std::filesystem::path& path, const support_report& report) {
    auto out = detail::open_out(path);
    out << "t,rel_support\n";
    for (std::size_t i = 0; i < report.times.size(); ++i) {
        out << fmt17(report.times[i]) << "," << fmt17(report.rel_support[i]) << "\n";
    }
}

inline void write_shadow_csv(const std::filesystem::path& path, const shadow_report& report) {
    auto out = detail::open_out(path);
    out << "t,x,pdf\n";
    for (std::size_t ti = 0; ti < report.t_grid.size(); ++ti) {
        for (std::size_t xi = 0; xi < report.x_grid.size(); ++xi) {
            out << fmt17(report.t_grid[ti]) << "," << fmt17(report.x_grid[xi]) << ","
                << fmt17(report.pdf[ti * report.x_grid.size() + xi]) << "\n";
        }
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    auto out = detail::open_out(path);
    out << j.dump(2) << "\n";
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path.string() + "' for reading");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw io_error("parse error in '" + path.string() + "': " + e.what());
    }
    return j;
}

}  // namespace tvsnr
