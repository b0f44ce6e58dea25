// tvsnr command-line front end: schedule catalog queries, reverse-process
// sampling runs and trajectory analyses, all driven by a JSON config plus
// flag overrides (flags win). Outputs are UTF-8 CSV/JSON with
// 17-significant-digit floats so reruns are byte-identical.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tvsnr/tvsnr.hpp"

namespace {

using namespace tvsnr;

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct cli_state {
    // schedule flags
    std::string family;
    std::string spec_file;
    std::string eta;  // number or "scaled"
    double kappa = 0.0, t_min = 0.0, t_max = 0.0;
    double sigma_min = 0.0, sigma_max = 0.0, rho = 0.0;
    double beta_min = 0.0, beta_max = 0.0, s = 0.0, nu = 0.0;
    double eval_eps = 0.0;
    bool vp = false;

    // run flags
    std::string config_file;
    std::string mixture;
    std::string solver;
    std::string grid;
    double lambda = 0.0;
    std::size_t steps = 0;
    std::size_t batch = 0;
    std::uint64_t seed = 0;
    std::string out;
    double peak_tol = 0.0;
    unsigned threads = 0;
    bool no_trajectories = false;
    bool split_trajectories = false;

    // eval flags
    std::vector<double> t_values;
    std::size_t t_steps = 0;

    std::string compare;
};

void add_schedule_flags(CLI::App* cmd, cli_state& st) {
    cmd->add_option("--family", st.family, "schedule family or catalog name");
    cmd->add_option("--spec", st.spec_file, "schedule spec JSON file");
    cmd->add_option("--eta", st.eta, "ISSNR steepness, or 'scaled' for the NFE rule");
    cmd->add_option("--kappa", st.kappa, "ISSNR offset");
    cmd->add_option("--t-min", st.t_min, "ISSNR lower time remap");
    cmd->add_option("--t-max", st.t_max, "ISSNR upper time remap");
    cmd->add_option("--sigma-min", st.sigma_min, "minimum noise level");
    cmd->add_option("--sigma-max", st.sigma_max, "maximum noise level");
    cmd->add_option("--rho", st.rho, "EDM grid exponent");
    cmd->add_option("--beta-min", st.beta_min, "DDPM-linear start beta");
    cmd->add_option("--beta-max", st.beta_max, "DDPM-linear end beta");
    cmd->add_option("--s", st.s, "DDPM-cos shift");
    cmd->add_option("--nu", st.nu, "DDPM-cos exponent");
    cmd->add_option("--eval-eps", st.eval_eps, "endpoint clamp distance");
    cmd->add_flag("--vp", st.vp, "force the constant-TV variant");
}

void add_run_flags(CLI::App* cmd, cli_state& st) {
    cmd->add_option("--config", st.config_file, "experiment config JSON file");
    cmd->add_option("--mixture", st.mixture, "mixture preset name or JSON file");
    cmd->add_option("--solver", st.solver, "euler | heun | sde");
    cmd->add_option("--lambda", st.lambda, "reverse-SDE stochasticity, 0 = ODE");
    cmd->add_option("--steps", st.steps, "NFE step count");
    cmd->add_option("--grid", st.grid, "auto | uniform | edm_rho");
    cmd->add_option("--batch", st.batch, "trajectory count");
    cmd->add_option("--seed", st.seed, "master RNG seed");
    cmd->add_option("--out", st.out, "output directory");
    cmd->add_option("--peak-tol", st.peak_tol, "peak capture distance");
    cmd->add_option("--threads", st.threads, "worker threads (capped by TVSNR_THREADS)");
    cmd->add_flag("--no-trajectories", st.no_trajectories, "skip the trajectory CSV");
    cmd->add_flag("--split-trajectories", st.split_trajectories,
                  "one CSV per trajectory instead of the combined file");
}

unsigned resolve_threads(const CLI::App* cmd, const cli_state& st) {
    unsigned n = cmd->count("--threads") ? st.threads
                                         : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("TVSNR_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, n);
}

json load_json_file(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw io_error("no such file: '" + path + "'");
    }
    try {
        return read_json(path);
    } catch (const io_error& e) {
        // the file exists but does not parse: config error, not I/O
        throw std::invalid_argument(e.what());
    }
}

// schedule from --spec / --family plus parameter overrides
schedule_spec resolve_schedule(const CLI::App* cmd, const cli_state& st,
                               std::optional<schedule_spec> base, std::size_t nfe_for_eta) {
    schedule_spec spec = base.value_or(spec_by_name("vp-issnr"));
    if (cmd->count("--spec")) spec = spec_from_json(load_json_file(st.spec_file));
    if (cmd->count("--family")) spec = spec_by_name(st.family);
    if (cmd->count("--vp")) spec.vp = true;
    if (cmd->count("--eval-eps")) spec.eval_eps = st.eval_eps;

    switch (spec.family) {
        case schedule_family::smld: {
            auto p = std::get<ve_params>(spec.params);
            if (cmd->count("--sigma-min")) p.sigma_min = st.sigma_min;
            if (cmd->count("--sigma-max")) p.sigma_max = st.sigma_max;
            spec.params = p;
            break;
        }
        case schedule_family::edm:
        case schedule_family::edm_ut: {
            auto p = std::get<edm_params>(spec.params);
            if (cmd->count("--sigma-min")) p.sigma_min = st.sigma_min;
            if (cmd->count("--sigma-max")) p.sigma_max = st.sigma_max;
            if (cmd->count("--rho")) p.rho = st.rho;
            spec.params = p;
            break;
        }
        case schedule_family::otfm:
            break;
        case schedule_family::ddpm_linear: {
            auto p = std::get<ddpm_linear_params>(spec.params);
            if (cmd->count("--beta-min")) p.beta_min = st.beta_min;
            if (cmd->count("--beta-max")) p.beta_max = st.beta_max;
            spec.params = p;
            break;
        }
        case schedule_family::ddpm_cos: {
            auto p = std::get<ddpm_cos_params>(spec.params);
            if (cmd->count("--s")) p.s = st.s;
            if (cmd->count("--nu")) p.nu = st.nu;
            spec.params = p;
            break;
        }
        case schedule_family::issnr: {
            auto p = std::get<issnr_params>(spec.params);
            if (cmd->count("--eta")) {
                if (st.eta == "scaled") {
                    p.eta = issnr_scaled_eta(nfe_for_eta);
                    p.kappa = 0.0;  // the scaled rule implies kappa = 0
                } else {
                    p.eta = std::stod(st.eta);
                }
            }
            if (cmd->count("--kappa")) p.kappa = st.kappa;
            if (cmd->count("--t-min")) p.t_min = st.t_min;
            if (cmd->count("--t-max")) p.t_max = st.t_max;
            spec.params = p;
            break;
        }
    }
    spec.validate();
    return spec;
}

experiment_config resolve_config(const CLI::App* cmd, const cli_state& st) {
    experiment_config cfg;
    if (cmd->count("--config")) cfg = config_from_json(load_json_file(st.config_file));
    if (cmd->count("--solver")) cfg.solver = solver_from_name(st.solver);
    if (cmd->count("--lambda")) cfg.lambda = st.lambda;
    if (cmd->count("--steps")) cfg.steps = st.steps;
    if (cmd->count("--grid")) cfg.grid_name = st.grid;
    if (cmd->count("--batch")) cfg.batch = st.batch;
    if (cmd->count("--seed")) cfg.seed = st.seed;
    if (cmd->count("--out")) cfg.output_dir = st.out;
    if (cmd->count("--peak-tol")) cfg.peak_tol = st.peak_tol;
    if (cmd->count("--no-trajectories")) cfg.save_trajectories = false;
    if (cmd->count("--mixture")) {
        if (st.mixture == "three-delta" || st.mixture == "single-delta") {
            cfg.mix = mixture_from_json(json(st.mixture));
            cfg.mixture_name = st.mixture;
        } else {
            cfg.mix = mixture_from_json(load_json_file(st.mixture));
            cfg.mixture_name = "";
        }
    }
    cfg.schedule = resolve_schedule(cmd, st, cfg.schedule, cfg.steps);
    cfg.validate();
    return cfg;
}

void check_finite(const std::vector<trajectory>& batch) {
    for (const auto& traj : batch) {
        for (double v : traj.states) {
            if (!std::isfinite(v)) {
                throw numerical_error("solver produced a non-finite state");
            }
        }
    }
}

// ---------------------------------------------------------------------------

int cmd_schedules_list() {
    std::printf("%-12s %s\n", "name", "parameters");
    for (const auto& row : catalog()) {
        const json j = to_json(row.spec);
        std::printf("%-12s %s\n", row.name.c_str(), j.at("params").dump().c_str());
    }
    return 0;
}

int cmd_schedules_eval(const CLI::App* cmd, const cli_state& st) {
    const auto spec =
        resolve_schedule(cmd, st, std::nullopt, std::max<std::size_t>(st.t_steps, 1));
    const auto dom = spec.domain();

    std::vector<double> ts = st.t_values;
    if (ts.empty()) {
        const std::size_t n = st.t_steps ? st.t_steps : 201;
        for (std::size_t i = 0; i < n; ++i) {
            ts.push_back(dom.lo + (dom.hi - dom.lo) * static_cast<double>(i) /
                                      static_cast<double>(n - 1));
        }
    }

    std::ostringstream csv;
    csv << "t,tv_sq,snr_sq,a,b,f,g_sq\n";
    for (double t : ts) {
        const auto p = eval_point(spec, t);
        const auto k = to_kernel(p);
        const auto c = tvsnr_sde(p);
        csv << fmt17(t) << "," << fmt17(p.tv_sq) << "," << fmt17(p.snr_sq) << ","
            << fmt17(k.a) << "," << fmt17(k.b) << "," << fmt17(c.f) << ","
            << fmt17(c.g_sq) << "\n";
    }
    if (cmd->count("--out")) {
        auto out = tvsnr::detail::open_out(st.out);
        out << csv.str();
    }
    std::fputs(csv.str().c_str(), stdout);
    return 0;
}

int cmd_sample(const CLI::App* cmd, const cli_state& st) {
    const auto cfg = resolve_config(cmd, st);
    const unsigned threads = resolve_threads(cmd, st);
    const auto grid = cfg.make_grid();

    const auto start = std::chrono::steady_clock::now();
    const auto batch = solve_batch(cfg.schedule, grid, cfg.mix, cfg.solver, cfg.lambda,
                                   cfg.batch, cfg.seed, threads);
    check_finite(batch);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto capture = peak_capture(final_states(batch), cfg.mix, cfg.peak_tol);

    const std::filesystem::path dir = cfg.output_dir;
    json summary;
    summary["schedule"] = to_json(cfg.schedule);
    summary["solver"] = solver_name(cfg.solver);
    summary["lambda"] = cfg.lambda;
    summary["steps"] = cfg.steps;
    summary["grid"] = cfg.grid_name;
    summary["batch"] = cfg.batch;
    summary["seed"] = cfg.seed;
    summary["peak_tol"] = cfg.peak_tol;
    summary["peak_counts"] = capture.counts;
    summary["peak_fractions"] = capture.fractions();
    summary["outside_count"] = capture.outside;
    summary["outside_fraction"] = capture.outside_fraction();
    summary["threads"] = threads;
    summary["wall_time_s"] = wall;
    if (cfg.save_trajectories) {
        if (cmd->count("--split-trajectories")) {
            for (std::size_t j = 0; j < batch.size(); ++j) {
                write_trajectory_csv(dir / ("trajectory_" + std::to_string(j) + ".csv"),
                                     batch[j]);
            }
            summary["trajectory_files"] = batch.size();
        } else {
            write_batch_csv(dir / "trajectories.csv", batch);
            summary["trajectories_csv"] = (dir / "trajectories.csv").string();
        }
    }
    write_json(dir / "summary.json", summary);
    std::fputs((summary.dump(2) + "\n").c_str(), stdout);
    return 0;
}

int cmd_analyze(const std::string& what, const CLI::App* cmd, const cli_state& st) {
    std::vector<std::string> names;
    if (cmd->count("--compare")) {
        std::stringstream ss(st.compare);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) names.push_back(item);
        }
        if (names.empty()) throw std::invalid_argument("--compare: no schedule names given");
    } else {
        names.emplace_back();  // single run with the resolved schedule
    }

    const unsigned threads = resolve_threads(cmd, st);
    for (const auto& name : names) {
        auto cfg = resolve_config(cmd, st);
        if (!name.empty()) cfg.schedule = spec_by_name(name);
        const std::filesystem::path dir = cfg.output_dir;
        const std::string suffix = name.empty() ? "" : "_" + name;
        const auto grid = cfg.make_grid();

        if (what == "support") {
            const auto report = relative_support(cfg.schedule, grid);
            write_support_csv(dir / ("support" + suffix + ".csv"), report);
            if (!st.t_values.empty()) {
                const auto dom = cfg.schedule.domain();
                const double b_hi = to_kernel(eval_point(cfg.schedule, grid.t_max())).b;
                std::printf("t,rel_support\n");
                for (double t : st.t_values) {
                    const double b_t =
                        to_kernel(eval_point(cfg.schedule, std::clamp(t, dom.lo, dom.hi))).b;
                    std::printf("%s,%s\n", fmt17(t).c_str(), fmt17(b_t / b_hi).c_str());
                }
            }
        } else if (what == "shadow") {
            const auto report = density_shadow(cfg.mix, cfg.schedule);
            write_shadow_csv(dir / ("shadow" + suffix + ".csv"), report);
        } else {  // curvature
            if (cfg.lambda > 0.0) {
                throw std::invalid_argument("analyze curvature: requires lambda = 0");
            }
            const auto solver =
                cfg.solver == solver_kind::sde ? solver_kind::euler : cfg.solver;
            const auto batch = solve_batch(cfg.schedule, grid, cfg.mix, solver, 0.0,
                                           cfg.batch, cfg.seed, threads);
            check_finite(batch);
            const auto report = curvature(batch, cfg.schedule, cfg.mix);
            write_curvature_csv(dir / ("curvature" + suffix + ".csv"), report);
            write_json(dir / ("curvature" + suffix + "_global.json"),
                       json{{"global", report.global},
                            {"schedule", to_json(cfg.schedule)},
                            {"batch", cfg.batch},
                            {"steps", cfg.steps}});
            std::printf("%s,%s\n", name.empty() ? "global" : name.c_str(),
                        fmt17(report.global).c_str());
        }
    }
    return 0;
}

void emit_error(int code, const std::string& message) {
    const json err = {{"error", {{"code", code}, {"message", message}}}};
    std::fputs((err.dump() + "\n").c_str(), stderr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TV/SNR disentangled noise-schedule toolkit"};
    app.require_subcommand(1);
    cli_state st;

    auto* schedules = app.add_subcommand("schedules", "schedule catalog");
    schedules->require_subcommand(1);
    auto* list = schedules->add_subcommand("list", "print the catalog with defaults");
    auto* eval = schedules->add_subcommand("eval", "evaluate a schedule as CSV");
    add_schedule_flags(eval, st);
    eval->add_option("--t", st.t_values, "evaluation times");
    eval->add_option("--t-steps", st.t_steps, "uniform grid size over the valid domain");
    eval->add_option("--out", st.out, "also write the CSV here");

    auto* sample = app.add_subcommand("sample", "run a reverse-process batch");
    add_schedule_flags(sample, st);
    add_run_flags(sample, st);

    auto* analyze = app.add_subcommand("analyze", "trajectory and schedule diagnostics");
    analyze->require_subcommand(1);
    for (const char* what : {"curvature", "support", "shadow"}) {
        auto* sub = analyze->add_subcommand(what);
        add_schedule_flags(sub, st);
        add_run_flags(sub, st);
        sub->add_option("--compare", st.compare, "comma-separated catalog names");
        if (std::string(what) == "support") {
            sub->add_option("--t", st.t_values, "also print rel_support at these times");
        }
    }

    try {
        app.parse(argc, argv);
        if (list->parsed()) return cmd_schedules_list();
        if (eval->parsed()) return cmd_schedules_eval(eval, st);
        if (sample->parsed()) return cmd_sample(sample, st);
        for (const char* what : {"curvature", "support", "shadow"}) {
            auto* sub = analyze->get_subcommand(what);
            if (sub->parsed()) return cmd_analyze(what, sub, st);
        }
        emit_error(2, "no command given");
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        emit_error(2, e.what());
        return 2;
    } catch (const quadrature_error& e) {
        emit_error(3, e.what());
        return 3;
    } catch (const numerical_error& e) {
        emit_error(3, e.what());
        return 3;
    } catch (const io_error& e) {
        emit_error(4, e.what());
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        emit_error(4, e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        emit_error(2, e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error(3, e.what());
        return 3;
    }
}
