#ifndef KS_CLI_HPP
#define KS_CLI_HPP

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ks/config.hpp"
#include "ks/csv.hpp"
#include "ks/exponent.hpp"
#include "ks/matrix_io.hpp"
#include "ks/probe.hpp"
#include "ks/rng.hpp"
#include "ks/solver.hpp"

namespace ks {

inline constexpr const char* kVersion = "0.1.0";

namespace cli {

inline int exit_code_for(const Error& e) {
    switch (e.code()) {
        case errc::non_convergence:
        case errc::trivial_collapse:
        case errc::path_collapse:
        case errc::quadrature_non_convergence:
        case errc::grid_too_coarse:
        case errc::not_found:
            return 1;  // numerical non-convergence
        default:
            return 2;  // validation failure
    }
}

struct TaskContext {
    RunConfig cfg;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    std::vector<std::string> overrides;
};

inline AssemblyConfig assembly_from_config(const RunConfig& cfg) {
    AssemblyConfig a;
    a.split_factor = cfg.get_double_or("task", "split_factor", a.split_factor);
    a.near_order = static_cast<int>(cfg.get_int_or("task", "near_order", a.near_order));
    a.near_subdiv = static_cast<int>(cfg.get_int_or("task", "near_subdiv", a.near_subdiv));
    a.self_correction = cfg.get_or("task", "self_correction", "on") != "off";
    return a;
}

inline std::filesystem::path cache_dir(const TaskContext& ctx) {
    if (const char* env = std::getenv("KS_CACHE_DIR"); env && *env) return env;
    return ctx.out_dir / "cache";
}

inline StiffnessMatrix assemble_with_cache(const TaskContext& ctx, const GridPtr& grid,
                                           const KernelSpec& spec, const AssemblyConfig& acfg) {
    const bool use_cache = ctx.cfg.get_or("run", "cache", "off") == "on";
    if (!use_cache) return assemble_stiffness(grid, spec, acfg);
    const std::string fp = stiffness_fingerprint(*grid, spec, acfg);
    const std::filesystem::path dir = cache_dir(ctx);
    std::filesystem::create_directories(dir);
    const std::filesystem::path path = dir / ("matrix_" + fp + ".mtx");
    if (std::filesystem::exists(path))
        return load_matrix_cache(path.string(), fp, grid, acfg, spec.describe());
    StiffnessMatrix S = assemble_stiffness(grid, spec, acfg);
    save_matrix_cache(path.string(), S);
    return S;
}

inline int task_kernel_check(const TaskContext& ctx) {
    const KernelSpec spec = kernel_from_config(ctx.cfg);
    const auto integ = check_levy_integrability(spec);
    const auto mono = check_monotone(
        spec, static_cast<int>(ctx.cfg.get_int_or("task", "sample_count", 256)));

    CsvWriter csv((ctx.out_dir / "kernel_check.csv").string());
    csv.row({"kernel", "integrable", "divergent_piece", "near_value", "far_value", "monotone"});
    csv.row({spec.describe(), integ.pass ? "1" : "0", integ.divergent_piece(),
             csv_double(integ.near_value), csv_double(integ.far_value), mono.pass ? "1" : "0"});
    return (integ.pass && mono.pass) ? 0 : 2;
}

inline int task_exponent(const TaskContext& ctx) {
    const KernelSpec spec = kernel_from_config(ctx.cfg);
    const double r_min = ctx.cfg.get_double_or("task", "r_min", 2e-8);
    const double r_max = ctx.cfg.get_double_or("task", "r_max", 1.0);
    const int points = static_cast<int>(ctx.cfg.get_int_or("task", "points", 193));
    const ExponentReport rep = estimate_s0(spec, r_min, r_max, points);

    double s0 = ctx.cfg.get_double_or("task", "s0", 0.5 * (rep.s0_lo + rep.s0_hi));
    s0 = std::min(1.0, std::max(s0, 1e-6));
    std::string linf_name = "Inconclusive";
    std::string linf_lo = "", linf_hi = "";
    try {
        const LInfReport linf =
            estimate_l_infinity(spec, s0, ctx.cfg.get_double_or("task", "linf_r_min", 1e-6));
        linf_name = linf_kind_name(linf.kind);
        if (linf.kind == LInfKind::finite_positive) {
            linf_lo = csv_double(linf.value_lo);
            linf_hi = csv_double(linf.value_hi);
        }
    } catch (const Error& e) {
        if (e.code() != errc::inconclusive) throw;
    }

    CsvWriter csv((ctx.out_dir / "exponent.csv").string());
    csv.row({"kernel", "s0_lo", "s0_hi", "l_inf_class", "l_inf_lo", "l_inf_hi", "two_star",
             "r_min", "points"});
    csv.row({spec.describe(), csv_double(rep.s0_lo), csv_double(rep.s0_hi), linf_name, linf_lo,
             linf_hi, rep.twostar.supercritical ? "supercritical" : csv_double(rep.twostar.value),
             csv_double(rep.r_min), std::to_string(rep.points)});

    CsvWriter slopes((ctx.out_dir / "tail_slopes.csv").string());
    slopes.row({"r", "slope"});
    for (std::size_t i = 0; i < rep.r_grid.size(); ++i)
        slopes.row({csv_double(rep.r_grid[i]), csv_double(rep.slopes[i])});
    return 0;
}

inline int task_assemble(const TaskContext& ctx) {
    const KernelSpec spec = kernel_from_config(ctx.cfg);
    const GridPtr grid = domain_from_config(ctx.cfg);
    const AssemblyConfig acfg = assembly_from_config(ctx.cfg);
    const StiffnessMatrix S = assemble_with_cache(ctx, grid, spec, acfg);

    const double lam_min = smallest_eigenvalue(S);
    const double lam2 = rayleigh_lambda_q(S, 2.0, {5, ctx.seed}).lambda;
    CsvWriter csv((ctx.out_dir / "assemble_summary.csv").string());
    csv.row({"kernel", "grid", "nodes", "fingerprint", "lambda_min", "lambda_2"});
    csv.row({spec.describe(), grid->describe(), std::to_string(grid->node_count()), S.fingerprint,
             csv_double(lam_min), csv_double(lam2)});
    return 0;
}

inline int task_solve(const TaskContext& ctx) {
    const KernelSpec spec = kernel_from_config(ctx.cfg);
    const GridPtr grid = domain_from_config(ctx.cfg);
    const AssemblyConfig acfg = assembly_from_config(ctx.cfg);

    SolveConfig scfg;
    scfg.p = ctx.cfg.get_double("task", "p");
    const std::string method = ctx.cfg.get_or("task", "method", "nehari");
    require(method == "nehari" || method == "mountain_pass", errc::config_parse_error,
            "task.method must be nehari or mountain_pass");
    scfg.method = (method == "nehari") ? SolveMethod::nehari : SolveMethod::mountain_pass;
    scfg.grad_tol = ctx.cfg.get_double_or("task", "grad_tol", 1e-8);
    scfg.max_iters = static_cast<int>(ctx.cfg.get_int_or("task", "max_iters", 4000));
    scfg.path_points = static_cast<int>(ctx.cfg.get_int_or("task", "path_points", 21));
    scfg.allow_supercritical = ctx.cfg.get_or("task", "allow_supercritical", "off") == "on";

    // subcritical gate: p must stay below 2N/(N - 2 s0_hi)
    const ExponentReport rep = estimate_s0(spec, 2e-8, 1.0, 97);
    if (!rep.twostar.supercritical) scfg.two_star_bound = rep.twostar.value;

    const StiffnessMatrix S = assemble_with_cache(ctx, grid, spec, acfg);
    const Solution sol = (scfg.method == SolveMethod::nehari) ? nehari_ground_state(S, scfg)
                                                              : mountain_pass_solve(S, scfg);

    CsvWriter csv((ctx.out_dir / "solution.csv").string());
    csv.row({"x", "y", "value"});
    for (std::size_t i = 0; i < grid->node_count(); ++i) {
        const auto& p = grid->node(i);
        csv.row({csv_double(p[0]), csv_double(p[1]),
                 csv_double(sol.u.values[static_cast<Eigen::Index>(i)])});
    }
    CsvWriter summary((ctx.out_dir / "run_summary.csv").string());
    summary.row({"method", "p", "kernel_fingerprint", "energy", "residual", "nehari_gap",
                 "iterations"});
    summary.row({method_name(sol.method), csv_double(scfg.p), fingerprint_of(spec.describe()),
                 csv_double(sol.energy), csv_double(sol.residual), csv_double(sol.nehari_gap),
                 std::to_string(sol.iterations)});
    return 0;
}

inline int task_sweep(const TaskContext& ctx) {
    const KernelSpec spec = kernel_from_config(ctx.cfg);
    const std::string shape = ctx.cfg.get_or("domain", "shape", "square");
    const double size = ctx.cfg.get_double_or("domain", "size", 1.0);
    const std::vector<int> resolutions =
        ctx.cfg.get_int_list_or("task", "resolutions", {9, 17, 33});
    const std::vector<double> q_list = ctx.cfg.get_double_list_or("task", "q_list", {1.0, 2.0, 3.0});
    RayleighOptions ropts;
    ropts.seed = ctx.seed;
    const EmbeddingReport rep = embedding_sweep(
        spec, shape == "disk" ? DomainShape::disk : DomainShape::square, size, resolutions, q_list,
        assembly_from_config(ctx.cfg), ropts);

    CsvWriter csv((ctx.out_dir / "sweep.csv").string());
    csv.row({"q", "resolution", "lambda_q", "C_q", "trend"});
    for (std::size_t r = 0; r < q_list.size(); ++r)
        for (std::size_t c = 0; c < resolutions.size(); ++c)
            csv.row({csv_double(q_list[r]), std::to_string(resolutions[c]),
                     csv_double(rep.lambda(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))),
                     csv_double(rep.constant(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))),
                     rep.trend[r]});

    // plot data: C_q against q at the finest resolution
    CsvWriter plot((ctx.out_dir / "plot_cq.csv").string());
    for (std::size_t r = 0; r < q_list.size(); ++r)
        plot.row({csv_double(q_list[r]),
                  csv_double(rep.constant(static_cast<Eigen::Index>(r),
                                          static_cast<Eigen::Index>(resolutions.size() - 1)))});
    return 0;
}

inline int task_probe(const TaskContext& ctx) {
    const KernelSpec spec = kernel_from_config(ctx.cfg);
    const GridPtr grid = domain_from_config(ctx.cfg);
    const StiffnessMatrix S = assemble_with_cache(ctx, grid, spec, assembly_from_config(ctx.cfg));

    const int rho_cells = static_cast<int>(ctx.cfg.get_int_or("task", "rho_cells", 4));
    const double rho = rho_cells * grid->h();
    const int samples = static_cast<int>(ctx.cfg.get_int_or("task", "samples", 10));
    Rng rng(ctx.seed);
    std::vector<NodalFunction> fns;
    const double L = grid->box_side();
    for (int t = 0; t < samples; ++t) {
        const double cx = L * rng.uniform(0.35, 0.65);
        const double cy = L * rng.uniform(0.35, 0.65);
        const double w = L * rng.uniform(0.15, 0.3);
        fns.push_back(make_bump(grid, cx, cy, w));
    }
    const CompactnessDiag diag = compactness_diagnostic(S, spec, rho, fns);

    CsvWriter csv((ctx.out_dir / "compactness.csv").string());
    csv.row({"sample", "lhs", "rhs", "slack", "pass"});
    for (std::size_t i = 0; i < diag.lhs.size(); ++i)
        csv.row({std::to_string(i), csv_double(diag.lhs[i]), csv_double(diag.rhs[i]),
                 csv_double(diag.slack[i]), diag.pass[i] ? "1" : "0"});

    if (ctx.cfg.has("task", "widths")) {
        const std::vector<double> widths = ctx.cfg.get_double_list_or("task", "widths", {});
        const double q = ctx.cfg.get_double_or("task", "q", 2.0);
        CsvWriter conc((ctx.out_dir / "concentration.csv").string());
        for (const auto& row : concentration_probe(S, q, widths))
            conc.row({csv_double(row.width), csv_double(row.ratio)});
    }
    return diag.all_pass ? 0 : 1;
}

} // namespace cli

// Runs one subcommand against a config file. Writes all artifacts plus a
// manifest under the configured output directory. Exit codes: 0 success,
// 2 validation failure, 1 numerical non-convergence.
inline int run_task(const std::string& task, const std::string& config_path,
                    const std::vector<std::string>& overrides, std::ostream& err = std::cerr) {
    const auto t0 = std::chrono::steady_clock::now();
    cli::TaskContext ctx;
    int code = 0;
    try {
        ctx.cfg = RunConfig::parse_file(config_path);
        for (const auto& o : overrides) ctx.cfg.apply_override(o);
        ctx.out_dir = ctx.cfg.get_or("output", "dir", "out");
        ctx.seed = static_cast<std::uint64_t>(ctx.cfg.get_int_or("run", "seed", 20240801));
        ctx.overrides = overrides;
        std::filesystem::create_directories(ctx.out_dir);

        if (task == "kernel-check") code = cli::task_kernel_check(ctx);
        else if (task == "exponent") code = cli::task_exponent(ctx);
        else if (task == "assemble") code = cli::task_assemble(ctx);
        else if (task == "solve") code = cli::task_solve(ctx);
        else if (task == "sweep") code = cli::task_sweep(ctx);
        else if (task == "probe") code = cli::task_probe(ctx);
        else {
            err << "unknown task: " << task << "\n";
            return 2;
        }
    } catch (const Error& e) {
        err << e.what() << "\n";
        code = cli::exit_code_for(e);
        if (ctx.out_dir.empty()) return code;
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return 2;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream manifest(ctx.out_dir / "manifest.txt");
    if (manifest.good()) {
        manifest << "fingerprint " << ctx.cfg.fingerprint() << "\n";
        manifest << "version " << kVersion << "\n";
        manifest << "task " << task << "\n";
        manifest << "seed " << ctx.seed << "\n";
        for (const auto& o : ctx.overrides) manifest << "override " << o << "\n";
        manifest << "wall_time_s " << wall << "\n";
        manifest << "exit_code " << code << "\n";
    }
    return code;
}

} // namespace ks

#endif
