#ifndef KS_PROBE_HPP
#define KS_PROBE_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ks/assembly.hpp"
#include "ks/errors.hpp"
#include "ks/grid.hpp"
#include "ks/rng.hpp"

namespace ks {

struct RayleighOptions {
    int restarts = 5;
    std::uint64_t seed = 20240801;
    double tol = 1e-11;   // KKT residual target
    int max_iters = 4000;
};

struct RayleighResult {
    double lambda = 0.0;  // min u'Au / ||u||_q^2 found
    Eigen::VectorXd minimizer;
    std::vector<double> per_restart;
    std::vector<std::uint64_t> seeds;
    int iterations = 0;
};

namespace detail {

inline Eigen::VectorXd q_gradient(const Eigen::VectorXd& u, double q, double vol) {
    Eigen::VectorXd g(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double a = std::abs(u[i]);
        g[i] = (a == 0.0) ? 0.0 : vol * std::pow(a, q - 1.0) * (u[i] > 0 ? 1.0 : -1.0);
    }
    return g;
}

inline double q_norm(const Eigen::VectorXd& u, double q, double vol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) acc += std::pow(std::abs(u[i]), q);
    return std::pow(acc * vol, 1.0 / q);
}

} // namespace detail

// lambda_q = inf u'Au / ||u||_{L^q}^2 by normalized A-preconditioned descent
// (inverse iteration v = A^{-1} J_q(u) with a damping safeguard), multiple
// restarts with logged seeds. The minimizer is sign-definite, so restarts use
// nonnegative starting vectors. For q = 2 this is inverse power iteration on
// the generalized eigenproblem (A, vol I).
inline RayleighResult rayleigh_lambda_q(const StiffnessMatrix& S, double q,
                                        RayleighOptions opts = {}) {
    require(q >= 1.0, errc::invalid_argument, "q must be >= 1");
    const FormSolver solver(S);
    const Eigen::Index M = S.A.rows();
    const double vol = S.grid->cell_volume();

    RayleighResult out;
    out.lambda = kInf;
    Rng rng(opts.seed);

    auto run = [&](Eigen::VectorXd u) -> std::pair<double, Eigen::VectorXd> {
        u /= detail::q_norm(u, q, vol);
        double R = u.dot(S.A * u);
        int it = 0;
        for (; it < opts.max_iters; ++it) {
            const Eigen::VectorXd Jq = detail::q_gradient(u, q, vol);
            const Eigen::VectorXd Au = S.A * u;
            // KKT: A u = lambda J_q(u) on the unit q-sphere
            const double res = (Au - R * Jq).norm() / std::max(Au.norm(), 1e-300);
            if (res <= opts.tol) break;
            Eigen::VectorXd v = solver.solve(Jq);
            double t = 1.0;
            for (int back = 0; back < 50; ++back) {
                Eigen::VectorXd cand = (1.0 - t) * u + t * v;
                const double nq = detail::q_norm(cand, q, vol);
                if (nq > 1e-300) {
                    cand /= nq;
                    const double Rc = cand.dot(S.A * cand);
                    if (Rc <= R * (1.0 + 1e-14)) {
                        u = cand;
                        R = Rc;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        out.iterations += it;
        return {R, u};
    };

    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        Eigen::VectorXd u0(M);
        std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(r);
        if (r == 0) {
            u0 = Eigen::VectorXd::Ones(M);  // deterministic positive start
        } else {
            Rng rr(seed);
            for (Eigen::Index i = 0; i < M; ++i) u0[i] = 0.05 + rr.uniform();
        }
        auto [Rv, u] = run(std::move(u0));
        out.per_restart.push_back(Rv);
        out.seeds.push_back(seed);
        if (Rv < out.lambda) {
            out.lambda = Rv;
            out.minimizer = u;
        }
    }
    (void)rng;
    return out;
}

struct EmbeddingReport {
    std::vector<int> resolutions;
    std::vector<double> q_values;
    Eigen::MatrixXd lambda;  // q (rows) x resolution (cols)
    Eigen::MatrixXd constant;  // C_q = lambda^{-1/2}
    std::vector<std::string> trend;  // per q: stable | growing | shrinking
    std::string kernel_fingerprint;
};

// lambda_q and C_q across (q, resolution); C stable under refinement within
// 5% is flagged "stable", otherwise the direction of the last step.
inline EmbeddingReport embedding_sweep(const KernelSpec& spec, DomainShape shape, double size,
                                       const std::vector<int>& resolutions,
                                       const std::vector<double>& q_list,
                                       const AssemblyConfig& cfg = {},
                                       const RayleighOptions& ropts = {}) {
    require(!resolutions.empty() && !q_list.empty(), errc::invalid_argument,
            "sweep needs resolutions and q values");
    for (std::size_t i = 1; i < resolutions.size(); ++i)
        require(resolutions[i] > resolutions[i - 1], errc::invalid_argument,
                "resolutions must be increasing");

    EmbeddingReport rep;
    rep.resolutions = resolutions;
    rep.q_values = q_list;
    rep.lambda.resize(static_cast<Eigen::Index>(q_list.size()),
                      static_cast<Eigen::Index>(resolutions.size()));
    rep.constant.resize(rep.lambda.rows(), rep.lambda.cols());
    rep.kernel_fingerprint = fingerprint_of(spec.describe());

    for (std::size_t c = 0; c < resolutions.size(); ++c) {
        const GridPtr grid = make_domain(shape, size, resolutions[c]);
        const StiffnessMatrix S = assemble_stiffness(grid, spec, cfg);
        for (std::size_t r = 0; r < q_list.size(); ++r) {
            const double lam = rayleigh_lambda_q(S, q_list[r], ropts).lambda;
            require(lam > 0.0, errc::non_convergence, "lambda_q must be positive");
            rep.lambda(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = lam;
            rep.constant(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                1.0 / std::sqrt(lam);
        }
    }
    for (std::size_t r = 0; r < q_list.size(); ++r) {
        double cmin = kInf, cmax = -kInf;
        for (std::size_t c = 0; c < resolutions.size(); ++c) {
            const double v = rep.constant(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            cmin = std::min(cmin, v);
            cmax = std::max(cmax, v);
        }
        if (cmax <= 1.05 * cmin) {
            rep.trend.push_back("stable");
        } else {
            const Eigen::Index last = rep.constant.cols() - 1;
            rep.trend.push_back(rep.constant(static_cast<Eigen::Index>(r), last) >
                                        rep.constant(static_cast<Eigen::Index>(r), 0)
                                    ? "growing"
                                    : "shrinking");
        }
    }
    return rep;
}

// Cell field over the cube partition used by the compactness diagnostic.
// Cubes have side rho = cells_per_side * h, anchored at h/2 so node cells
// nest exactly: cube cx covers lattice indices 1 + m*cx .. m*(cx+1).
// The field extends by zero past the interior lattice where a cube sticks out.
struct CubeField {
    GridPtr grid;
    int cells_per_side = 0;  // m = rho / h
    int ncube = 0;           // cubes per side
    Eigen::MatrixXd cells;   // (ncube*m)^2 cell values, index = lattice - 1
};

namespace detail {

inline int checked_cube_side(const Grid& g, double rho) {
    const double ratio = rho / g.h();
    const int m = static_cast<int>(std::lround(ratio));
    require(std::abs(ratio - m) <= 1e-9 && m >= 1, errc::rho_not_multiple_of_h,
            "cube side must be a positive multiple of h");
    return m;
}

} // namespace detail

inline CubeField to_cube_field(const NodalFunction& f, double rho) {
    const Grid& g = *f.grid;
    const int m = detail::checked_cube_side(g, rho);
    const int interior_span = g.resolution() - 2;
    CubeField cf;
    cf.grid = f.grid;
    cf.cells_per_side = m;
    cf.ncube = (interior_span + m - 1) / m;
    cf.cells = Eigen::MatrixXd::Zero(cf.ncube * m, cf.ncube * m);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto& lat = g.lattice(i);
        cf.cells(lat[0] - 1, lat[1] - 1) = f.values[static_cast<Eigen::Index>(i)];
    }
    return cf;
}

// P(f): average over each cube, written back to every cell of the cube.
// The average is computed as v0 + mean(v - v0), which makes P exactly
// idempotent: re-averaging a cube-constant adds a sum of exact zeros.
inline CubeField cube_project(const CubeField& f) {
    CubeField out = f;
    const int m = f.cells_per_side;
    for (int cx = 0; cx < f.ncube; ++cx)
        for (int cy = 0; cy < f.ncube; ++cy) {
            const double v0 = f.cells(cx * m, cy * m);
            double acc = 0.0;
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) acc += f.cells(cx * m + a, cy * m + b) - v0;
            const double q = v0 + acc / (static_cast<double>(m) * m);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) out.cells(cx * m + a, cy * m + b) = q;
        }
    return out;
}

inline CubeField cube_project(const NodalFunction& f, double rho) {
    return cube_project(to_cube_field(f, rho));
}

struct CompactnessDiag {
    double rho = 0.0;
    double kernel_at_2rho = 0.0;
    std::vector<double> lhs;    // ||f - P(f)||^2_{L^2}
    std::vector<double> rhs;    // ||f||^2_{X0} / (rho^N K(2 rho))
    std::vector<double> slack;  // rhs / lhs
    std::vector<bool> pass;
    bool all_pass = true;
};

// Checks ||f - P(f)||^2_{L^2} <= u'Au / (rho^N K(2 rho)) per test function.
// The L^2 norm runs over all cube cells: node cells carry f, the remaining
// cells of each cube carry 0 and contribute (0 - q)^2.
inline CompactnessDiag compactness_diagnostic(const StiffnessMatrix& S, const KernelSpec& spec,
                                              double rho,
                                              const std::vector<NodalFunction>& test_fns) {
    CompactnessDiag diag;
    diag.rho = rho;
    diag.kernel_at_2rho = spec.eval(2.0 * rho);
    const Grid& g = *S.grid;
    const double vol = g.cell_volume();

    for (const NodalFunction& f : test_fns) {
        require_matching_grid(S, f);
        const CubeField F = to_cube_field(f, rho);
        const CubeField P = cube_project(F);

        double lhs = 0.0;
        for (Eigen::Index a = 0; a < F.cells.rows(); ++a)
            for (Eigen::Index b = 0; b < F.cells.cols(); ++b) {
                const double d = F.cells(a, b) - P.cells(a, b);
                lhs += d * d * vol;
            }

        const double x0_sq = f.values.dot(S.A * f.values);
        const double rhs = x0_sq / (std::pow(rho, Grid::dimension) * diag.kernel_at_2rho);
        diag.lhs.push_back(lhs);
        diag.rhs.push_back(rhs);
        diag.slack.push_back(lhs > 0.0 ? rhs / lhs : kInf);
        diag.pass.push_back(lhs <= rhs * (1.0 + 1e-12));
        diag.all_pass = diag.all_pass && diag.pass.back();
    }
    return diag;
}

struct ConcentrationRow {
    double width = 0.0;
    double ratio = 0.0;  // ||u||_q / sqrt(u'Au)
};

// Ratio ||u||_q / ||u||_{X0} for center bumps of shrinking width; a trend
// table, no continuum claim.
inline std::vector<ConcentrationRow> concentration_probe(const StiffnessMatrix& S, double q,
                                                         const std::vector<double>& widths) {
    std::vector<ConcentrationRow> rows;
    const double c = 0.5 * S.grid->box_side();
    for (double w : widths) {
        NodalFunction u = make_bump(S.grid, c, c, w);
        const double nq = lq_norm(u, q);
        const double en = std::sqrt(u.values.dot(S.A * u.values));
        require(en > 0.0, errc::invalid_argument, "bump width leaves no interior support");
        rows.push_back({w, nq / en});
    }
    return rows;
}

} // namespace ks

#endif
