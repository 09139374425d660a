#ifndef KS_ASSEMBLY_HPP
#define KS_ASSEMBLY_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <thread>
#include <vector>

#include "ks/errors.hpp"
#include "ks/grid.hpp"
#include "ks/hash.hpp"
#include "ks/kernel.hpp"

namespace ks {

struct AssemblyConfig {
    double split_factor = 2.0;  // near/far splitting radius delta = split_factor * h
    int near_order = 4;         // Gauss-Legendre points per axis per subcell
    int near_subdiv = 2;        // subcells per axis for near pairs
    bool self_correction = true;

    std::string describe() const {
        return "assembly(split=" + detail::fmt_g(split_factor) +
               ",order=" + std::to_string(near_order) +
               ",subdiv=" + std::to_string(near_subdiv) +
               ",selfcorr=" + std::to_string(self_correction ? 1 : 0) + ")";
    }
};

struct ExteriorWeight {
    GridPtr grid;
    Eigen::VectorXd w;  // w(x) = int_{Omega^c} K(x-y) dy per interior node
};

namespace detail {

inline const std::vector<std::pair<double, double>>& gauss_rule(int n) {
    // nodes/weights on [-1, 1]
    static const std::vector<std::vector<std::pair<double, double>>> rules = {
        {{0.0, 2.0}},
        {{-0.5773502691896257, 1.0}, {0.5773502691896257, 1.0}},
        {{-0.7745966692414834, 0.5555555555555556},
         {0.0, 0.8888888888888889},
         {0.7745966692414834, 0.5555555555555556}},
        {{-0.8611363115940526, 0.3478548451374538},
         {-0.3399810435848563, 0.6521451548625461},
         {0.3399810435848563, 0.6521451548625461},
         {0.8611363115940526, 0.3478548451374538}},
        {{-0.9061798459386640, 0.2369268850561891},
         {-0.5384693101056831, 0.4786286704993665},
         {0.0, 0.5688888888888889},
         {0.5384693101056831, 0.4786286704993665},
         {0.9061798459386640, 0.2369268850561891}}};
    require(n >= 1 && n <= 5, errc::invalid_argument, "near_order must be in [1,5]");
    return rules[static_cast<std::size_t>(n - 1)];
}

// 1-D composite Gauss rule over a cell of unit width centered at 0:
// `subdiv` equal subcells, `order` points each. Positions in cell-width
// units, weights summing to 1.
inline std::vector<std::pair<double, double>> composite_axis_rule(int order, int subdiv) {
    require(subdiv >= 1 && subdiv <= 8, errc::invalid_argument, "near_subdiv must be in [1,8]");
    const auto& gl = gauss_rule(order);
    std::vector<std::pair<double, double>> out;
    const double w_sub = 1.0 / subdiv;
    for (int t = 0; t < subdiv; ++t) {
        const double c = -0.5 + (t + 0.5) * w_sub;
        for (const auto& [x, w] : gl) out.push_back({c + 0.5 * w_sub * x, 0.5 * w_sub * w});
    }
    return out;
}

} // namespace detail

// Cell-pair averaged kernel value for nodes i != j, canonically oriented so
// that both assembly paths produce bitwise identical entries. Far pairs get
// the midpoint value; near pairs (center distance <= split_factor*h) a
// composite tensor Gauss rule over both cells.
inline double pair_average_kernel(const Grid& grid, const KernelSpec& spec,
                                  const AssemblyConfig& cfg, std::size_t i, std::size_t j) {
    const std::size_t a = std::min(i, j), b = std::max(i, j);
    const auto& pa = grid.node(a);
    const auto& pb = grid.node(b);
    const double dx = pb[0] - pa[0], dy = pb[1] - pa[1];
    const double dist = std::hypot(dx, dy);
    const double h = grid.h();
    if (dist > cfg.split_factor * h * (1.0 + 1e-12)) return spec.eval(dist);

    const auto axis = detail::composite_axis_rule(cfg.near_order, cfg.near_subdiv);
    double acc = 0.0;
    for (const auto& [ax, wax] : axis)
        for (const auto& [ay, way] : axis)
            for (const auto& [bx, wbx] : axis)
                for (const auto& [by, wby] : axis) {
                    const double zx = dx + h * (bx - ax);
                    const double zy = dy + h * (by - ay);
                    acc += wax * way * wbx * wby * spec.eval(std::hypot(zx, zy));
                }
    return acc;
}

// w(x) = T(d(x)) - int_{Omega \ B_{d(x)}(x)} K(x-y) dy, the second integral by
// per-cell midpoint quadrature over the bounding-box cells.
inline ExteriorWeight exterior_weight(const GridPtr& grid, const KernelSpec& spec) {
    const int nc = grid->resolution() - 1;  // cells per side of the bounding box
    const double h = grid->h();
    const double vol = grid->cell_volume();
    ExteriorWeight ew{grid, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->node_count()))};

    std::vector<double> centers(static_cast<std::size_t>(nc));
    for (int k = 0; k < nc; ++k) centers[static_cast<std::size_t>(k)] = (k + 0.5) * h;
    std::vector<char> inside(static_cast<std::size_t>(nc) * nc);
    for (int kx = 0; kx < nc; ++kx)
        for (int ky = 0; ky < nc; ++ky)
            inside[static_cast<std::size_t>(kx) * nc + ky] =
                grid->contains(centers[static_cast<std::size_t>(kx)], centers[static_cast<std::size_t>(ky)]) ? 1 : 0;

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& p = grid->node(i);
            const double d = grid->boundary_distance(i);
            double q = 0.0;
            for (int kx = 0; kx < nc; ++kx) {
                const double cx = centers[static_cast<std::size_t>(kx)];
                for (int ky = 0; ky < nc; ++ky) {
                    if (!inside[static_cast<std::size_t>(kx) * nc + ky]) continue;
                    const double r = std::hypot(cx - p[0], centers[static_cast<std::size_t>(ky)] - p[1]);
                    if (r > d) q += spec.eval(r);
                }
            }
            ew.w[static_cast<Eigen::Index>(i)] = tail(spec, d) - q * vol;
        }
    };
    const std::size_t M = grid->node_count();
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t nthreads = std::min<std::size_t>(hw, 8);
    if (nthreads <= 1 || M < 64) {
        work(0, M);
    } else {
        std::vector<std::thread> ts;
        const std::size_t chunk = (M + nthreads - 1) / nthreads;
        for (std::size_t t = 0; t < nthreads; ++t)
            ts.emplace_back(work, t * chunk, std::min(M, (t + 1) * chunk));
        for (auto& t : ts) t.join();
    }
    return ew;
}

struct StiffnessMatrix {
    GridPtr grid;
    Eigen::MatrixXd A;
    AssemblyConfig cfg;
    std::string kernel_description;
    std::string fingerprint;  // hash of grid + kernel + config
};

inline std::string stiffness_fingerprint(const Grid& grid, const KernelSpec& spec,
                                         const AssemblyConfig& cfg) {
    return fingerprint_of(grid.describe() + "|" + spec.describe() + "|" + cfg.describe());
}

namespace detail {

inline void add_self_correction(const Grid& grid, const KernelSpec& spec, Eigen::MatrixXd& A) {
    // leading singular self-cell energy via a piecewise-linear gradient
    // surrogate: sum_i |grad u(x_i)|^2 m(h/2)/N vol, central differences with
    // zero exterior neighbors
    const double h = grid.h();
    const double c = second_moment(spec, 0.5 * h) / Grid::dimension * grid.cell_volume();
    const double coeff = c / (4.0 * h * h);
    const std::size_t M = grid.node_count();
    for (std::size_t i = 0; i < M; ++i) {
        const auto& lat = grid.lattice(i);
        for (int axis = 0; axis < 2; ++axis) {
            const int jp = grid.node_at(lat[0] + (axis == 0), lat[1] + (axis == 1));
            const int jm = grid.node_at(lat[0] - (axis == 0), lat[1] - (axis == 1));
            if (jp >= 0) A(jp, jp) += coeff;
            if (jm >= 0) A(jm, jm) += coeff;
            if (jp >= 0 && jm >= 0) {
                A(jp, jm) -= coeff;
                A(jm, jp) -= coeff;
            }
        }
    }
}

inline void fill_diagonal(const Grid& grid, const ExteriorWeight& ew, Eigen::MatrixXd& A) {
    const double vol = grid.cell_volume();
    const Eigen::Index M = A.rows();
    for (Eigen::Index i = 0; i < M; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < M; ++j)
            if (j != i) acc -= A(i, j);
        A(i, i) = acc + 2.0 * ew.w[i] * vol;
    }
}

inline void validate_kernel_for_assembly(const KernelSpec& spec) {
    require(spec.dimension() == 2, errc::unsupported_dimension,
            "assembly supports N = 2 kernels only");
    const IntegrabilityReport ir = check_levy_integrability(spec);
    require(ir.pass, errc::non_integrable_kernel,
            "kernel fails Levy integrability (" + ir.divergent_piece() + ")");
    require(check_monotone(spec, 256).pass, errc::invalid_argument,
            "kernel profile is not nonincreasing");
}

} // namespace detail

// Assembles the bilinear form matrix: off-diagonal -2 K(pair) vol^2, diagonal
// row sums plus the exterior weight and the singular self-cell correction.
// Parallel over rows; every accumulation runs in fixed index order, so the
// result is independent of the thread count.
inline StiffnessMatrix assemble_stiffness(const GridPtr& grid, const KernelSpec& spec,
                                          const AssemblyConfig& cfg = {}) {
    detail::validate_kernel_for_assembly(spec);
    const std::size_t M = grid->node_count();
    require(M <= 4096, errc::grid_too_large, "dense stiffness capped at 4096 nodes");

    StiffnessMatrix S;
    S.grid = grid;
    S.cfg = cfg;
    S.kernel_description = spec.describe();
    S.fingerprint = stiffness_fingerprint(*grid, spec, cfg);
    S.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    const double vol2 = grid->cell_volume() * grid->cell_volume();

    // interleaved rows for balance; each row written by exactly one thread
    auto rows = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < M; i += stride)
            for (std::size_t j = i + 1; j < M; ++j)
                S.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    -2.0 * pair_average_kernel(*grid, spec, cfg, i, j) * vol2;
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t nthreads = std::min<std::size_t>(hw, 8);
    if (nthreads <= 1 || M < 64) {
        rows(0, 1);
    } else {
        std::vector<std::thread> ts;
        for (std::size_t t = 0; t < nthreads; ++t) ts.emplace_back(rows, t, nthreads);
        for (auto& t : ts) t.join();
    }
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = i + 1; j < M; ++j)
            S.A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                S.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

    const ExteriorWeight ew = exterior_weight(grid, spec);
    detail::fill_diagonal(*grid, ew, S.A);
    if (cfg.self_correction) detail::add_self_correction(*grid, spec, S.A);
    return S;
}

// Reference path: the most literal double loop, no symmetry exploitation in
// the traversal (entries still come from the canonically oriented pair rule).
inline StiffnessMatrix assemble_dense_oracle(const GridPtr& grid, const KernelSpec& spec,
                                             const AssemblyConfig& cfg = {}) {
    detail::validate_kernel_for_assembly(spec);
    const std::size_t M = grid->node_count();
    require(M <= 400, errc::grid_too_large, "dense oracle capped at 400 nodes");

    StiffnessMatrix S;
    S.grid = grid;
    S.cfg = cfg;
    S.kernel_description = spec.describe();
    S.fingerprint = stiffness_fingerprint(*grid, spec, cfg);
    S.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    const double vol2 = grid->cell_volume() * grid->cell_volume();

    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            if (i == j) continue;
            S.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                -2.0 * pair_average_kernel(*grid, spec, cfg, i, j) * vol2;
        }
    const ExteriorWeight ew = exterior_weight(grid, spec);
    detail::fill_diagonal(*grid, ew, S.A);
    if (cfg.self_correction) detail::add_self_correction(*grid, spec, S.A);
    return S;
}

inline void require_matching_grid(const StiffnessMatrix& S, const NodalFunction& u) {
    require(u.grid && S.grid && u.grid->same_as(*S.grid), errc::grid_mismatch,
            "nodal function does not match the stiffness grid");
}

// u^T A v
inline double apply_form(const StiffnessMatrix& S, const NodalFunction& u, const NodalFunction& v) {
    require_matching_grid(S, u);
    require_matching_grid(S, v);
    return u.values.dot(S.A * v.values);
}

// Cholesky-backed solver for the assembled form; also the positive
// definiteness witness (LLT fails on indefinite input).
class FormSolver {
public:
    explicit FormSolver(const StiffnessMatrix& S) : llt_(S.A) {
        require(llt_.info() == Eigen::Success, errc::non_convergence,
                "stiffness matrix is not positive definite");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Smallest eigenvalue by (shifted) inverse power iteration at shift 0.
inline double smallest_eigenvalue(const StiffnessMatrix& S, double tol = 1e-12, int max_iters = 1000) {
    const FormSolver solver(S);
    const Eigen::Index M = S.A.rows();
    Eigen::VectorXd x = Eigen::VectorXd::Ones(M);
    x /= x.norm();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd y = solver.solve(x);
        y /= y.norm();
        const double next = y.dot(S.A * y);
        const bool done = it > 0 && std::abs(next - lambda) <= tol * std::abs(next);
        lambda = next;
        x = y;
        if (done) return lambda;
    }
    fail(errc::non_convergence, "inverse power iteration did not converge");
}

} // namespace ks

#endif
