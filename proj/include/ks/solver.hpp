#ifndef KS_SOLVER_HPP
#define KS_SOLVER_HPP

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ks/assembly.hpp"
#include "ks/errors.hpp"
#include "ks/grid.hpp"
#include "ks/probe.hpp"

namespace ks {

enum class SolveMethod { nehari, mountain_pass };

inline const char* method_name(SolveMethod m) {
    return m == SolveMethod::nehari ? "nehari" : "mountain_pass";
}

struct SolveConfig {
    double p = 3.0;
    SolveMethod method = SolveMethod::nehari;
    double grad_tol = 1e-8;
    int max_iters = 2000;
    int path_points = 21;                  // mountain pass only
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    double step0 = 1.0;
    std::optional<double> two_star_bound;  // refuse p >= bound unless overridden
    bool allow_supercritical = false;
    bool record_iterates = false;
};

struct Solution {
    NodalFunction u;
    double energy = 0.0;
    double residual = 0.0;    // ||A u - G(u)|| / ||G(u)||
    double nehari_gap = 0.0;  // |u'Au - ||u||_p^p| / ||u||_p^p
    int iterations = 0;
    SolveMethod method = SolveMethod::nehari;
    std::vector<NodalFunction> iterates;  // when recorded
};

// Conjugate gradient for the dense SPD form; the descent preconditioner
// prescribed for the solvers.
inline Eigen::VectorXd cg_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                double rel_tol = 1e-10, int max_iters = -1) {
    const Eigen::Index n = A.rows();
    if (max_iters < 0) max_iters = static_cast<int>(4 * n) + 100;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r = b;
    Eigen::VectorXd p = r;
    const double bnorm = std::max(b.norm(), 1e-300);
    double rr = r.squaredNorm();
    for (int it = 0; it < max_iters && std::sqrt(rr) > rel_tol * bnorm; ++it) {
        const Eigen::VectorXd Ap = A * p;
        const double alpha = rr / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        const double rr_next = r.squaredNorm();
        p = r + (rr_next / rr) * p;
        rr = rr_next;
    }
    return x;
}

namespace detail {

// vol |u|^{p-2} u, the lumped nonlinear term (zero at zero for p > 2)
inline Eigen::VectorXd power_term(const Eigen::VectorXd& u, double p, double vol) {
    Eigen::VectorXd g(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double a = std::abs(u[i]);
        g[i] = (a == 0.0) ? 0.0 : vol * std::pow(a, p - 1.0) * (u[i] > 0 ? 1.0 : -1.0);
    }
    return g;
}

inline double power_sum(const Eigen::VectorXd& u, double p, double vol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) acc += std::pow(std::abs(u[i]), p);
    return acc * vol;  // = ||u||_p^p
}

inline void check_subcritical(const SolveConfig& cfg) {
    require(cfg.p > 2.0, errc::invalid_argument, "growth exponent p must exceed 2");
    if (cfg.two_star_bound && !cfg.allow_supercritical)
        require(cfg.p < *cfg.two_star_bound, errc::invalid_argument,
                "p is not subcritical for this kernel (override to probe anyway)");
}

} // namespace detail

// J(u) = 1/2 u'Au - (1/p) ||u||_p^p
inline double functional_J(const StiffnessMatrix& S, const NodalFunction& u, double p) {
    require_matching_grid(S, u);
    require(p > 2.0, errc::invalid_argument, "p must exceed 2");
    const double vol = S.grid->cell_volume();
    return 0.5 * u.values.dot(S.A * u.values) - detail::power_sum(u.values, p, vol) / p;
}

// Riesz vector of J' in the nodal pairing: A u - vol |u|^{p-2} u
inline NodalFunction grad_J(const StiffnessMatrix& S, const NodalFunction& u, double p) {
    require_matching_grid(S, u);
    require(p > 2.0, errc::invalid_argument, "p must exceed 2");
    const double vol = S.grid->cell_volume();
    return NodalFunction(u.grid, S.A * u.values - detail::power_term(u.values, p, vol));
}

// ||A u - G(u)|| / ||G(u)||; zero at u = 0
inline double solution_residual(const StiffnessMatrix& S, const Eigen::VectorXd& u, double p) {
    const double vol = S.grid->cell_volume();
    const Eigen::VectorXd G = detail::power_term(u, p, vol);
    const double gn = G.norm();
    if (gn == 0.0) return (S.A * u).norm();
    return (S.A * u - G).norm() / gn;
}

// Doubles t from 1 until J(t u0) <= 0; returns (e = t0 u0, t0).
inline std::pair<NodalFunction, double> find_e(const StiffnessMatrix& S, double p,
                                               const NodalFunction& u0) {
    require_matching_grid(S, u0);
    require(u0.values.norm() > 0.0, errc::invalid_argument, "u0 must be nonzero");
    double t = 1.0;
    while (functional_J(S, NodalFunction(u0.grid, t * u0.values), p) > 0.0) {
        t *= 2.0;
        require(t < 1e150, errc::non_convergence, "find_e doubling ran away");
    }
    return {NodalFunction(u0.grid, t * u0.values), t};
}

// Minimizes u'Au on the L^p unit sphere by inverse iteration in the A metric
// (v = A^{-1} J_p(u), renormalize; damped when the quotient fails to drop),
// then rescales to the critical point: u* = lambda^{1/(p-2)} w.
inline Solution nehari_ground_state(const StiffnessMatrix& S, const SolveConfig& cfg_in) {
    SolveConfig cfg = cfg_in;
    detail::check_subcritical(cfg);
    const double p = cfg.p;
    const double vol = S.grid->cell_volume();

    NodalFunction init = make_distance_profile(S.grid);
    Eigen::VectorXd w = init.values;
    {
        const double n0 = std::pow(detail::power_sum(w, p, vol), 1.0 / p);
        require(n0 > 0.0, errc::trivial_collapse, "initialization has empty support");
        w /= n0;
    }

    Solution sol;
    sol.method = SolveMethod::nehari;
    const double tight = std::min(cfg.grad_tol, 1e-11);
    double lam = w.dot(S.A * w);
    double res = kInf;
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        const Eigen::VectorXd Jp = detail::power_term(w, p, vol);
        const Eigen::VectorXd Aw = S.A * w;
        lam = w.dot(Aw);
        res = (Aw - lam * Jp).norm() / std::max((lam * Jp).norm(), 1e-300);
        if (cfg.record_iterates)
            sol.iterates.emplace_back(S.grid, std::pow(lam, 1.0 / (p - 2.0)) * w);
        if (res <= tight) break;

        Eigen::VectorXd v = cg_solve(S.A, Jp, 1e-10);
        require(v.norm() > 1e-300, errc::trivial_collapse, "inverse iteration collapsed to zero");
        double t = 1.0;
        bool accepted = false;
        for (int back = 0; back < 50 && !accepted; ++back) {
            Eigen::VectorXd cand = (1.0 - t) * w + t * v;
            const double np = std::pow(detail::power_sum(cand, p, vol), 1.0 / p);
            if (np > 1e-300) {
                cand /= np;
                const double lam_c = cand.dot(S.A * cand);
                if (lam_c <= lam * (1.0 + 1e-14)) {
                    w = cand;
                    accepted = true;
                }
            }
            t *= 0.5;
        }
        require(accepted, errc::non_convergence, "Nehari damping failed to find a descent step");
    }
    require(res <= cfg.grad_tol, errc::non_convergence,
            "Nehari iteration did not reach the residual tolerance");

    const double tcrit = std::pow(lam, 1.0 / (p - 2.0));
    Eigen::VectorXd ustar = tcrit * w;
    if (ustar.mean() < 0.0) ustar = -ustar;  // +-u* both critical; report the nonnegative-mean one
    require(std::pow(detail::power_sum(ustar, p, vol), 1.0 / p) > 1e-12, errc::trivial_collapse,
            "converged to the trivial solution");

    sol.u = NodalFunction(S.grid, ustar);
    sol.energy = functional_J(S, sol.u, p);
    sol.residual = solution_residual(S, ustar, p);
    const double pp = detail::power_sum(ustar, p, vol);
    sol.nehari_gap = std::abs(ustar.dot(S.A * ustar) - pp) / pp;
    sol.iterations = it;
    return sol;
}

// Discrete embedding constant C_p = lambda_p^{-1/2}, then the small-sphere
// radius rho = (2 C_p^p)^{-1/(p-2)} and level beta = rho^2 / 4 below which
// J >= beta on ||u||_{X0} = rho.
inline std::pair<double, double> estimate_rho_beta(const StiffnessMatrix& S, double p,
                                                   const RayleighOptions& ropts = {}) {
    require(p > 2.0, errc::invalid_argument, "p must exceed 2");
    const double lam_p = rayleigh_lambda_q(S, p, ropts).lambda;
    const double Cp = 1.0 / std::sqrt(lam_p);
    const double rho = std::pow(2.0 * std::pow(Cp, p), -1.0 / (p - 2.0));
    return {rho, 0.25 * rho * rho};
}

namespace detail {

// Generic ray maximization: argmax_{t>0} J(t v). Superquadratic growth sends
// J(t v) to -inf, so doubling brackets the ridge; golden section finishes.
// Pure power bypasses this with the closed form (a/b)^{1/(p-2)}.
template <class JFn>
inline double ray_argmax(JFn&& J) {
    double hi = 1.0;
    int guard = 0;
    while (J(hi) > 0.0) {
        hi *= 2.0;
        if (++guard > 200) fail(errc::non_convergence, "ray maximization failed to bracket");
    }
    double lo = 0.0;
    const double gr = 0.6180339887498948482;
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double Jc = J(c), Jd = J(d);
    for (int i = 0; i < 160; ++i) {
        if (Jc > Jd) {
            hi = d;
            d = c;
            Jd = Jc;
            c = hi - gr * (hi - lo);
            Jc = J(c);
        } else {
            lo = c;
            c = d;
            Jc = Jd;
            d = lo + gr * (hi - lo);
            Jd = J(d);
        }
    }
    return 0.5 * (lo + hi);
}

struct PurePowerProblem {
    const StiffnessMatrix& S;
    double p;
    double vol;

    double J(const Eigen::VectorXd& u) const {
        return 0.5 * u.dot(S.A * u) - power_sum(u, p, vol) / p;
    }
    Eigen::VectorXd grad(const Eigen::VectorXd& u) const {
        return S.A * u - power_term(u, p, vol);
    }
    double residual(const Eigen::VectorXd& u) const { return solution_residual(S, u, p); }
    double ray_max(const Eigen::VectorXd& v) const {
        const double a = v.dot(S.A * v);
        const double b = power_sum(v, p, vol);
        require(b > 0.0, errc::trivial_collapse, "ray through zero");
        return std::pow(a / b, 1.0 / (p - 2.0));
    }
};

} // namespace detail

// Mountain-pass path deformation. The path starts as the segment 0 -> e; each
// sweep locates the maximizer, takes an A-preconditioned Armijo descent step
// there, and re-anchors the stepped point at the maximum of J along its ray
// (the rescale keeps the deformed path crossing the ridge; plain descent at
// finite path resolution slides every node off the saddle and stalls).
// Acceptance demands the path maximum decrease, so max_k J(path_k) is
// nonincreasing across sweeps by construction.
template <class Problem>
inline Solution mountain_pass_deform(const StiffnessMatrix& S, const Problem& prob,
                                     const SolveConfig& cfg, const Eigen::VectorXd& direction) {
    const int P = std::max(5, cfg.path_points);
    Eigen::VectorXd u0 = direction;
    require(u0.norm() > 0.0, errc::invalid_argument, "empty deformation direction");
    u0 /= std::sqrt(u0.dot(S.A * u0));

    // e by doubling: smallest power of two with J(t u0) <= 0
    double t0 = 1.0;
    while (prob.J(t0 * u0) > 0.0) {
        t0 *= 2.0;
        require(t0 < 1e150, errc::non_convergence, "find_e doubling ran away");
    }
    const Eigen::VectorXd e = t0 * u0;

    std::vector<Eigen::VectorXd> path(static_cast<std::size_t>(P));
    std::vector<double> Js(static_cast<std::size_t>(P));
    for (int k = 0; k < P; ++k) {
        path[static_cast<std::size_t>(k)] = (static_cast<double>(k) / (P - 1)) * e;
        Js[static_cast<std::size_t>(k)] = prob.J(path[static_cast<std::size_t>(k)]);
    }

    Solution sol;
    sol.method = SolveMethod::mountain_pass;
    double res = kInf;
    int sweeps = 0;
    std::size_t kmax = 0;
    for (; sweeps < cfg.max_iters; ++sweeps) {
        kmax = 0;
        for (std::size_t k = 1; k < path.size(); ++k)
            if (Js[k] > Js[kmax]) kmax = k;
        require(kmax != 0 && kmax + 1 != path.size(), errc::path_collapse,
                "path maximum migrated to an endpoint");
        Eigen::VectorXd& u = path[kmax];
        const Eigen::VectorXd g = prob.grad(u);
        res = prob.residual(u);
        if (cfg.record_iterates) sol.iterates.emplace_back(S.grid, u);
        if (res <= cfg.grad_tol) break;

        const Eigen::VectorXd z = cg_solve(S.A, g, 1e-10);
        const double gz = g.dot(z);
        double alpha = cfg.step0;
        bool accepted = false;
        while (alpha > 1e-14 && !accepted) {
            const Eigen::VectorXd stepped = u - alpha * z;
            Eigen::VectorXd cand;
            if (stepped.norm() > 0.0) {
                const double that = prob.ray_max(stepped);
                cand = that * stepped;
                if (prob.J(cand) <= Js[kmax] - cfg.armijo_c * alpha * gz) {
                    u = cand;
                    Js[kmax] = prob.J(u);
                    accepted = true;
                    break;
                }
            }
            // fall back to the raw descent point when the rescaled one fails
            if (prob.J(stepped) <= Js[kmax] - cfg.armijo_c * alpha * gz) {
                u = stepped;
                Js[kmax] = prob.J(u);
                accepted = true;
                break;
            }
            alpha *= cfg.backtrack;
        }
        require(accepted, errc::non_convergence, "mountain-pass step rejected at all step sizes");
    }
    require(res <= cfg.grad_tol, errc::non_convergence,
            "mountain-pass deformation did not reach the residual tolerance");

    Eigen::VectorXd ustar = path[kmax];
    if (ustar.mean() < 0.0) ustar = -ustar;
    sol.u = NodalFunction(S.grid, ustar);
    sol.energy = prob.J(ustar);
    sol.residual = prob.residual(ustar);
    sol.iterations = sweeps;
    return sol;
}

inline Solution mountain_pass_solve(const StiffnessMatrix& S, const SolveConfig& cfg_in) {
    SolveConfig cfg = cfg_in;
    detail::check_subcritical(cfg);
    const detail::PurePowerProblem prob{S, cfg.p, S.grid->cell_volume()};
    const NodalFunction init = make_distance_profile(S.grid);
    Solution sol = mountain_pass_deform(S, prob, cfg, init.values);
    const double pp = detail::power_sum(sol.u.values, cfg.p, S.grid->cell_volume());
    sol.nehari_gap = std::abs(sol.u.values.dot(S.A * sol.u.values) - pp) / pp;
    return sol;
}

// General Caratheodory nonlinearity f(x, t) with primitive F; the structural
// constants mirror the subcritical growth and Ambrosetti-Rabinowitz data.
struct NonlinearitySpec {
    std::function<double(double, double, double)> f;  // (x, y, t)
    std::function<double(double, double, double)> F;
    double a1 = 0.0, a2 = 1.0, q = 3.0;  // |f| <= a1 + a2 |t|^{q-1}
    double mu = 3.0, r = 1.0;            // 0 < mu F <= t f for |t| >= r

    static NonlinearitySpec pure_power(double p) {
        NonlinearitySpec nl;
        nl.f = [p](double, double, double t) {
            return (t == 0.0) ? 0.0 : std::pow(std::abs(t), p - 1.0) * (t > 0 ? 1.0 : -1.0);
        };
        nl.F = [p](double, double, double t) { return std::pow(std::abs(t), p) / p; };
        nl.a1 = 0.0;
        nl.a2 = 1.0;
        nl.q = p;
        nl.mu = p;
        nl.r = 1.0;
        return nl;
    }
};

namespace detail {

struct GeneralProblem {
    const StiffnessMatrix& S;
    const NonlinearitySpec& nl;
    double vol;

    double nonlinear_energy(const Eigen::VectorXd& u) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < S.grid->node_count(); ++i) {
            const auto& x = S.grid->node(i);
            acc += nl.F(x[0], x[1], u[static_cast<Eigen::Index>(i)]);
        }
        return acc * vol;
    }
    double J(const Eigen::VectorXd& u) const {
        return 0.5 * u.dot(S.A * u) - nonlinear_energy(u);
    }
    Eigen::VectorXd grad(const Eigen::VectorXd& u) const {
        Eigen::VectorXd g = S.A * u;
        for (std::size_t i = 0; i < S.grid->node_count(); ++i) {
            const auto& x = S.grid->node(i);
            g[static_cast<Eigen::Index>(i)] -= vol * nl.f(x[0], x[1], u[static_cast<Eigen::Index>(i)]);
        }
        return g;
    }
    double residual(const Eigen::VectorXd& u) const {
        Eigen::VectorXd G(u.size());
        for (std::size_t i = 0; i < S.grid->node_count(); ++i) {
            const auto& x = S.grid->node(i);
            G[static_cast<Eigen::Index>(i)] = vol * nl.f(x[0], x[1], u[static_cast<Eigen::Index>(i)]);
        }
        const double gn = G.norm();
        if (gn == 0.0) return (S.A * u).norm();
        return (S.A * u - G).norm() / gn;
    }
    double ray_max(const Eigen::VectorXd& v) const {
        return ray_argmax([&](double t) { return J(t * v); });
    }
};

} // namespace detail

inline Solution mountain_pass_solve(const StiffnessMatrix& S, const NonlinearitySpec& nl,
                                    const SolveConfig& cfg) {
    require(cfg.p > 2.0 || nl.q > 2.0, errc::invalid_argument, "superquadratic growth required");
    const detail::GeneralProblem prob{S, nl, S.grid->cell_volume()};
    const NodalFunction init = make_distance_profile(S.grid);
    Solution sol = mountain_pass_deform(S, prob, cfg, init.values);
    double tf = 0.0;
    for (std::size_t i = 0; i < S.grid->node_count(); ++i) {
        const auto& x = S.grid->node(i);
        const double t = sol.u.values[static_cast<Eigen::Index>(i)];
        tf += t * nl.f(x[0], x[1], t);
    }
    tf *= S.grid->cell_volume();
    sol.nehari_gap = std::abs(sol.u.values.dot(S.A * sol.u.values) - tf) / std::max(std::abs(tf), 1e-300);
    return sol;
}

struct ArReport {
    bool pass = true;
    std::size_t violation_index = 0;
    double mu_F = 0.0, t_f = 0.0;  // first violating pair
};

// Checks 0 < mu F(x,t) <= t f(x,t) on every sample (|t| >= r required).
struct ArSample {
    double x = 0.0, y = 0.0, t = 0.0;
};

inline ArReport ar_condition_check(const NonlinearitySpec& nl, const std::vector<ArSample>& samples,
                                   double mu, double r) {
    require(mu > 2.0, errc::invalid_argument, "mu must exceed 2");
    ArReport rep;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        require(std::abs(s.t) >= r, errc::invalid_argument, "sample |t| below r");
        const double muF = mu * nl.F(s.x, s.y, s.t);
        const double tf = s.t * nl.f(s.x, s.y, s.t);
        if (!(muF > 0.0) || muF > tf * (1.0 + 1e-12)) {
            rep.pass = false;
            rep.violation_index = i;
            rep.mu_F = muF;
            rep.t_f = tf;
            return rep;
        }
    }
    return rep;
}

struct PsRow {
    double J = 0.0;
    double residual = 0.0;  // ||grad J||_2
    double x0_norm = 0.0;   // sqrt(u'Au)
    bool bounded_ok = true;
};

// Per-iterate diagnostics for a solver run plus the boundedness inequality
// (p/2 - 1)||u||^2 <= p J + ||grad J|| ||u||_2 + slack, which is the exact
// discrete identity p J - <J'(u), u> = (p/2 - 1)||u||^2 relaxed by
// Cauchy-Schwarz.
inline std::vector<PsRow> ps_sequence_monitor(const std::vector<NodalFunction>& iterates,
                                              const StiffnessMatrix& S, double p) {
    std::vector<PsRow> rows;
    for (const NodalFunction& u : iterates) {
        require_matching_grid(S, u);
        PsRow row;
        row.J = functional_J(S, u, p);
        const NodalFunction g = grad_J(S, u, p);
        row.residual = g.values.norm();
        row.x0_norm = std::sqrt(u.values.dot(S.A * u.values));
        const double lhs = (0.5 * p - 1.0) * row.x0_norm * row.x0_norm;
        const double rhs = p * row.J + row.residual * u.values.norm();
        row.bounded_ok = lhs <= rhs + 1e-8 * std::max(1.0, std::abs(rhs)) + 1e-12;
        rows.push_back(row);
    }
    return rows;
}

} // namespace ks

#endif
