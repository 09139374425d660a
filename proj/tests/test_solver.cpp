#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ks/rng.hpp"
#include "ks/solver.hpp"

using namespace ks;

namespace {
StiffnessMatrix make_S(int res = 17, double s = 0.5) {
    return assemble_stiffness(make_domain(DomainShape::square, 1.0, res),
                              KernelSpec::fractional(s, 2));
}
} // namespace

TEST_CASE("functional_J basics") {
    const StiffnessMatrix S = make_S(9);
    NodalFunction z(S.grid);
    CHECK(functional_J(S, z, 3.0) == 0.0);

    Rng rng(3);
    NodalFunction u(S.grid);
    for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values[i] = rng.normal();
    const double p = 3.0;
    // homogeneity split: J(2u) = 4 (u'Au)/2 - 2^p ||u||_p^p / p
    const double a = u.values.dot(S.A * u.values);
    const double b = std::pow(lq_norm(u, p), p);
    NodalFunction u2(S.grid, 2.0 * u.values);
    CHECK(functional_J(S, u2, p) ==
          Catch::Approx(4.0 * 0.5 * a - std::pow(2.0, p) * b / p).epsilon(1e-12));
    CHECK_THROWS_AS(functional_J(S, u, 2.0), Error);
}

TEST_CASE("gradient matches central finite differences") {
    const StiffnessMatrix S = make_S(9);
    const double p = 3.0;
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        NodalFunction u(S.grid), v(S.grid);
        for (Eigen::Index i = 0; i < u.values.size(); ++i) {
            u.values[i] = rng.normal();
            v.values[i] = rng.normal();
        }
        const double eps = 1e-5;
        NodalFunction up(S.grid, u.values + eps * v.values);
        NodalFunction um(S.grid, u.values - eps * v.values);
        const double fd = (functional_J(S, up, p) - functional_J(S, um, p)) / (2.0 * eps);
        const double dir = grad_J(S, u, p).values.dot(v.values);
        CHECK(std::abs(fd - dir) / std::max(std::abs(fd), 1e-30) <= 1e-6);
    }
    NodalFunction z(S.grid);
    CHECK(grad_J(S, z, 3.0).values.norm() == 0.0);
}

TEST_CASE("find_e: doubling lands below zero") {
    const StiffnessMatrix S = make_S(9);
    const double p = 4.0;
    NodalFunction u0 = make_distance_profile(S.grid);
    // scale so u0'Au0 = 1; the scalar oracle then predicts t0 exactly
    u0.values /= std::sqrt(u0.values.dot(S.A * u0.values));
    const double b = std::pow(lq_norm(u0, p), p);
    const auto [e, t0] = find_e(S, p, u0);
    CHECK(functional_J(S, e, p) <= 0.0);
    // scalar oracle: smallest power of two with t^2/2 <= t^4 b / 4
    double t_pred = 1.0;
    while (t_pred * t_pred / 2.0 - std::pow(t_pred, p) * b / p > 0.0) t_pred *= 2.0;
    CHECK(t0 == t_pred);
    // pre-scaling u0 by 2 needs fewer doublings
    NodalFunction u0s(S.grid, 2.0 * u0.values);
    const auto [e2, t2] = find_e(S, p, u0s);
    CHECK(t2 <= t0);
    CHECK(functional_J(S, e2, p) <= 0.0);
}

TEST_CASE("nehari ground state: identities at convergence") {
    const StiffnessMatrix S = make_S(17);
    SolveConfig cfg;
    cfg.p = 3.0;
    cfg.grad_tol = 1e-6;
    cfg.record_iterates = true;
    const Solution sol = nehari_ground_state(S, cfg);

    CHECK(sol.residual <= 1e-6);
    CHECK(sol.nehari_gap <= 1e-6);
    const double pp = std::pow(lq_norm(sol.u, cfg.p), cfg.p);
    CHECK(std::abs(sol.energy - (0.5 - 1.0 / cfg.p) * pp) / std::abs(sol.energy) <= 1e-6);
    CHECK(sol.energy > 0.0);
    // positive interior maximum from the positive bump start
    CHECK(sol.u.values.maxCoeff() > 0.0);
    CHECK(sol.u.values.maxCoeff() >= -sol.u.values.minCoeff());

    // sign flip: -u* has identical residual (odd nonlinearity)
    CHECK(solution_residual(S, -sol.u.values, cfg.p) ==
          Catch::Approx(solution_residual(S, sol.u.values, cfg.p)).margin(1e-18));

    // recorded trace feeds the PS monitor
    const auto rows = ps_sequence_monitor(sol.iterates, S, cfg.p);
    REQUIRE(!rows.empty());
    for (const auto& r : rows) CHECK(r.bounded_ok);
    // residual column decreasing to tolerance at the tail of the run
    CHECK(rows.back().residual / rows.back().x0_norm <= 1e-3);
}

TEST_CASE("kernel scaling equivariance of the ground state") {
    const double p = 3.0;
    const GridPtr g = make_domain(DomainShape::square, 1.0, 17);
    const KernelSpec k = KernelSpec::fractional(0.5, 2);
    SolveConfig cfg;
    cfg.p = p;
    cfg.grad_tol = 1e-9;
    for (double c : {0.5, 2.0}) {
        const Solution base = nehari_ground_state(assemble_stiffness(g, k), cfg);
        const Solution scaled = nehari_ground_state(assemble_stiffness(g, k.with_scale(c)), cfg);
        const double factor = std::pow(c, 1.0 / (p - 2.0));
        const double err = (scaled.u.values - factor * base.u.values).cwiseAbs().maxCoeff() /
                           base.u.values.cwiseAbs().maxCoeff();
        CHECK(err <= 1e-8);
    }
}

TEST_CASE("rho and beta: positive and honored on the sphere") {
    const StiffnessMatrix S = make_S(17);
    const double p = 3.0;
    const auto [rho, beta] = estimate_rho_beta(S, p);
    CHECK(rho > 0.0);
    CHECK(beta > 0.0);
    CHECK(beta == Catch::Approx(0.25 * rho * rho).epsilon(1e-15));

    Rng rng(99);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd v(S.A.rows());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
        v *= rho / std::sqrt(v.dot(S.A * v));
        CHECK(functional_J(S, NodalFunction(S.grid, v), p) >= beta - 1e-10);
    }

    // rescaled kernel keeps beta positive
    const StiffnessMatrix S2 =
        assemble_stiffness(S.grid, KernelSpec::fractional(0.5, 2).with_scale(2.0));
    const auto [rho2, beta2] = estimate_rho_beta(S2, p);
    CHECK(beta2 > 0.0);
    (void)rho2;
}

TEST_CASE("mountain pass agrees with the Nehari level") {
    const StiffnessMatrix S = make_S(17);
    SolveConfig cfg;
    cfg.p = 3.0;
    cfg.grad_tol = 1e-6;
    cfg.record_iterates = true;
    const Solution nehari = nehari_ground_state(S, cfg);

    SolveConfig mp_cfg = cfg;
    mp_cfg.method = SolveMethod::mountain_pass;
    mp_cfg.grad_tol = 1e-5;
    mp_cfg.max_iters = 4000;
    const Solution mp = mountain_pass_solve(S, mp_cfg);

    CHECK(mp.residual <= 1e-5);
    CHECK(mp.energy >= nehari.energy - 1e-8);
    const auto [rho, beta] = estimate_rho_beta(S, cfg.p);
    (void)rho;
    CHECK(mp.energy >= beta);
    CHECK(mp.nehari_gap <= 1e-4);

    // path maxima nonincreasing: the recorded maximizer values
    const auto trace = mp.iterates;
    double prev = kInf;
    for (const auto& u : trace) {
        const double J = functional_J(S, u, cfg.p);
        CHECK(J <= prev + 1e-12);
        prev = J;
    }
}

TEST_CASE("general nonlinearity mountain pass reduces to pure power") {
    const StiffnessMatrix S = make_S(9);
    SolveConfig cfg;
    cfg.p = 3.0;
    cfg.method = SolveMethod::mountain_pass;
    cfg.grad_tol = 1e-5;
    cfg.max_iters = 4000;
    const Solution pp = mountain_pass_solve(S, cfg);
    const Solution gen = mountain_pass_solve(S, NonlinearitySpec::pure_power(3.0), cfg);
    CHECK(gen.residual <= 1e-5);
    CHECK(std::abs(gen.energy - pp.energy) / pp.energy <= 1e-4);
}

TEST_CASE("subcritical gate") {
    const StiffnessMatrix S = make_S(9);
    SolveConfig cfg;
    cfg.p = 4.5;
    cfg.two_star_bound = 4.0;  // 2*(0.5) at N = 2
    CHECK_THROWS_AS(nehari_ground_state(S, cfg), Error);
    cfg.allow_supercritical = true;
    cfg.grad_tol = 1e-5;
    CHECK_NOTHROW(nehari_ground_state(S, cfg));
}

TEST_CASE("AR condition check") {
    const NonlinearitySpec power = NonlinearitySpec::pure_power(3.0);
    std::vector<ArSample> samples;
    Rng rng(31);
    for (int i = 0; i < 200; ++i)
        samples.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                           (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(1.0, 100.0)});
    // mu = p: equality case passes
    CHECK(ar_condition_check(power, samples, 3.0, 1.0).pass);

    // linear term fails: mu F = 3 t^2 / 2 > t^2 = t f
    NonlinearitySpec linear;
    linear.f = [](double, double, double t) { return t; };
    linear.F = [](double, double, double t) { return 0.5 * t * t; };
    CHECK_FALSE(ar_condition_check(linear, samples, 3.0, 1.0).pass);

    // superquadratic with a bounded wiggle passes for |t| >= 10
    NonlinearitySpec wiggle;
    wiggle.f = [](double, double, double t) {
        return std::pow(std::abs(t), 2.0) * t + std::sin(t);
    };
    wiggle.F = [](double, double, double t) {
        return std::pow(std::abs(t), 4.0) / 4.0 + 1.0 - std::cos(t);
    };
    std::vector<ArSample> far;
    for (int i = 0; i < 400; ++i)
        far.push_back({0.5, 0.5, (i % 2 ? -1.0 : 1.0) * (10.0 + 90.0 * i / 399.0)});
    CHECK(ar_condition_check(wiggle, far, 3.0, 10.0).pass);
}

TEST_CASE("ps monitor zero row") {
    const StiffnessMatrix S = make_S(9);
    const std::vector<NodalFunction> iterates = {NodalFunction(S.grid)};
    const auto rows = ps_sequence_monitor(iterates, S, 3.0);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].J == 0.0);
    CHECK(rows[0].residual == 0.0);
    CHECK(rows[0].x0_norm == 0.0);
    CHECK(rows[0].bounded_ok);
}

TEST_CASE("cg solves the form to tight residual") {
    const StiffnessMatrix S = make_S(9);
    Rng rng(41);
    Eigen::VectorXd b(S.A.rows());
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.normal();
    const Eigen::VectorXd x = cg_solve(S.A, b, 1e-10);
    CHECK((S.A * x - b).norm() / b.norm() <= 1e-10);
}
