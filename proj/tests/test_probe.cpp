#include <Eigen/Eigenvalues>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ks/probe.hpp"
#include "ks/rng.hpp"

using namespace ks;

namespace {
StiffnessMatrix make_S(int res, const KernelSpec& k, DomainShape shape = DomainShape::square,
                       double size = 1.0) {
    return assemble_stiffness(make_domain(shape, size, res), k);
}
} // namespace

TEST_CASE("lambda_2 agrees with the generalized eigenvalue oracle") {
    const StiffnessMatrix S = make_S(17, KernelSpec::fractional(0.5, 2));
    const double lam = rayleigh_lambda_q(S, 2.0).lambda;
    // oracle: smallest eigenvalue of (A, vol I) via the dense symmetric solver
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S.A / S.grid->cell_volume());
    CHECK(std::abs(lam - es.eigenvalues()(0)) / es.eigenvalues()(0) <= 1e-8);
}

TEST_CASE("lambda_q positivity and monotonicity") {
    const KernelSpec k1 = KernelSpec::fractional(0.5, 2);
    const KernelSpec k2 = KernelSpec::log_corrected(0.5, 1.0, 2);  // K2 >= K1
    const StiffnessMatrix S1 = make_S(17, k1);
    const StiffnessMatrix S2 = make_S(17, k2);
    for (double q : {1.0, 2.0, 3.0}) {
        const double l1 = rayleigh_lambda_q(S1, q).lambda;
        const double l2 = rayleigh_lambda_q(S2, q).lambda;
        CHECK(l1 > 0.0);
        CHECK(l1 <= l2 * (1.0 + 1e-9));
    }
    // domain monotonicity at matched h: Square(1)@17 vs Square(2)@33
    const StiffnessMatrix Sbig = make_S(33, k1, DomainShape::square, 2.0);
    for (double q : {2.0, 3.0}) {
        CHECK(rayleigh_lambda_q(S1, q).lambda >=
              rayleigh_lambda_q(Sbig, q).lambda * (1.0 - 1e-9));
    }
}

TEST_CASE("lambda_q restart stability") {
    const StiffnessMatrix S = make_S(17, KernelSpec::fractional(0.5, 2));
    RayleighOptions a, b;
    a.seed = 1001;
    b.seed = 77123;
    const double la = rayleigh_lambda_q(S, 3.0, a).lambda;
    const double lb = rayleigh_lambda_q(S, 3.0, b).lambda;
    CHECK(std::abs(la - lb) / la < 0.01);
    const auto res = rayleigh_lambda_q(S, 3.0, a);
    CHECK(res.seeds.size() == 5);
    CHECK(res.per_restart.size() == 5);
}

TEST_CASE("embedding sweep: stability and Hoelder ordering") {
    const KernelSpec k = KernelSpec::fractional(0.5, 2);
    const EmbeddingReport rep =
        embedding_sweep(k, DomainShape::square, 1.0, {9, 17, 33}, {1.0, 2.0, 3.0});
    REQUIRE(rep.lambda.rows() == 3);
    REQUIRE(rep.lambda.cols() == 3);
    // C_2 stable to within 5% across resolutions
    CHECK(rep.trend[1] == "stable");
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index c = 0; c < 3; ++c) CHECK(rep.lambda(r, c) > 0.0);

    // normalized Hoelder chain: C_q |O|^{-1/q} nondecreasing in q per column
    const GridPtr g9 = make_domain(DomainShape::square, 1.0, 9);
    for (Eigen::Index c = 0; c < 3; ++c) {
        const GridPtr g = make_domain(DomainShape::square, 1.0, rep.resolutions[static_cast<std::size_t>(c)]);
        const double measure = g->domain_measure();
        double prev = -1.0;
        for (Eigen::Index r = 0; r < 3; ++r) {
            const double q = rep.q_values[static_cast<std::size_t>(r)];
            const double normalized = rep.constant(r, c) * std::pow(measure, -1.0 / q);
            CHECK(normalized >= prev * (1.0 - 1e-9));
            prev = normalized;
        }
    }
    // q = 1 against q = 2 with the explicit Hoelder constant
    const double measure = g9->domain_measure();
    CHECK(rep.constant(0, 0) <= std::sqrt(measure) * rep.constant(1, 0) * (1.0 + 1e-9));
}

TEST_CASE("cube projection: constants are fixed points, projection idempotent") {
    const GridPtr g = make_domain(DomainShape::square, 1.0, 33);
    const double rho = 4.0 * g->h();

    // cube-indicator combination: P fixes any cube-constant field
    NodalFunction f(g);
    {
        CubeField base = to_cube_field(f, rho);
        Rng rng(5);
        for (int cx = 0; cx < base.ncube; ++cx)
            for (int cy = 0; cy < base.ncube; ++cy) {
                const double v = rng.uniform(-2.0, 2.0);
                for (int a = 0; a < base.cells_per_side; ++a)
                    for (int b = 0; b < base.cells_per_side; ++b)
                        base.cells(cx * base.cells_per_side + a, cy * base.cells_per_side + b) = v;
            }
        const CubeField P1 = cube_project(base);
        CHECK((P1.cells - base.cells).cwiseAbs().maxCoeff() == 0.0);
    }

    // idempotence on arbitrary nodal data, bitwise
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        NodalFunction u(g);
        for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values[i] = rng.normal();
        const CubeField P1 = cube_project(to_cube_field(u, rho));
        const CubeField P2 = cube_project(P1);
        CHECK((P1.cells - P2.cells).cwiseAbs().maxCoeff() == 0.0);
    }

    CHECK_THROWS_AS(to_cube_field(f, 4.1 * g->h()), Error);  // not a multiple of h
}

TEST_CASE("compactness inequality holds with slack on smooth bumps") {
    const KernelSpec k = KernelSpec::fractional(0.5, 2);
    const StiffnessMatrix S = make_S(33, k);
    const double rho = 4.0 * S.grid->h();
    Rng rng(12345);
    std::vector<NodalFunction> fns;
    for (int t = 0; t < 10; ++t) {
        const double cx = rng.uniform(0.3, 0.7);
        const double cy = rng.uniform(0.3, 0.7);
        const double w = rng.uniform(0.15, 0.3);
        fns.push_back(make_bump(S.grid, cx, cy, w));
    }
    const CompactnessDiag diag = compactness_diagnostic(S, k, rho, fns);
    CHECK(diag.all_pass);
    for (double s : diag.slack) CHECK(s >= 1.0);
    CHECK(diag.kernel_at_2rho == Catch::Approx(k.eval(2.0 * rho)).epsilon(1e-15));
}

TEST_CASE("concentration probe is bounded by the sweep constant") {
    const KernelSpec k = KernelSpec::fractional(0.5, 2);
    const StiffnessMatrix S = make_S(33, k);
    const double C2 = 1.0 / std::sqrt(rayleigh_lambda_q(S, 2.0).lambda);
    const auto rows = concentration_probe(S, 2.0, {0.5, 0.25, 0.125});
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.ratio <= C2 * (1.0 + 1e-9));

    // near-critical q: single functions stay below the sweep infimum constant
    const double q = 4.0;  // 2*(0.5) at N = 2
    RayleighOptions ropts;
    const double Cq = 1.0 / std::sqrt(rayleigh_lambda_q(S, q, ropts).lambda);
    for (const auto& r : concentration_probe(S, q, {0.5, 0.25, 0.125}))
        CHECK(r.ratio <= Cq * (1.0 + 1e-9));
}
