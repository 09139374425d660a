#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ks/grid.hpp"
#include "ks/rng.hpp"

using namespace ks;

TEST_CASE("square grid node counts and spacing") {
    const GridPtr g5 = make_domain(DomainShape::square, 1.0, 5);
    CHECK(g5->h() == Catch::Approx(0.25).epsilon(1e-15));
    CHECK(g5->node_count() == 9);

    const GridPtr g33 = make_domain(DomainShape::square, 1.0, 33);
    CHECK(g33->node_count() == 31 * 31);

    for (int res : {7, 9, 17}) {
        const GridPtr g = make_domain(DomainShape::square, 1.0, res);
        CHECK(g->node_count() == static_cast<std::size_t>((res - 2) * (res - 2)));
    }

    const GridPtr g3 = make_domain(DomainShape::square, 1.0, 3);
    CHECK(g3->node_count() == 1);  // single interior node at the center

    CHECK_THROWS_AS(make_domain(DomainShape::square, 1.0, 2), Error);
}

TEST_CASE("disk nodes are a subset of square nodes") {
    const GridPtr disk = make_domain(DomainShape::disk, 0.5, 5);
    const GridPtr square = make_domain(DomainShape::square, 1.0, 5);
    CHECK(disk->h() == square->h());
    CHECK(disk->node_count() <= square->node_count());
    for (std::size_t i = 0; i < disk->node_count(); ++i) {
        const auto& p = disk->node(i);
        CHECK(square->node_at(disk->lattice(i)[0], disk->lattice(i)[1]) >= 0);
        CHECK(std::hypot(p[0] - 0.5, p[1] - 0.5) < 0.5);
    }
}

TEST_CASE("boundary distances are exact") {
    const GridPtr g = make_domain(DomainShape::square, 1.0, 5);
    for (std::size_t i = 0; i < g->node_count(); ++i) {
        const auto& p = g->node(i);
        const double d = std::min(std::min(p[0], 1.0 - p[0]), std::min(p[1], 1.0 - p[1]));
        CHECK(g->boundary_distance(i) == Catch::Approx(d).margin(1e-15));
        CHECK(g->boundary_distance(i) > 0.0);
        CHECK(g->max_boundary_distance(i) >= g->boundary_distance(i));
    }
    const GridPtr disk = make_domain(DomainShape::disk, 0.5, 9);
    for (std::size_t i = 0; i < disk->node_count(); ++i) {
        const auto& p = disk->node(i);
        CHECK(disk->boundary_distance(i) ==
              Catch::Approx(0.5 - std::hypot(p[0] - 0.5, p[1] - 0.5)).margin(1e-15));
    }
}

TEST_CASE("node order is lexicographic by coordinates") {
    const GridPtr g = make_domain(DomainShape::square, 1.0, 9);
    for (std::size_t i = 1; i < g->node_count(); ++i) {
        const auto& a = g->node(i - 1);
        const auto& b = g->node(i);
        CHECK((a[0] < b[0] || (a[0] == b[0] && a[1] < b[1])));
    }
}

TEST_CASE("lq_norm rectangle rule") {
    const GridPtr g = make_domain(DomainShape::square, 1.0, 5);
    NodalFunction u(g);
    u.values.setOnes();
    CHECK(lq_norm(u, 2.0) == Catch::Approx(0.75).epsilon(1e-15));  // sqrt(9/16)
    u.values.setZero();
    for (double q : {1.0, 2.0, 3.5}) CHECK(lq_norm(u, q) == 0.0);
    CHECK_THROWS_AS(lq_norm(u, 0.5), Error);
}

TEST_CASE("lq_norm monotone in |values| and Hoelder chain") {
    const GridPtr g = make_domain(DomainShape::square, 1.0, 9);
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        NodalFunction u(g), v(g);
        for (Eigen::Index i = 0; i < u.values.size(); ++i) {
            u.values[i] = rng.uniform(-1.0, 1.0);
            v.values[i] = u.values[i] * rng.uniform(1.0, 2.0);  // |v| >= |u|
        }
        const double q = rng.uniform(1.0, 5.0);
        CHECK(lq_norm(u, q) <= lq_norm(v, q) * (1.0 + 1e-12));
        // discrete Hoelder with the cell-volume measure: ||u||_1 <= |O|^{1-1/q} ||u||_q
        const double measure = g->domain_measure();
        CHECK(lq_norm(u, 1.0) <=
              std::pow(measure, 1.0 - 1.0 / q) * lq_norm(u, q) * (1.0 + 1e-12));
    }
}

TEST_CASE("bump vanishes outside its support") {
    const GridPtr g = make_domain(DomainShape::square, 1.0, 17);
    const NodalFunction u = make_bump(g, 0.5, 0.5, 0.25);
    double mx = 0.0;
    for (std::size_t i = 0; i < g->node_count(); ++i) {
        const auto& p = g->node(i);
        const double r = std::hypot(p[0] - 0.5, p[1] - 0.5);
        if (r >= 0.25) CHECK(u.values[static_cast<Eigen::Index>(i)] == 0.0);
        mx = std::max(mx, u.values[static_cast<Eigen::Index>(i)]);
    }
    CHECK(mx > 0.0);
}
