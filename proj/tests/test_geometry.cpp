#include <cmath>

#include "doctest.h"

#include "gaugebench/geometry.hpp"

using namespace gb;

TEST_CASE("annulus chart layout and polar metric") {
    ChartPtr c = build_chart(DomainSpec::annulus(0.5, 1.0), {32});
    CHECK(c->n == 2);
    CHECK(c->N[0] == 32);
    CHECK(c->N[1] == 32);
    CHECK(c->periodic[0]);
    CHECK_FALSE(c->periodic[1]);
    CHECK(c->h[0] == doctest::Approx(2.0 * M_PI / 32));
    CHECK(c->h[1] == doctest::Approx(0.5 / 31));
    CHECK(c->boundary_count() == 64);
    for (int node : {0, 37, 500, c->nodes - 1}) {
        double r = c->coord(1, c->index_along(node, 1));
        CHECK(c->g(node, 0, 0) == doctest::Approx(r * r));
        CHECK(c->g(node, 1, 1) == doctest::Approx(1.0));
        CHECK(c->g(node, 0, 1) == doctest::Approx(0.0));
        CHECK(c->ginv(node, 0, 0) == doctest::Approx(1.0 / (r * r)));
        CHECK(c->volume[node] == doctest::Approx(r));
    }
    // boundary nodes: face 0 at r0, face 1 at r1
    for (int b = 0; b < c->boundary_count(); ++b) {
        int node = c->boundary_node(b);
        CHECK(c->is_boundary(node));
        CHECK(c->coord(1, c->index_along(node, 1)) == doctest::Approx(c->face_of(b) == 0 ? 0.5 : 1.0));
    }
}

TEST_CASE("Fornberg weights reproduce textbook stencils") {
    auto w = fd_weights({-1.0, 0.0, 1.0}, 0.0, 1);
    CHECK(w[0] == doctest::Approx(-0.5));
    CHECK(w[1] == doctest::Approx(0.0));
    CHECK(w[2] == doctest::Approx(0.5));
    auto w2 = fd_weights({-1.0, 0.0, 1.0}, 0.0, 2);
    CHECK(w2[0] == doctest::Approx(1.0));
    CHECK(w2[1] == doctest::Approx(-2.0));
    CHECK(w2[2] == doctest::Approx(1.0));
    auto one_sided = fd_weights({0.0, 1.0, 2.0}, 0.0, 1);
    CHECK(one_sided[0] == doctest::Approx(-1.5));
    CHECK(one_sided[1] == doctest::Approx(2.0));
    CHECK(one_sided[2] == doctest::Approx(-0.5));
}

TEST_CASE("normal derivatives are exact on degree-6 polynomials") {
    ChartPtr c = build_chart(DomainSpec::slab(2, 2.0 * M_PI, 1.0), {24});
    std::vector<double> f(c->nodes), df(c->nodes);
    auto poly = [](double y) { return 1.0 - 2.0 * y + 3.0 * std::pow(y, 4) - std::pow(y, 6); };
    auto dpoly = [](double y) { return -2.0 + 12.0 * std::pow(y, 3) - 6.0 * std::pow(y, 5); };
    for (int node = 0; node < c->nodes; ++node) f[node] = poly(c->coord(1, c->index_along(node, 1)));
    c->differentiate(1, f.data(), df.data());
    for (int node = 0; node < c->nodes; ++node)
        CHECK(df[node] == doctest::Approx(dpoly(c->coord(1, c->index_along(node, 1)))).epsilon(1e-10));
}

TEST_CASE("periodic derivative converges at sixth order") {
    double prev = 0.0;
    for (int N : {16, 32, 64}) {
        ChartPtr c = build_chart(DomainSpec::slab(2, 2.0 * M_PI, 1.0), {N});
        std::vector<double> f(c->nodes), df(c->nodes);
        for (int node = 0; node < c->nodes; ++node) f[node] = std::sin(2.0 * c->coord(0, c->index_along(node, 0)));
        c->differentiate(0, f.data(), df.data());
        double err = 0.0;
        for (int node = 0; node < c->nodes; ++node)
            err = std::max(err, std::abs(df[node] - 2.0 * std::cos(2.0 * c->coord(0, c->index_along(node, 0)))));
        if (prev > 0.0) CHECK(std::log2(prev / err) > 5.5);
        prev = err;
    }
}

TEST_CASE("chart types and mean curvature against 1/r") {
    ChartPtr a = build_chart(DomainSpec::annulus(0.5, 1.0), {32});
    CHECK(is_type_a(*a));
    CHECK(is_type_b(*a));
    BoundaryScalar HA = mean_curvature_typeA(a), HB = mean_curvature_typeB(a);
    const int T = a->tangential_count();
    for (int b = 0; b < a->boundary_count(); ++b) {
        double exact = b < T ? 1.0 / 0.5 : -1.0 / 1.0;
        CHECK(HA.v[b] == doctest::Approx(exact).epsilon(1e-10));
        CHECK(HB.v[b] == doctest::Approx(exact).epsilon(1e-8));
    }
    ChartPtr s = build_chart(DomainSpec::slab(3, 2.0 * M_PI, 1.0), {12});
    for (double h : mean_curvature_typeB(s).v) CHECK(std::abs(h) < 1e-12);
    ChartPtr sh = build_chart(DomainSpec::shell(0.5, 1.0), {16});
    BoundaryScalar Hs = mean_curvature_typeA(sh);
    for (int b = 0; b < sh->boundary_count(); ++b)
        CHECK(Hs.v[b] == doctest::Approx(b < sh->tangential_count() ? 0.5 / 0.5 : -0.5 / 1.0).epsilon(1e-10));
}

TEST_CASE("custom chart with a conformal metric") {
    DomainSpec s;
    s.kind = DomainKind::custom;
    s.dims = 2;
    s.lo = {0.0, std::log(0.5), 0.0};
    s.hi = {2.0 * M_PI, 0.0, 1.0};
    s.periodic = {true, false, false};
    s.metric = [](const Point& p) {
        Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
        g(0, 0) = g(1, 1) = std::exp(2.0 * p[1]);
        return g;
    };
    ChartPtr c = build_chart(s, {48});
    CHECK_FALSE(is_type_a(*c));
    CHECK(is_type_b(*c));
    CHECK_THROWS_AS(mean_curvature_typeA(c), Error);
    BoundaryScalar H = mean_curvature_typeB(c);
    // log-polar coordinates of the same annulus
    CHECK(H.v[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(H.v[c->tangential_count()] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("invalid geometry is rejected") {
    CHECK_THROWS_AS(build_chart(DomainSpec::annulus(1.0, 0.5), {32}), Error);
    CHECK_THROWS_AS(build_chart(DomainSpec::annulus(), {4}), Error);
    CHECK_THROWS_AS(build_chart(DomainSpec::annulus(), {32}, 5), Error);
    CHECK_THROWS_AS(parse_domain("torus"), Error);
    CHECK(parse_domain("shell") == DomainKind::shell);
}

TEST_CASE("shell chart carries the cylindrical metric") {
    ChartPtr c = build_chart(DomainSpec::shell(0.5, 1.0), {24});
    CHECK(c->n == 3);
    CHECK(c->periodic[0]);
    CHECK(c->periodic[1]);
    for (int node : {0, 999, c->nodes - 1}) {
        double r = c->coord(2, c->index_along(node, 2));
        CHECK(c->g(node, 0, 0) == doctest::Approx(r * r));
        CHECK(c->g(node, 1, 1) == doctest::Approx(1.0));
        CHECK(c->g(node, 2, 2) == doctest::Approx(1.0));
        CHECK(c->volume[node] == doctest::Approx(r));
    }
}

namespace {

ChartPtr custom_2d(std::function<Eigen::Matrix3d(const Point&)> metric, int N) {
    DomainSpec s;
    s.kind = DomainKind::custom;
    s.dims = 2;
    s.lo = {0.0, 0.0, 0.0};
    s.hi = {2.0 * M_PI, 1.0, 1.0};
    s.periodic = {true, false, false};
    s.metric = std::move(metric);
    return build_chart(s, {N});
}

}  // namespace

TEST_CASE("Type B curvature on custom charts") {
    // g = diag((1 + y)^2, 1): polar coordinates with r = 1 + y in [1, 2]
    ChartPtr polar = custom_2d(
        [](const Point& p) {
            Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
            g(0, 0) = (1.0 + p[1]) * (1.0 + p[1]);
            return g;
        },
        48);
    BoundaryScalar H = mean_curvature_typeB(polar);
    const int T = polar->tangential_count();
    CHECK(H.v[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(H.v[T] == doctest::Approx(-0.5).epsilon(1e-8));
    // h_nn = (1 + y)^2 with a tangential metric independent of y: straight boundary curves,
    // H = 0 up to the truncation error of d/dy (1 / sqrt h_nn)
    std::vector<double> worst;
    for (int N : {48, 96}) {
        ChartPtr stretched = custom_2d(
            [](const Point& p) {
                Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
                g(1, 1) = (1.0 + p[1]) * (1.0 + p[1]);
                return g;
            },
            N);
        double w = 0.0;
        for (double h : mean_curvature_typeB(stretched).v) w = std::max(w, std::abs(h));
        worst.push_back(w);
    }
    CHECK(worst[0] < 1e-6);
    CHECK(worst[0] / worst[1] > 16.0);
}
