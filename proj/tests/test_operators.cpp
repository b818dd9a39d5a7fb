#include <cmath>

#include "doctest.h"

#include "gaugebench/operators.hpp"

using namespace gb;

namespace {

ChartPtr annulus(int N) { return build_chart(DomainSpec::annulus(0.5, 1.0), {N}); }
ChartPtr slab(int N) { return build_chart(DomainSpec::slab(2, 2.0 * M_PI, 1.0), {N}); }

double xcoord(const Chart& c, int node, int ax) { return c.coord(ax, c.index_along(node, ax)); }

Connection random_connection(const ChartPtr& c, std::uint64_t seed) {
    OneForm e = random_smooth_field(c, 1, seed, true);
    e *= 1.0 / e.max_abs();
    return Connection(e);
}

}  // namespace

TEST_CASE("d_A adds the pointwise bracket with A") {
    ChartPtr c = annulus(24);
    Connection A = random_connection(c, 3);
    Section f = random_smooth_field(c, 0, 4, true);
    OneForm w = d_A(f, A), df = flat_d(f);
    for (int node : {0, 77, 300})
        for (int i = 0; i < 2; ++i)
            CHECK((w.at(i, node) - df.at(i, node) - bracket(A.eta.at(i, node), f.v[node])).max_abs() < 1e-14);
}

TEST_CASE("Connection rejects tangential boundary values") {
    ChartPtr c = annulus(16);
    CHECK_THROWS_AS(Connection(random_smooth_field(c, 1, 1, false)), Error);
    CHECK_NOTHROW(Connection(random_smooth_field(c, 1, 1, false), false));
}

TEST_CASE("bracket_dot contracts with the inverse metric") {
    ChartPtr c = annulus(16);
    OneForm a = make_oneform(c), b = make_oneform(c);
    for (int node = 0; node < c->nodes; ++node) {
        a.at(0, node) = Alg::basis(0);
        b.at(0, node) = Alg::basis(1);
        a.at(1, node) = Alg::basis(1);
        b.at(1, node) = Alg::basis(2);
    }
    Section s = bracket_dot(a, b);
    for (int node : {5, 100}) {
        double r = xcoord(*c, node, 1);
        Alg want = (1.0 / (r * r)) * bracket(Alg::basis(0), Alg::basis(1)) + bracket(Alg::basis(1), Alg::basis(2));
        CHECK((s.v[node] - want).max_abs() < 1e-14);
    }
}

TEST_CASE("flat Laplacian matches the polar formula") {
    // u = sin(2 pi (r - 1/2)) cos(theta): -Delta u = u'' + u'/r - u/r^2
    for (int N : {64}) {
        ChartPtr c = annulus(N);
        const double k = 2.0 * M_PI;
        Section u = make_section(c), want = make_section(c);
        for (int node = 0; node < c->nodes; ++node) {
            double th = xcoord(*c, node, 0), r = xcoord(*c, node, 1), x = k * (r - 0.5);
            double val = std::sin(x) * std::cos(th);
            double lap = (k * k * std::sin(x) - k * std::cos(x) / r + std::sin(x) / (r * r)) * std::cos(th);
            u.v[node] = val * Alg::basis(1);
            want.v[node] = lap * Alg::basis(1);
        }
        Connection flat = Connection::flat(c);
        CHECK((laplacian_A(u, flat) - want).max_abs() < 1e-6 * want.max_abs());
        // the adjoint form is consistent away from the one-sided boundary stencils
        Section d = laplacian_A(u, flat, Codiff::adjoint) - want;
        double deep = 0.0;
        for (int node = 0; node < c->nodes; ++node) {
            int kr = c->index_along(node, 1);
            if (kr >= 2 * c->fd_order && kr < N - 2 * c->fd_order) deep = std::max(deep, d.v[node].max_abs());
        }
        CHECK(deep < 1e-6 * want.max_abs());
    }
}

TEST_CASE("codifferential is the adjoint of d_A") {
    ChartPtr c = annulus(32);
    Connection A = random_connection(c, 5);
    Section f = random_smooth_field(c, 0, 6, true);
    OneForm w = random_smooth_field(c, 1, 7, false);
    double lhs = l2_inner(d_A(f, A), w), rhs = l2_inner(f, codiff_A(w, A, Codiff::adjoint));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("Green solve recovers a manufactured solution with every method") {
    ChartPtr c = slab(32);
    Section u = make_section(c), g = make_section(c);
    for (int node = 0; node < c->nodes; ++node) {
        double x = xcoord(*c, node, 0), y = xcoord(*c, node, 1);
        double val = std::sin(M_PI * y) * std::cos(x);
        u.v[node] = val * Alg(1.0, -0.5, 2.0);
        g.v[node] = (M_PI * M_PI + 1.0) * u.v[node];
    }
    Connection flat = Connection::flat(c);
    for (auto m : {GreenOptions::Method::automatic, GreenOptions::Method::direct, GreenOptions::Method::bicgstab,
                   GreenOptions::Method::gmres}) {
        GreenOptions o;
        o.method = m;
        GreenSolve s(flat, o);
        Section x = s.solve(g);
        CAPTURE(s.last().method);
        CHECK((x - u).max_abs() < 1e-6);
        CHECK(check_dbc(x).ok);
    }
}

TEST_CASE("twisted Green solve inverts the twisted Laplacian") {
    ChartPtr c = annulus(32);
    Connection A = random_connection(c, 8);
    Section u = random_smooth_field(c, 0, 9, true);
    GreenSolve s(A);
    Section x = s.solve(laplacian_A(u, A));
    CHECK((x - u).max_abs() < 1e-8 * u.max_abs());
}

TEST_CASE("horizontal projection is co-closed and idempotent") {
    ChartPtr c = annulus(32);
    Connection A = random_connection(c, 10);
    GreenSolve s(A);
    OneForm w = random_smooth_field(c, 1, 11, true);
    OneForm p = horizontal_project(w, A, s);
    CHECK(interior_max(codiff_A(p, A)) < 1e-8 * p.max_abs() / c->h[1]);
    CHECK(check_dbc(p, 1e-12).ok);
    OneForm pp = horizontal_project(p, A, s);
    CHECK((pp - p).max_abs() < 1e-8 * p.max_abs());
}

TEST_CASE("boundary operator on a radial mode") {
    // f = sin(k (r - r0)) e1 with k (r1 - r0) = pi gives T0 f = k^3 - k / r^2 on both circles
    ChartPtr c = annulus(128);
    const double k = 2.0 * M_PI;
    Section f = make_section(c);
    for (int node = 0; node < c->nodes; ++node) f.v[node] = std::sin(k * (xcoord(*c, node, 1) - 0.5)) * Alg::basis(0);
    BoundaryField T = boundary_operator_T(f, Connection::flat(c));
    const int Tn = c->tangential_count();
    for (int b : {0, 17, Tn, Tn + 40}) {
        double r = c->face_of(b) == 0 ? 0.5 : 1.0;
        double want = k * k * k - k / (r * r);
        CHECK(T.v[b][0] == doctest::Approx(want).epsilon(1e-5));
        CHECK(std::abs(T.v[b][1]) + std::abs(T.v[b][2]) < 1e-10);
    }
}

TEST_CASE("smallest Ritz value on the slab approaches pi^2") {
    std::vector<double> err;
    for (int N : {32, 64, 128}) {
        double lam = smallest_ritz_value(Connection::flat(slab(N)), Codiff::adjoint);
        CHECK(lam > 0.0);
        err.push_back(std::abs(lam - M_PI * M_PI));
    }
    CHECK(err[1] < 0.6 * err[0]);
    CHECK(err[2] < 0.6 * err[1]);
    CHECK(err[2] < 0.02 * M_PI * M_PI);
}

TEST_CASE("expansion of Delta_A agrees with the composition") {
    ChartPtr c = annulus(64);
    Connection A = random_connection(c, 12);
    Section f = random_smooth_field(c, 0, 13, true);
    Section L = laplacian_A(f, A);
    CHECK(interior_max(laplacian_expansion(f, A) - L) < 1e-6 * interior_max(L));
}

TEST_CASE("slab Laplacian and boundary operator on sin(pi y)") {
    std::vector<double> err;
    for (int N : {32, 64}) {
        ChartPtr c = slab(N);
        Section f = make_section(c);
        for (int node = 0; node < c->nodes; ++node) f.v[node] = std::sin(M_PI * xcoord(*c, node, 1)) * Alg::basis(0);
        Connection flat = Connection::flat(c);
        Section L = laplacian_A(f, flat);
        double worst = 0.0;
        for (int node = 0; node < c->nodes; ++node)
            worst = std::max(worst, (L.v[node] - M_PI * M_PI * f.v[node]).max_abs());
        err.push_back(worst);
        // T0 f = pi^3 on both faces (H = 0)
        BoundaryField T = boundary_operator_T(f, flat);
        for (const Alg& t : T.v) CHECK(t[0] == doctest::Approx(M_PI * M_PI * M_PI).epsilon(N == 32 ? 1e-3 : 1e-4));
    }
    CHECK(err[1] < 1e-5);
    CHECK(err[0] / err[1] > 4.0);
}

TEST_CASE("the compatibility profile is in the kernel of T0~ on the inner circle") {
    ChartPtr c = annulus(64);
    Section f = make_section(c);
    for (int node = 0; node < c->nodes; ++node)
        f.v[node] = (1.0 - (2.0 / 0.5) * (xcoord(*c, node, 1) - 0.5)) * Alg::basis(1);
    BoundaryField T = boundary_operator_Ttilde(f);
    for (int b = 0; b < c->tangential_count(); ++b) CHECK(T.v[b].max_abs() < 1e-11);
}

TEST_CASE("Hodge star on the flat slab and its square") {
    ChartPtr c = slab(16);
    OneForm dx = make_oneform(c), dy = make_oneform(c);
    for (int node = 0; node < c->nodes; ++node) {
        dx.at(0, node) = Alg::basis(0);
        dy.at(1, node) = Alg::basis(0);
    }
    CHECK((hodge_star(dx) - dy).max_abs() < 1e-15);
    CHECK((hodge_star(dy) + dx).max_abs() < 1e-15);
    TwoForm vol = Form(c, 2);
    for (int node = 0; node < c->nodes; ++node) vol.at(0, node) = Alg::basis(2);
    Section one = hodge_star(vol);
    for (int node = 0; node < c->nodes; ++node) CHECK((one.v[node] - Alg::basis(2)).max_abs() < 1e-15);
    // ** = (-1)^{p(n-p)}
    for (ChartPtr ch : {annulus(16), build_chart(DomainSpec::shell(0.5, 1.0), {8})})
        for (int p = 0; p <= 2; ++p) {
            Form w = random_smooth_field(ch, p, 30 + p, false);
            double sign = (p * (ch->n - p)) % 2 ? -1.0 : 1.0;
            CHECK((hodge_star(hodge_star(w)) - sign * w).max_abs() < 1e-13 * w.max_abs());
            CHECK((hodge_star_inverse(hodge_star(w)) - w).max_abs() < 1e-13 * w.max_abs());
        }
}

TEST_CASE("codifferential of two-forms against the closed form") {
    std::vector<double> err;
    for (int N : {32, 64, 128}) {
        ChartPtr c = annulus(N);
        ScalarField F = make_scalar(c);
        for (int node = 0; node < c->nodes; ++node) {
            double r = xcoord(*c, node, 1), th = xcoord(*c, node, 0);
            F.v[node] = std::sin(th) * std::cos(3.0 * r) + r * r;
        }
        const Alg x(0.3, -1.0, 0.7);
        OneForm star = codiff_2form(lemma_two_form(F, x), Connection::flat(c));
        OneForm closed = lemma_codiff_closed(F, x);
        err.push_back((star - closed).max_abs() / closed.max_abs());
    }
    // the discrete star-d-star composition reproduces the closed form exactly
    for (double e : err) CHECK(e < 1e-10);
}

TEST_CASE("the codifferential squares to zero") {
    std::vector<double> err;
    for (int N : {32, 64, 128}) {
        ChartPtr c = annulus(N);
        Connection flat = Connection::flat(c);
        TwoForm w = random_smooth_field(c, 2, 41, false);
        OneForm a = codiff_2form(w, flat);
        err.push_back(codiff_A(a, flat).max_abs() / a.max_abs());
    }
    // difference operators along distinct axes commute, so (d*)^2 vanishes to roundoff
    for (double e : err) CHECK(e < 1e-10);
}
