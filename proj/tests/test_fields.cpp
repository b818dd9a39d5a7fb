#include <cmath>
#include <sstream>

#include "doctest.h"

#include "gaugebench/fields.hpp"

using namespace gb;

namespace {

ChartPtr annulus(int N) { return build_chart(DomainSpec::annulus(0.5, 1.0), {N}); }

double radius(const Chart& c, int node) { return c.coord(1, c.index_along(node, 1)); }

}  // namespace

TEST_CASE("form shapes and arithmetic") {
    ChartPtr c = annulus(16);
    Section f = make_section(c);
    OneForm w = make_oneform(c);
    CHECK(f.ncomp() == 1);
    CHECK(w.ncomp() == 2);
    CHECK(Form(c, 2).ncomp() == 1);
    CHECK_THROWS_AS(Form(c, 3), Error);
    f.v[5] = Alg(1, -2, 3);
    Section g = 2.0 * f + f - f;
    CHECK(g.v[5][1] == doctest::Approx(-4.0));
    CHECK(g.max_abs() == doctest::Approx(6.0));
    CHECK_THROWS_AS(f + w, Error);
    CHECK_THROWS_AS(f + make_section(annulus(16)), Error);
}

TEST_CASE("L2 inner product integrates against r dr dtheta") {
    ChartPtr c = annulus(64);
    Section one = make_section(c), rr = make_section(c);
    for (int node = 0; node < c->nodes; ++node) {
        one.v[node] = Alg::basis(0);
        rr.v[node] = radius(*c, node) * Alg::basis(2);
    }
    // |e1|^2 = 1: area of the annulus
    CHECK(l2_inner(one, one) == doctest::Approx(M_PI * (1.0 - 0.25)).epsilon(1e-12));
    CHECK(l2_inner(one, rr) == doctest::Approx(0.0));
    // int r^3 dr dtheta = 2 pi (1 - 1/16) / 4
    CHECK(l2_inner(rr, rr) == doctest::Approx(2.0 * M_PI * (1.0 - 1.0 / 16.0) / 4.0).epsilon(1e-3));
}

TEST_CASE("one-form inner product uses the inverse metric") {
    ChartPtr c = annulus(64);
    OneForm w = make_oneform(c);
    // w = r dtheta has unit length
    for (int node = 0; node < c->nodes; ++node) w.at(0, node) = radius(*c, node) * Alg::basis(1);
    for (int node : {0, 100, 2000}) CHECK(pointwise_inner(w, w, node) == doctest::Approx(1.0));
    CHECK(check_dbc(w).violation == doctest::Approx(1.0));
    CHECK_FALSE(check_dbc(w).ok);
}

TEST_CASE("flat d, traces and normal components") {
    ChartPtr c = annulus(32);
    Section f = make_section(c);
    for (int node = 0; node < c->nodes; ++node) {
        double r = radius(*c, node), th = c->coord(0, c->index_along(node, 0));
        f.v[node] = Alg(r * r, std::sin(th), r * std::cos(th));
    }
    OneForm df = flat_d(f);
    for (int node : {3, 400, 900}) {
        double r = radius(*c, node), th = c->coord(0, c->index_along(node, 0));
        CHECK(df.at(1, node)[0] == doctest::Approx(2.0 * r));
        CHECK(df.at(0, node)[1] == doctest::Approx(std::cos(th)).epsilon(1e-6));
        CHECK(df.at(1, node)[2] == doctest::Approx(std::cos(th)));
    }
    BoundaryField tr = trace_boundary(f);
    BoundaryField nd = normal_component(df);
    const int T = c->tangential_count();
    CHECK(tr.v[0][0] == doctest::Approx(0.25));
    CHECK(tr.v[T][0] == doctest::Approx(1.0));
    // inward normal: +d/dr on the inner circle, -d/dr on the outer one
    CHECK(nd.v[0][0] == doctest::Approx(1.0));
    CHECK(nd.v[T][0] == doctest::Approx(-2.0));
    CHECK_THROWS_AS(normal_component(f), Error);
}

TEST_CASE("random smooth fields are seeded and respect DBC") {
    ChartPtr c = annulus(24);
    Form a = random_smooth_field(c, 1, 42, true), b = random_smooth_field(c, 1, 42, true);
    Form d = random_smooth_field(c, 1, 43, true);
    CHECK((a - b).max_abs() == 0.0);
    CHECK((a - d).max_abs() > 0.1);
    CHECK(check_dbc(a).ok);
    CHECK(check_dbc(random_smooth_field(c, 0, 7, true)).violation == 0.0);
    CHECK_FALSE(check_dbc(random_smooth_field(c, 0, 7, false)).ok);
}

TEST_CASE("dump and load round-trip every bit") {
    ChartPtr c = annulus(16);
    Form a = random_smooth_field(c, 1, 5, true);
    std::stringstream ss;
    dump_form(ss, a, 5);
    Form b = load_form(ss, c);
    CHECK(b.degree == 1);
    CHECK((a - b).max_abs() == 0.0);
    std::stringstream bad;
    dump_form(bad, a, 5);
    CHECK_THROWS_AS(load_form(bad, annulus(24)), Error);
}

TEST_CASE("scalar helpers") {
    ChartPtr c = annulus(16);
    ScalarField s = make_scalar(c, 2.0);
    Section f = times(s, Alg(1, 0, -1));
    CHECK(f.v[10][2] == doctest::Approx(-2.0));
    ScalarField k = component(f, 0);
    CHECK(k.v[10] == doctest::Approx(2.0));
    CHECK(k.max_abs() == doctest::Approx(2.0));
}

TEST_CASE("constant basis sections are orthonormal on the unit slab") {
    ChartPtr c = build_chart(DomainSpec::slab(2, 1.0, 1.0), {32});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Section a = times(make_scalar(c, 1.0), Alg::basis(i)), b = times(make_scalar(c, 1.0), Alg::basis(j));
            CHECK(l2_inner(a, b) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
}

TEST_CASE("different seeds give weakly correlated fields") {
    ChartPtr c = annulus(24);
    double total = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Form a = random_smooth_field(c, 1, 100 + s, true), b = random_smooth_field(c, 1, 200 + s, true);
        total += std::abs(l2_inner(a, b)) / (l2_norm(a) * l2_norm(b));
    }
    CHECK(total / 20.0 < 0.9);
}

TEST_CASE("the L2 pairing is positive on nonzero fields") {
    ChartPtr c = annulus(16);
    for (std::uint64_t s = 0; s < 100; ++s) {
        Form f = random_smooth_field(c, static_cast<int>(s % 3), s, s % 2 == 0);
        REQUIRE(f.max_abs() > 0.0);
        CHECK(l2_inner(f, f) > 0.0);
    }
}

TEST_CASE("flat d is exact on fields linear in the normal coordinate") {
    ChartPtr c = build_chart(DomainSpec::slab(2, 2.0 * M_PI, 1.0), {16});
    Section f = make_section(c);
    const Alg a(1.0, -2.0, 0.5), b(0.25, 3.0, -1.0);
    for (int node = 0; node < c->nodes; ++node) f.v[node] = a + c->coord(1, c->index_along(node, 1)) * b;
    OneForm df = flat_d(f);
    for (int node = 0; node < c->nodes; ++node) {
        CHECK(df.at(0, node).max_abs() < 1e-13);
        CHECK((df.at(1, node) - b).max_abs() < 1e-12);
    }
}
