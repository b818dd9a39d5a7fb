#include <cmath>

#include "doctest.h"

#include "gaugebench/constructions.hpp"
#include "gaugebench/coulomb.hpp"

using namespace gb;

namespace {

ChartPtr annulus(int N) { return build_chart(DomainSpec::annulus(0.5, 1.0), {N}); }
ChartPtr slab(int N) { return build_chart(DomainSpec::slab(2, 2.0 * M_PI, 1.0), {N}); }

double face_dist(const Chart& c, int node, int face) {
    int k = node % c.N[c.n - 1];
    return c.h[c.n - 1] * (face == 0 ? k : c.N[c.n - 1] - 1 - k);
}

}  // namespace

TEST_CASE("bump profiles") {
    CHECK(bump::bump(1.0, 1.0, 0.5) == doctest::Approx(1.0));
    CHECK(bump::bump(1.5, 1.0, 0.5) == 0.0);
    CHECK(bump::bump(0.4, 1.0, 0.5) == 0.0);
    CHECK(bump::bump(1.2, 1.0, 0.5) == doctest::Approx(bump::bump(0.8, 1.0, 0.5)));
    CHECK(bump::step(0.0, 0.0, 1.0) == 0.0);
    CHECK(bump::step(1.0, 0.0, 1.0) == 1.0);
    CHECK(bump::step(0.5, 0.0, 1.0) == doctest::Approx(0.5));
    double prev = 0.0;
    for (double x = 0.0; x <= 1.0; x += 0.01) {
        double s = bump::step(x, 0.0, 1.0);
        CHECK(s >= prev);
        prev = s;
    }
    CHECK(bump::plateau(0.5, 0.0, 0.2, 0.8, 1.0) == 1.0);
    CHECK(bump::plateau(1.1, 0.0, 0.2, 0.8, 1.0) == 0.0);
}

TEST_CASE("partitions of unity") {
    ChartPtr c = annulus(64);
    auto mu = periodic_partition(*c, 0, 8);
    CHECK(mu.size() == 8);
    for (int i = 0; i < c->N[0]; ++i) {
        double s = 0.0;
        for (const auto& m : mu) {
            CHECK(m[i] >= 0.0);
            s += m[i];
        }
        CHECK(s == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(periodic_partition(*c, 0, 0), Error);

    PartitionOfUnity pu = make_partition_of_unity(c, 8);
    CHECK(pu.lambda.size() == 16);
    CHECK(pu.collar1 > pu.collar0);
    for (int node = 0; node < c->nodes; ++node) {
        double s = pu.remainder.v[node];
        for (const auto& l : pu.lambda) s += l.v[node];
        CHECK(s == doctest::Approx(1.0));
        double d = std::min(face_dist(*c, node, 0), face_dist(*c, node, 1));
        if (d <= pu.collar0) CHECK(pu.remainder.v[node] == 0.0);
    }
    for (size_t p = 0; p < pu.lambda.size(); ++p)
        for (int node = 0; node < c->nodes; ++node)
            if (face_dist(*c, node, pu.face[p]) >= pu.collar1) CHECK(pu.lambda[p].v[node] == 0.0);
}

TEST_CASE("compatible profiles satisfy the discrete compatibility condition") {
    ChartPtr c = annulus(64);
    for (int variant : {0, 1, 2}) {
        ScalarField psi = compatible_profile(c, 0, 2.0, 1.4, variant);
        double worst = 0.0;
        for (double d : compatibility_defect(psi, 0)) worst = std::max(worst, std::abs(d));
        CHECK(worst < 1e-10 * psi.max_abs() / c->h[1]);
        // boundary trace is the tangential bump
        const int Nr = c->N[1];
        for (int t : {0, 10, 20}) {
            double th = c->coord(0, t);
            CHECK(psi.v[t * Nr] == doctest::Approx(bump::bump(std::remainder(th - 2.0, 2 * M_PI), 0.0, 1.4)));
        }
    }
}

TEST_CASE("boundary chart inverse produces co-closed DBC pairs with the prescribed bracket") {
    for (ChartPtr c : {annulus(128), slab(128)}) {
        const Alg A = Alg::basis(0), B = Alg::basis(2);
        for (int face : {0, 1}) {
            ScalarField psi = compatible_profile(c, face, 3.0, 1.4, 1);
            ChartInverse ci = boundary_chart_inverse(psi, A, B, face);
            Section target = make_section(c);
            Alg AB = bracket(A, B);
            for (int node = 0; node < c->nodes; ++node) target.v[node] = psi.v[node] * AB;
            CHECK((bracket_dot(ci.alpha, ci.beta) - target).max_abs() < 1e-3 * psi.max_abs());
            Connection flat = Connection::flat(c);
            CHECK(interior_max(codiff_A(ci.alpha, flat)) < 1e-10 * codiff_scale(ci.alpha));
            CHECK(interior_max(codiff_A(ci.beta, flat)) < 1e-10 * codiff_scale(ci.beta));
            CHECK(check_dbc(ci.alpha, 1e-12 * ci.alpha.max_abs()).ok);
            CHECK(check_dbc(ci.beta, 1e-12 * ci.beta.max_abs()).ok);
            CHECK(ci.f_support_ok);
        }
    }
}

TEST_CASE("chart inverse rejects bad input") {
    ChartPtr c = annulus(64);
    // trace of psi without the compatible normal profile
    ScalarField raw = make_scalar(c);
    const int Nr = c->N[1];
    for (int node = 0; node < c->nodes; ++node) {
        double th = c->coord(0, node / Nr), y = face_dist(*c, node, 0);
        raw.v[node] = bump::bump(std::remainder(th - 2.0, 2 * M_PI), 0.0, 1.4) * bump::bump(y, 0.0, 0.1);
    }
    CHECK_THROWS_AS(boundary_chart_inverse(raw, Alg::basis(0), Alg::basis(1), 0), Error);
    // 32 cells cannot host the cutoff ladders at sixth order
    ChartPtr coarse = annulus(32);
    CHECK_THROWS_AS(boundary_chart_inverse(compatible_profile(coarse, 0, 2.0, 1.4, 0), Alg::basis(0), Alg::basis(1), 0),
                    Error);
    // interior targets must stay off the boundary
    Section f = random_smooth_field(c, 0, 3, false);
    CHECK_THROWS_AS(interior_inverse(f), Error);
}

TEST_CASE("kernel sections lie in the discrete kernel of T0") {
    for (ChartPtr c : {annulus(64), slab(64)}) {
        Section g = kernel_section(c, 5);
        CHECK(check_dbc(g, 0.0).ok);
        Connection flat = Connection::flat(c);
        double scale = laplacian_A(g, flat).max_abs() / c->h[1];
        CHECK(boundary_operator_T(g, flat).max_abs() < 1e-10 * scale);
        CHECK((kernel_section(c, 5) - g).max_abs() == 0.0);
    }
}

TEST_CASE("bracket product rule on kernel sections") {
    ChartPtr c = annulus(64);
    BracketIdentity r = bracket_identity_check(kernel_section(c, 1), kernel_section(c, 2));
    CHECK(r.interior < 1e-4 * r.interior_scale);
    CHECK(r.boundary < 1e-3 * r.boundary_scale);
    CHECK(r.kernel_defect < 1e-8);
}

TEST_CASE("kernel decomposition and its precondition") {
    ChartPtr c = annulus(128);
    Section f = random_smooth_field(c, 0, 7, true);
    CHECK_THROWS_AS(kernel_decompose(f), Error);
    KernelOptions o;
    o.kernel_tol = -1.0;
    KernelDecomposition kd = kernel_decompose(laplacian_A(kernel_section(c, 8), Connection::flat(c)), o);
    CHECK(kd.boundary_pairs > 0);
    CHECK(kd.interior_pairs > 0);
    CHECK(kd.max_dbc < 1e-10);
}

TEST_CASE("generator reproduces boundary data with a positive Hopf term") {
    ChartPtr c = slab(64);
    Connection flat = Connection::flat(c);
    BoundaryField F = boundary_operator_T(random_smooth_field(c, 0, 9, true), flat);
    GeneratorResult g = generator_for_boundary_data(F);
    CHECK(g.hopf_min > 0.0);
    CHECK(g.residual < 5e-2);
    // independent recomputation of the residual
    BoundaryField T = boundary_operator_T(g.sum, flat);
    T -= F;
    CHECK(T.max_abs() / F.max_abs() == doctest::Approx(g.residual));
    BoundaryField zero{c, std::vector<Alg>(c->boundary_count())};
    CHECK(generator_for_boundary_data(zero).pairs.empty());
}

TEST_CASE("full decomposition of a random section") {
    ChartPtr c = slab(64);
    Section g = random_smooth_field(c, 0, 10, true);
    DecompositionCertificate cert = full_decompose(g);
    CHECK(cert.residual < 1e-2);
    CHECK(cert.hopf_min > 0.0);
    CHECK_FALSE(cert.commutator_pairs.empty());
    CHECK_FALSE(cert.horizontal_pairs.empty());
}

TEST_CASE("a single tangential piece covers the periodic slab") {
    ChartPtr c = slab(64);
    PartitionOfUnity pu = make_partition_of_unity(c, 1);
    REQUIRE(pu.lambda.size() == 2);
    for (int node = 0; node < c->nodes; ++node)
        if (face_dist(*c, node, 0) <= pu.collar0) CHECK(pu.lambda[0].v[node] == 1.0);
    // constant along the normal in the collar: zero normal derivative up to stencil roundoff
    for (const auto& l : pu.lambda)
        for (double d : normal_derivative(l).v) CHECK(std::abs(d) < 1e-12);
}

TEST_CASE("Hopf positivity with a centered source") {
    ChartPtr c = annulus(64);
    BoundaryField F = boundary_operator_T(random_smooth_field(c, 0, 11, true), Connection::flat(c));
    GeneratorOptions o;
    o.source = GeneratorOptions::Source::centered;
    GeneratorResult g = generator_for_boundary_data(F, o);
    CHECK(g.hopf_min > 0.0);
    CHECK(g.hopf_max >= g.hopf_min);
}

TEST_CASE("interior inverse is additive across the cube cover") {
    ChartPtr c = annulus(128);
    const int Nr = c->N[1];
    Section f = make_section(c);
    for (int node = 0; node < c->nodes; ++node) {
        double th = c->coord(0, node / Nr), r = c->coord(1, node % Nr);
        f.v[node][2] = bump::bump(std::remainder(th - 2.0, 2 * M_PI), 0.0, 1.4) * bump::bump(r, 0.75, 0.1);
    }
    InteriorInverse one = interior_inverse(f, 1), four = interior_inverse(f, 4);
    CHECK(four.cubes > one.cubes);
    CHECK(one.residual < 1e-3 * f.max_abs());
    CHECK(four.residual < 1e-3 * f.max_abs());
    Section s1 = reconstruct_brackets(one.pairs, c), s4 = reconstruct_brackets(four.pairs, c);
    CHECK((s1 - s4).max_abs() <= one.residual + four.residual + 1e-14);
}
