#include <cmath>

#include "doctest.h"

#include "gaugebench/coulomb.hpp"

using namespace gb;

namespace {

ChartPtr annulus(int N) { return build_chart(DomainSpec::annulus(0.5, 1.0), {N}); }

Connection random_connection(const ChartPtr& c, std::uint64_t seed) {
    OneForm e = random_smooth_field(c, 1, seed, true);
    e *= 1.0 / e.max_abs();
    return Connection(e);
}

GaugeTransformation random_gauge(const ChartPtr& c, std::uint64_t seed, double scale) {
    Section f = random_smooth_field(c, 0, seed, true);
    f *= scale / f.max_abs();
    return GaugeTransformation::exponential(f);
}

}  // namespace

TEST_CASE("gauge action by a constant-free exponential matches g^-1 d g + Ad(g^-1) A") {
    ChartPtr c = annulus(32);
    Connection A = random_connection(c, 1);
    Section f = random_smooth_field(c, 0, 2, true);
    f *= 0.8 / f.max_abs();
    GaugeTransformation g = GaugeTransformation::exponential(f);
    Connection B = gauge_act(A, g);
    // pointwise oracle with matrices and a finite-difference-free derivative of exp
    OneForm df = flat_d(f);
    for (int node : {40, 500, 700})
        for (int i = 0; i < 2; ++i) {
            Mat2 G = exp_map(f.v[node]).matrix();
            Alg want = dexp_left(f.v[node], df.at(i, node)) + from_matrix(G.adjoint() * to_matrix(A.eta.at(i, node)) * G);
            CHECK((B.eta.at(i, node) - want).max_abs() < 1e-13);
        }
}

TEST_CASE("gauge action is a right action") {
    ChartPtr c = annulus(24);
    Connection A = random_connection(c, 3);
    GaugeTransformation g1 = random_gauge(c, 4, 1.0), g2 = random_gauge(c, 5, 0.5);
    CHECK((gauge_act(gauge_act(A, g1), g2).eta - gauge_act(A, g1 * g2).eta).max_abs() < 1e-12);
    CHECK((gauge_act(gauge_act(A, g1), g1.inverse()).eta - A.eta).max_abs() < 1e-12);
    CHECK((gauge_act(A, GaugeTransformation::identity(c)).eta - A.eta).max_abs() < 1e-15);
    CHECK(g1.boundary_defect() == doctest::Approx(0.0));
    CHECK_THROWS_AS(GaugeTransformation::exponential(random_smooth_field(c, 0, 6, false)), Error);
}

TEST_CASE("curvature form requires horizontal arguments") {
    ChartPtr c = annulus(32);
    Connection A = random_connection(c, 7);
    GreenSolve s(A);
    OneForm a = random_smooth_field(c, 1, 8, true), b = random_smooth_field(c, 1, 9, true);
    CHECK_THROWS_AS(curvature_form(a, b, A, s), Error);
    OneForm ha = horizontal_project(a, A, s), hb = horizontal_project(b, A, s);
    Section R = curvature_form(ha, hb, A, s);
    // Delta_A R = -2 [a.b]
    Section lhs = laplacian_A(R, A), rhs = bracket_dot(ha, hb);
    rhs *= -2.0;
    CHECK(interior_max(lhs - rhs) < 1e-7 * interior_max(rhs));
    CHECK(check_dbc(R).ok);
    // antisymmetry
    CHECK((curvature_form(hb, ha, A, s) + R).max_abs() < 1e-10 * R.max_abs());
}

TEST_CASE("boundary identity converges for horizontal pairs") {
    std::vector<double> rel;
    for (int N : {32, 64}) {
        ChartPtr c = annulus(N);
        Connection A = random_connection(c, 11);
        GreenSolve s(A);
        OneForm a = horizontal_project(random_smooth_field(c, 1, 12, true), A, s);
        OneForm b = horizontal_project(random_smooth_field(c, 1, 13, true), A, s);
        IdentityResidual r = boundary_identity_residual(a, b, A, false);
        CHECK_FALSE(r.corrected);
        rel.push_back(r.relative);
    }
    CHECK(rel[1] < 1e-3);
    CHECK(std::log2(rel[0] / rel[1]) > 3.0);
}

TEST_CASE("the identity fails without projection unless corrected") {
    ChartPtr c = annulus(64);
    Connection A = random_connection(c, 14);
    OneForm a = random_smooth_field(c, 1, 15, true), b = random_smooth_field(c, 1, 16, true);
    double plain = boundary_identity_residual(a, b, A, false).relative;
    double corrected = boundary_identity_residual(a, b, A, true).relative;
    CHECK(plain > 1e-2);
    CHECK(corrected < 1e-3);
}

TEST_CASE("obstruction residual is small against a generic reference") {
    ChartPtr c = annulus(64);
    Connection A = random_connection(c, 17);
    GreenSolve s(A);
    OneForm a = horizontal_project(random_smooth_field(c, 1, 18, true), A, s);
    OneForm b = horizontal_project(random_smooth_field(c, 1, 19, true), A, s);
    ObstructionResidual r = obstruction_residual(a, b, A, 20, s);
    CHECK(r.normalized < 2e-2);
    CHECK(r.normalizer > 0.5);
}

TEST_CASE("freeness bound with Poincare constants") {
    ChartPtr c = annulus(24);
    Connection A = random_connection(c, 21);
    for (std::uint64_t seed : {22, 23, 24}) {
        FreenessReport r = freeness_check(A, random_gauge(c, seed, 1.5));
        CHECK(r.bound_holds);
        CHECK(r.kappa == doctest::Approx(1.0 / std::sqrt(std::min(r.lambda_twisted, r.lambda_flat))));
    }
    FreenessReport id = freeness_check(A, GaugeTransformation::identity(c));
    CHECK(id.distance == 0.0);
}

TEST_CASE("small loop holonomy defect is quadratic in the loop size") {
    ChartPtr c = annulus(16);
    Connection A = random_connection(c, 25);
    GreenSolve s(A);
    OneForm a = horizontal_project(random_smooth_field(c, 1, 26, true), A, s);
    OneForm b = horizontal_project(random_smooth_field(c, 1, 27, true), A, s);
    LoopDefect big = small_loop_holonomy(A, a, b, 0.1, 8), small = small_loop_holonomy(A, a, b, 0.05, 8);
    double ratio = l2_norm(big.defect) / l2_norm(small.defect);
    CHECK(ratio > 3.6);
    CHECK(ratio < 4.4);
    double cosv = l2_inner(small.defect, small.curvature) / (l2_norm(small.defect) * l2_norm(small.curvature));
    CHECK(std::abs(cosv) > 0.99);
}

TEST_CASE("curvature form against a dense solve of the assembled Laplacian") {
    ChartPtr c = annulus(24);
    Connection A = random_connection(c, 31);
    GreenSolve s(A);
    OneForm a = horizontal_project(random_smooth_field(c, 1, 32, true), A, s);
    OneForm b = horizontal_project(random_smooth_field(c, 1, 33, true), A, s);
    Section R = curvature_form(a, b, A, s);
    Section rhs = bracket_dot(a, b);

    std::vector<int> inner;
    for (int node = 0; node < c->nodes; ++node)
        if (!c->is_boundary(node)) inner.push_back(node);
    const int m = 3 * static_cast<int>(inner.size());
    Eigen::MatrixXd L = Eigen::MatrixXd(assemble_laplacian(A, true));
    REQUIRE(L.rows() == m);
    Eigen::VectorXd y(m);
    for (size_t q = 0; q < inner.size(); ++q)
        for (int k = 0; k < 3; ++k) y[3 * q + k] = -2.0 * rhs.v[inner[q]][k];
    Eigen::VectorXd x = L.partialPivLu().solve(y);
    double worst = 0.0, scale = 0.0;
    for (size_t q = 0; q < inner.size(); ++q)
        for (int k = 0; k < 3; ++k) {
            worst = std::max(worst, std::abs(R.v[inner[q]][k] - x[3 * q + k]));
            scale = std::max(scale, std::abs(x[3 * q + k]));
        }
    CHECK(worst < 1e-8 * scale);
}

TEST_CASE("gauge action on the zero connection is g^-1 dg") {
    // fourth-order centered differences of the group matrices along each axis
    std::vector<double> err;
    for (int N : {64, 128}) {
        ChartPtr c = annulus(N);
        Section f = random_smooth_field(c, 0, 34, true);
        f *= 1.2 / f.max_abs();
        Connection B = gauge_act(Connection::flat(c), GaugeTransformation::exponential(f));
        const int Nr = c->N[1];
        auto D = [&](int node, int stride, double h) {
            auto G = [&](int k) { return exp_map(f.v[node + k * stride]).matrix(); };
            return Mat2((-G(2) + 8.0 * G(1) - 8.0 * G(-1) + G(-2)) / (12.0 * h));
        };
        double worst = 0.0;
        for (int node = 0; node < c->nodes; ++node) {
            int k = node % Nr;
            if (k < 2 || k > Nr - 3) continue;
            Mat2 Gi = exp_map(f.v[node]).matrix().adjoint();
            int prev = (node - 2 * Nr + c->nodes) % c->nodes, next = (node + 2 * Nr) % c->nodes;
            if (prev > node || next < node) continue;
            worst = std::max(worst, (B.eta.at(0, node) - from_matrix(Gi * D(node, Nr, c->h[0]))).max_abs());
            worst = std::max(worst, (B.eta.at(1, node) - from_matrix(Gi * D(node, 1, c->h[1]))).max_abs());
        }
        err.push_back(worst);
    }
    CHECK(err[1] < 1e-4);
    CHECK(err[0] / err[1] > 10.0);
}

TEST_CASE("gauge transformations fixing a connection are trivial") {
    ChartPtr c = annulus(24);
    Connection A = random_connection(c, 35);
    for (std::uint64_t seed = 36; seed < 46; ++seed)
        for (double t : {1e-6, 0.1, 1.0}) {
            GaugeTransformation g = random_gauge(c, seed, t);
            double moved = (gauge_act(A, g).eta - A.eta).max_abs();
            double dist = 0.0;
            for (int node = 0; node < c->nodes; ++node)
                dist = std::max(dist, (g.g[node].matrix() - Mat2::Identity()).cwiseAbs().maxCoeff());
            if (moved <= 1e-10) CHECK(dist <= 1e-8);
            CHECK(moved > 0.0);
        }
}
