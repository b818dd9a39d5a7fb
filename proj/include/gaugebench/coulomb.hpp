#pragma once

#include <vector>

#include "gaugebench/operators.hpp"

namespace gb {

// R_A(a, b) = -2 G_A [a.b] for horizontal a, b.
// Horizontality is checked on interior nodes: |d_A* w| <= horizontal_tol * |w| / h_min.
Section curvature_form(const OneForm& a, const OneForm& b, const Connection& A, GreenSolve& solve,
                       double horizontal_tol = 1e-7);
Section curvature_form(const OneForm& a, const OneForm& b, const Connection& A, double horizontal_tol = 1e-7);

double codiff_scale(const OneForm& w);

struct IdentityResidual {
    double residual = 0.0;      // boundary sup norm
    double bracket_norm = 0.0;  // sup norm of [a.b] over all nodes
    double relative = 0.0;
    bool corrected = false;     // the two d_A* terms were included
};

// d_A[a.b](nu) + 2(n-1) H [a.b] (+ [d_A* a, b(nu)] + [a(nu), d_A* b] when corrected).
IdentityResidual boundary_identity_residual(const OneForm& a, const OneForm& b, const Connection& A,
                                            bool include_corrections);

struct ObstructionResidual {
    double t_curvature = 0.0;   // |T_A(R)|_inf
    double t_reference = 0.0;   // |T_A(f_ref)|_inf with |f_ref|_inf = |R|_inf
    double curvature_norm = 0.0;
    double normalized = 0.0;    // t_curvature / t_reference
    double normalizer = 0.0;    // t_reference / |R|_inf
    SolveStats solve;
};

ObstructionResidual obstruction_residual(const OneForm& a, const OneForm& b, const Connection& A,
                                         std::uint64_t reference_seed, GreenSolve& solve);

// Node values g with the discrete Maurer-Cartan form xi = g^{-1} dg carried
// alongside, so that products and the action compose exactly.
class GaugeTransformation {
public:
    ChartPtr chart;
    std::vector<GroupElement> g;
    OneForm xi;

    static GaugeTransformation identity(const ChartPtr& c);
    // g = exp(f) for a section f vanishing on the boundary
    static GaugeTransformation exponential(const Section& f, double tol = 1e-12);

    GaugeTransformation operator*(const GaugeTransformation& o) const;
    GaugeTransformation inverse() const;
    double boundary_defect() const;
};

// eta' = g^{-1} dg + Ad(g^{-1}) eta
Connection gauge_act(const Connection& A, const GaugeTransformation& g);

struct FreenessReport {
    double distance = 0.0;        // |g - e|_L2
    double gradient = 0.0;        // |dg + [eta, g]|_L2 on the matrix coefficients
    double kappa = 0.0;           // 1 / sqrt(lambda_min)
    double lambda_twisted = 0.0;  // smallest Ritz value of Delta_A
    double lambda_flat = 0.0;     // smallest Ritz value of Delta_0
    bool bound_holds = false;
};

FreenessReport freeness_check(const Connection& A, const GaugeTransformation& g);
// Reuses eigenvalue estimates from an earlier report.
FreenessReport freeness_check(const Connection& A, const GaugeTransformation& g, double lambda_twisted,
                              double lambda_flat);

struct LoopDefect {
    double epsilon = 0.0;
    int steps = 0;
    Section defect;     // log of the end-of-loop gauge mismatch
    Section curvature;  // R_A(a, b)
    double defect_norm = 0.0;
    int solves = 0;
};

LoopDefect small_loop_holonomy(const Connection& A, const OneForm& a, const OneForm& b, double epsilon,
                               int steps = 16, const GreenOptions& opt = {});

}  // namespace gb
