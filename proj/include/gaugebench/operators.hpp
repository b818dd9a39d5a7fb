#pragma once

#include <memory>
#include <string>

#include <Eigen/Sparse>

#include "gaugebench/fields.hpp"

namespace gb {

// A = A0 + eta with A0 = 0 in the trivialization; eta satisfies DBC.
struct Connection {
    ChartPtr chart;
    OneForm eta;

    static Connection flat(const ChartPtr& c);
    // throws DbcViolation when check is set and eta has tangential boundary values
    explicit Connection(OneForm perturbation, bool check = true, double tol = 1e-12);

    const Alg& component(int i, int node) const { return eta.at(i, node); }
};

enum class Codiff {
    pointwise,  // -(1/a) sum d_i(a g^ij w_j) - [A.w]
    adjoint,    // exact l2 adjoint of d_A on Dirichlet sections
};

OneForm d_A(const Section& f, const Connection& A);
Section bracket_dot(const OneForm& a, const OneForm& b);
Section bracket(const Section& f, const Section& g);
Section codiff_A(const OneForm& w, const Connection& A, Codiff form = Codiff::pointwise);

// Interior-node sup norm, the set on which codifferential constraints are imposed.
double interior_max(const Section& f);

Section laplacian_A(const Section& f, const Connection& A, Codiff form = Codiff::pointwise,
                    bool require_dbc = true);
// Delta_0 f + [d0* h, f] - [h.[h, f]] - 2 [h . d0 f]
Section laplacian_expansion(const Section& f, const Connection& A);

struct GreenOptions {
    // automatic: gmres on charts with a diagonal metric that depends on the
    // normal coordinate only, sparse LU (n = 2) or BiCGSTAB (n = 3) otherwise
    enum class Method { automatic, direct, bicgstab, cg, gmres };
    Method method = Method::automatic;
    double tolerance = 1e-10;
    int max_iterations = 0;  // 0: 200 * sqrt(nodes)
};

struct SolveStats {
    std::string method;
    int iterations = 0;
    double residual = 0.0;
};

// Sparse matrix of the pointwise Delta_A on the unknowns (node, algebra component),
// restricted to interior rows and columns when interior_only is set.
Eigen::SparseMatrix<double> assemble_laplacian(const Connection& A, bool interior_only);

const char* method_name(GreenOptions::Method m);

class GreenSolve {
public:
    GreenSolve(const Connection& A, GreenOptions opt = {});
    ~GreenSolve();
    GreenSolve(GreenSolve&&) noexcept;
    GreenSolve& operator=(GreenSolve&&) noexcept;

    // f with DBC and Delta_A f = g on interior nodes
    Section solve(const Section& g);

    const SolveStats& last() const { return last_; }
    const Connection& connection() const { return A_; }
    const GreenOptions& options() const { return opt_; }

private:
    struct Impl;
    Connection A_;
    GreenOptions opt_;
    std::unique_ptr<Impl> impl_;
    SolveStats last_;
};

Section green_A(const Section& g, const Connection& A, GreenSolve& solve);
Section green_A(const Section& g, const Connection& A, const GreenOptions& opt = {});

OneForm horizontal_project(const OneForm& eta, const Connection& A, GreenSolve& solve);
OneForm horizontal_project(const OneForm& eta, const Connection& A);

// Hodge star on p-forms, sign convention w ^ *w = |w|^2 vol.
Form hodge_star(const Form& w);
Form hodge_star_inverse(const Form& w);
Form exterior_d_A(const Form& w, const Connection& A);
// (-1)^{n(p+1)+1} * d_A * on p-forms, p >= 1
Form codiff_form(const Form& w, const Connection& A);
OneForm codiff_2form(const TwoForm& w, const Connection& A);

// Two-form with *w = F x dy_1 ^ ... ^ dy_{n-2} (n = 2: *w = F x).
TwoForm lemma_two_form(const ScalarField& F, const Alg& x);
// Closed-form codifferential of lemma_two_form(F, x) in orthogonal coordinates:
// -(1/b) sum_i (F_{n-1} h_{in} - F_n h_{i(n-1)}) dy_i x
OneForm lemma_codiff_closed(const ScalarField& F, const Alg& x);

BoundaryField boundary_operator_T(const Section& f, const Connection& A, bool require_dbc = true);
BoundaryField boundary_operator_Ttilde(const Section& f);
// Same formula for a given Laplacian sample L (all nodes).
BoundaryField boundary_operator_from_laplacian(const Section& L, const Connection& A);

// Smallest Ritz value of Delta_A on Dirichlet sections by inverse iteration.
double smallest_ritz_value(const Connection& A, Codiff form, int iterations = 40, std::uint64_t seed = 7);

}  // namespace gb
