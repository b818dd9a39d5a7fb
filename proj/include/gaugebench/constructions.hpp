#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gaugebench/operators.hpp"

namespace gb {

// Smooth profiles built from exp(-1/t).
namespace bump {
double edge(double t);                            // exp(-1/t) for t > 1e-8, else 0
double step(double x, double a, double b);        // 0 for x <= a, 1 for x >= b
double bump(double x, double center, double half_width);  // support (c - w, c + w), peak 1
double plateau(double x, double a0, double a1, double b0, double b1);  // 0 | up on (a0,a1) | 1 | down on (b0,b1)
}  // namespace bump

// Default ladder fractions of a window for gamma_1 .. gamma_6.
inline constexpr std::array<double, 6> kLadder{0.15, 0.25, 0.35, 0.45, 0.75, 0.90};

enum class AxisRole { integrate, plateau, anchored };

// Window along one axis, in the axis coordinate (unwrapped for periodic axes).
//   integrate: eta on (g2, g3), psi in (g4, g5), v = (x - c) on [g4, g5], supp v in (g3, g6)
//   plateau:   v = 1 on [g4, g5], supp v in (g3, g6)
//   anchored:  normal axis measured from the face: v = 1 on [0, g5], supp v in [0, g6)
struct AxisWindow {
    AxisRole role = AxisRole::plateau;
    std::array<double, 6> g{};
    int face = 0;  // anchored only
};

struct ChartWindow {
    std::vector<AxisWindow> axes;  // one per chart axis
};

// Local coordinate of node index i along an axis inside a window: for periodic
// axes the representative in [g1 - period/2 ... ) closest to the window.
double window_coordinate(const Chart& c, int axis, const AxisWindow& w, int i);

// Windows sized from the support of psi (|psi| > 0 on the grid).
// anchored_face < 0: interior construction (all axes plateau or integrate).
ChartWindow window_for_support(const ScalarField& psi, int anchored_face);

struct BumpKit {
    ChartPtr chart;
    ChartWindow window;
    int integration_axis = 0;
    std::vector<double> eta;        // per node along the integration axis, sum h eta = 1
    std::vector<std::vector<double>> v;  // per axis, per index

    static BumpKit make(const ChartPtr& c, const ChartWindow& w);
    ScalarField G() const;
    double eta_integral() const;
};

struct ChartInverse {
    OneForm alpha, beta;
    ScalarField F, G, phi;
    ChartWindow window;
    double compatibility_defect = 0.0;  // max |D_n(h^nn b^2 psi)| on the anchored face
    double fn_gn = 0.0;                  // max |F_n G_n|
    bool f_support_ok = true;            // supp F inside the window box
};

struct ChartInverseOptions {
    double compatibility_tol = 1e-8;  // relative to max |h^nn b^2 psi| / h_n
    bool check_compatibility = true;
};

// Co-closed a, b with DBC and [a.b] = psi [A, B] up to discretization error.
// anchored_face selects the boundary face the window touches (-1: interior).
ChartInverse boundary_chart_inverse(const ScalarField& psi, const Alg& A, const Alg& B, int anchored_face,
                                    const ChartInverseOptions& opt = {});
ChartInverse boundary_chart_inverse(const ScalarField& psi, const Alg& A, const Alg& B, const ChartWindow& w,
                                    const ChartInverseOptions& opt = {});

// Discrete compatibility: D_n(h^nn b^2 psi) on the boundary nodes of a face.
std::vector<double> compatibility_defect(const ScalarField& psi, int face);
// psi - d(t) q(x_n) / (h^nn b^2) with D_n q = 1 at the face and q = 0 off a collar,
// which zeroes the discrete compatibility defect. Returns the correction size.
double project_compatible(ScalarField& psi, int face, double collar);

// Normal profile rho with rho(face) = 1, chosen so that bump(t) rho satisfies the
// discrete compatibility condition exactly; variant selects the quadratic shape.
ScalarField compatible_profile(const ChartPtr& c, int face, double center, double half_width, int variant);
// Same with an arbitrary tangential factor, one value per tangential index.
ScalarField compatible_profile(const ChartPtr& c, int face, const std::vector<double>& tangential, int variant);

// g plus boundary-layer corrections (zero on the boundary, confined to a few
// cells) so that T0(g) = 0 on the grid for the flat connection.
struct KernelProjection {
    Section g;
    double correction = 0.0;  // sup norm of the added layer
    double before = 0.0;      // |T0(g)|_inf before
    double after = 0.0;       // |T0(g)|_inf after
};
KernelProjection kernel_project(const Section& g);

// Smooth DBC section with T0(g) = 0 on the grid (to roundoff on charts whose
// metric depends only on the normal coordinate): per algebra component a
// tangential Fourier mode times a normal profile sin(pi xi)(1 + c xi) plus two
// boundary shapes xi^2(1 - xi), xi(1 - xi)^2 fitted by least squares.
Section kernel_section(const ChartPtr& c, std::uint64_t seed);

// Periodic partition of unity along a tangential axis: mu_k >= 0, sum mu_k = 1.
std::vector<std::vector<double>> periodic_partition(const Chart& c, int axis, int pieces);

// lambda_k = mu_k(tangential) c_face(normal) with c = 1 on [0, collar0], 0 beyond collar1.
struct PartitionOfUnity {
    std::vector<ScalarField> lambda;
    std::vector<int> face;      // face of each piece
    ScalarField remainder;      // 1 - sum lambda
    double collar0 = 0.0, collar1 = 0.0;
};

PartitionOfUnity make_partition_of_unity(const ChartPtr& c, int pieces, double collar0 = -1.0,
                                         double collar1 = -1.0);

struct FormPair {
    OneForm alpha, beta;
    std::string origin;
};

struct SectionPair {
    Section g, h;
};

Section reconstruct_brackets(const std::vector<FormPair>& pairs, const ChartPtr& c);

struct InteriorInverse {
    std::vector<FormPair> pairs;
    double residual = 0.0;  // |sum [a.b] - f|_inf
    double max_codiff = 0.0;
    double max_dbc = 0.0;
    int cubes = 0;
};

InteriorInverse interior_inverse(const Section& f, int pieces = 6);

struct KernelOptions {
    int pieces = 8;
    int interior_pieces = 6;
    double kernel_tol = 1e-8;  // relative |T0~ f| / (|f| / h_n); negative disables
    bool project = true;
};

struct KernelDecomposition {
    std::vector<FormPair> pairs;
    double residual = 0.0;         // |sum [a.b] - f|_inf
    double ttilde = 0.0;           // |T0~ f|_inf
    double correction = 0.0;       // compatibility projection applied to collar pieces
    double max_codiff = 0.0;
    double max_dbc = 0.0;
    int boundary_pairs = 0, interior_pairs = 0;
};

KernelDecomposition kernel_decompose(const Section& f, const KernelOptions& opt = {});

struct GeneratorOptions {
    int pieces = 8;
    enum class Source { band, centered } source = Source::band;
    double extension_depth = 1.0;  // a as a fraction of the normal extent; supp of the extension is [0, a/2]
};

struct GeneratorResult {
    std::vector<SectionPair> pairs;
    Section sum;                 // sum [g_i, h_i]
    double residual = 0.0;       // |T0(sum) - F|_inf / |F|_inf
    double hopf_min = 0.0;       // min d(G phi)(nu)
    double hopf_max = 0.0;
};

GeneratorResult generator_for_boundary_data(const BoundaryField& F, const GeneratorOptions& opt = {});

struct DecompositionCertificate {
    std::vector<SectionPair> commutator_pairs;
    std::vector<FormPair> horizontal_pairs;
    double boundary_stage = 0.0;   // |T0(g - f)|_inf / |T0(g)|_inf
    double kernel_stage = 0.0;     // |sum [a.b] - Delta0(g - f)|_inf / |Delta0(g - f)|_inf
    double residual = 0.0;         // |g - f - G(sum [a.b])|_inf / |g|_inf
    double boundary_residual = 0.0;
    double correction = 0.0;
    double generator_residual = 0.0;
    double hopf_min = 0.0;
    std::string chart;
};

struct DecomposeOptions {
    GeneratorOptions generator;
    KernelOptions kernel{8, 6, -1.0, true};
};

DecompositionCertificate full_decompose(const Section& g, const DecomposeOptions& opt = {});

struct BracketIdentity {
    double interior = 0.0, interior_scale = 0.0;
    double boundary = 0.0, boundary_scale = 0.0;
    double kernel_defect = 0.0;  // max |T0(g_i)|_inf / (|Delta0 g_i|_inf / h_n)
};

// Product rule for Delta [g1, g2] on interior nodes and the boundary identity
// d(Delta[g1,g2])(nu) + 2(n-1)H Delta[g1,g2] = 3[Delta g1, d g2(nu)] + 3[d g1(nu), Delta g2].
BracketIdentity bracket_identity_check(const Section& g1, const Section& g2);

}  // namespace gb
