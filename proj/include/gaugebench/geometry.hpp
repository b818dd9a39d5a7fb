#pragma once

// Logical rectangular charts. The last axis is the normal axis and carries the
// two boundary faces; all other axes are periodic in the built-in domains.

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gaugebench/errors.hpp"

namespace gb {

enum class DomainKind { annulus, slab, shell, custom };

const char* domain_name(DomainKind k);
DomainKind parse_domain(const std::string& s);

using Point = std::array<double, 3>;
using MetricFn = std::function<Eigen::Matrix3d(const Point&)>;

struct DomainSpec {
    DomainKind kind = DomainKind::annulus;
    double r0 = 0.5;
    double r1 = 1.0;
    double length = 2.0 * 3.14159265358979323846;  // periodic extent (slab, shell z)
    double height = 1.0;                            // slab normal extent
    int dims = 2;                                   // slab / custom
    // custom charts only
    Point lo{0, 0, 0};
    Point hi{1, 1, 1};
    std::array<bool, 3> periodic{true, true, false};
    MetricFn metric;
    std::string label;

    static DomainSpec annulus(double r0 = 0.5, double r1 = 1.0);
    static DomainSpec slab(int dims = 2, double length = 2.0 * 3.14159265358979323846, double height = 1.0);
    static DomainSpec shell(double r0 = 0.5, double r1 = 1.0, double length = 2.0 * 3.14159265358979323846);
};

// One row of a derivative operator along an axis: out[i] = sum w * in[idx].
struct StencilRow {
    std::vector<int> idx;
    std::vector<double> w;
};

class Chart {
public:
    int n = 2;
    std::array<int, 3> N{1, 1, 1};
    std::array<double, 3> h{1, 1, 1};
    std::array<double, 3> lo{0, 0, 0};
    std::array<bool, 3> periodic{false, false, false};
    std::array<int, 3> stride{0, 0, 0};
    int fd_order = 6;
    int nodes = 0;
    DomainSpec spec;

    // per node, row-major n x n
    std::vector<double> metric, inv_metric;
    std::vector<double> volume;  // a = sqrt(det g)
    std::vector<double> weight;  // quadrature weight (no volume factor)
    std::array<std::vector<StencilRow>, 3> deriv;

    DomainKind kind() const { return spec.kind; }
    int normal_axis() const { return n - 1; }
    int tangential_count() const { return nodes / N[n - 1]; }
    int boundary_count() const { return 2 * tangential_count(); }

    double coord(int axis, int i) const { return lo[axis] + h[axis] * i; }
    int index_along(int node, int axis) const { return (node / stride[axis]) % N[axis]; }
    Point point(int node) const;

    double g(int node, int i, int j) const { return metric[node * n * n + i * n + j]; }
    double ginv(int node, int i, int j) const { return inv_metric[node * n * n + i * n + j]; }

    // boundary node b = face * T + t with face 0 at index 0 of the normal axis
    int boundary_node(int b) const;
    int face_of(int b) const { return b / tangential_count(); }
    // +1 on face 0 (inward = increasing index), -1 on face 1
    double inward_sign(int face) const { return face == 0 ? 1.0 : -1.0; }
    bool is_boundary(int node) const {
        int k = node % N[n - 1];
        return k == 0 || k == N[n - 1] - 1;
    }

    // derivative of per-node data along an axis; T supports += and scalar *
    template <class T>
    void differentiate(int axis, const T* in, T* out) const;
    template <class T>
    T derivative_at(int axis, const T* in, int node) const;

    bool same_as(const Chart& o) const { return this == &o; }
    std::string describe() const;
};

using ChartPtr = std::shared_ptr<const Chart>;

ChartPtr build_chart(const DomainSpec& spec, const std::vector<int>& resolution, int fd_order = 6);

// Finite difference weights for the m-th derivative at x0 on nodes xs.
std::vector<double> fd_weights(const std::vector<double>& xs, double x0, int m);

struct BoundaryScalar {
    ChartPtr chart;
    std::vector<double> v;
    double max_abs() const;
};

bool is_type_a(const Chart& c, double tol = 1e-12);
bool is_type_b(const Chart& c, double tol = 1e-12);

BoundaryScalar mean_curvature_typeA(const ChartPtr& c);
BoundaryScalar mean_curvature_typeB(const ChartPtr& c);

// Signed unit coordinate direction (+1 or -1 along the normal axis) per node
// of the face; the physical unit normal is sign / sqrt(g_nn) d/dx_n.
std::vector<double> inward_normal(const Chart& c, int face);

template <class T>
void Chart::differentiate(int axis, const T* in, T* out) const {
    const int s = stride[axis];
    const int Na = N[axis];
    const auto& rows = deriv[axis];
    for (int node = 0; node < nodes; ++node) {
        const int i = (node / s) % Na;
        const int base = node - i * s;
        const StencilRow& r = rows[i];
        T acc{};
        for (size_t q = 0; q < r.idx.size(); ++q) acc += r.w[q] * in[base + r.idx[q] * s];
        out[node] = acc;
    }
}

template <class T>
T Chart::derivative_at(int axis, const T* in, int node) const {
    const int s = stride[axis];
    const int i = (node / s) % N[axis];
    const int base = node - i * s;
    const StencilRow& r = deriv[axis][i];
    T acc{};
    for (size_t q = 0; q < r.idx.size(); ++q) acc += r.w[q] * in[base + r.idx[q] * s];
    return acc;
}

}  // namespace gb
