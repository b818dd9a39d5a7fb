#include "gaugebench/geometry.hpp"

#include <cmath>
#include <sstream>

namespace gb {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* domain_name(DomainKind k) {
    switch (k) {
        case DomainKind::annulus: return "annulus";
        case DomainKind::slab: return "slab";
        case DomainKind::shell: return "shell";
        case DomainKind::custom: return "custom";
    }
    return "?";
}

DomainKind parse_domain(const std::string& s) {
    if (s == "annulus") return DomainKind::annulus;
    if (s == "slab") return DomainKind::slab;
    if (s == "shell") return DomainKind::shell;
    throw Error(ErrorKind::ConfigError, "unknown domain '" + s + "'");
}

DomainSpec DomainSpec::annulus(double r0, double r1) {
    DomainSpec s;
    s.kind = DomainKind::annulus;
    s.r0 = r0;
    s.r1 = r1;
    s.dims = 2;
    return s;
}

DomainSpec DomainSpec::slab(int dims, double length, double height) {
    DomainSpec s;
    s.kind = DomainKind::slab;
    s.dims = dims;
    s.length = length;
    s.height = height;
    return s;
}

DomainSpec DomainSpec::shell(double r0, double r1, double length) {
    DomainSpec s;
    s.kind = DomainKind::shell;
    s.r0 = r0;
    s.r1 = r1;
    s.length = length;
    s.dims = 3;
    return s;
}

std::vector<double> fd_weights(const std::vector<double>& xs, double x0, int m) {
    // Fornberg's recursion
    const int n = static_cast<int>(xs.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0, c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0;
        double c5 = c4;
        c4 = xs[i] - x0;
        for (int j = 0; j < i; ++j) {
            double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

Point Chart::point(int node) const {
    Point p{0, 0, 0};
    for (int ax = 0; ax < n; ++ax) p[ax] = coord(ax, index_along(node, ax));
    return p;
}

int Chart::boundary_node(int b) const {
    const int T = tangential_count();
    const int face = b / T;
    const int t = b % T;
    const int Nn = N[n - 1];
    return t * Nn + (face == 0 ? 0 : Nn - 1);
}

std::string Chart::describe() const {
    std::ostringstream os;
    os << domain_name(kind()) << " n=" << n << " sizes=";
    for (int ax = 0; ax < n; ++ax) os << (ax ? "x" : "") << N[ax];
    os << " order=" << fd_order;
    return os.str();
}

namespace {

std::vector<StencilRow> build_axis(int Na, double h, bool periodic, int order) {
    std::vector<StencilRow> rows(Na);
    const int half = order / 2;
    if (periodic) {
        std::vector<double> xs;
        for (int q = -half; q <= half; ++q) xs.push_back(q * h);
        auto w = fd_weights(xs, 0.0, 1);
        for (int i = 0; i < Na; ++i) {
            for (int q = -half; q <= half; ++q) {
                if (q == 0) continue;
                rows[i].idx.push_back(((i + q) % Na + Na) % Na);
                rows[i].w.push_back(w[q + half]);
            }
        }
        return rows;
    }
    const int npts = order + 1;
    for (int i = 0; i < Na; ++i) {
        std::vector<int> idx;
        if (i - half >= 0 && i + half < Na) {
            for (int q = i - half; q <= i + half; ++q) idx.push_back(q);
        } else if (i < half) {
            for (int q = 0; q < npts; ++q) idx.push_back(q);
        } else {
            for (int q = Na - npts; q < Na; ++q) idx.push_back(q);
        }
        std::vector<double> xs;
        for (int q : idx) xs.push_back((q - i) * h);
        auto w = fd_weights(xs, 0.0, 1);
        for (size_t q = 0; q < idx.size(); ++q) {
            if (w[q] == 0.0) continue;
            rows[i].idx.push_back(idx[q]);
            rows[i].w.push_back(w[q]);
        }
    }
    return rows;
}

}  // namespace

ChartPtr build_chart(const DomainSpec& spec, const std::vector<int>& resolution, int fd_order) {
    auto c = std::make_shared<Chart>();
    c->spec = spec;
    c->fd_order = fd_order;
    if (fd_order != 2 && fd_order != 4 && fd_order != 6)
        throw Error(ErrorKind::BadGeometry, "finite difference order must be 2, 4 or 6");

    int n = 2;
    switch (spec.kind) {
        case DomainKind::annulus: n = 2; break;
        case DomainKind::shell: n = 3; break;
        case DomainKind::slab:
        case DomainKind::custom: n = spec.dims; break;
    }
    if (n != 2 && n != 3) throw Error(ErrorKind::BadGeometry, "dimension must be 2 or 3");
    c->n = n;
    if (resolution.empty()) throw Error(ErrorKind::BadGeometry, "empty resolution");
    for (int ax = 0; ax < n; ++ax) {
        int Na = resolution.size() == 1 ? resolution[0] : resolution.at(ax);
        if (Na < 8) throw Error(ErrorKind::BadGeometry, "resolution below 8 on axis " + std::to_string(ax));
        c->N[ax] = Na;
    }

    Point lo{0, 0, 0}, hi{0, 0, 0};
    std::array<bool, 3> per{false, false, false};
    switch (spec.kind) {
        case DomainKind::annulus:
        case DomainKind::shell:
            if (!(spec.r0 > 0.0) || !(spec.r1 > spec.r0))
                throw Error(ErrorKind::BadGeometry, "need 0 < r0 < r1");
            lo[0] = 0.0; hi[0] = 2.0 * kPi; per[0] = true;
            if (n == 3) { lo[1] = 0.0; hi[1] = spec.length; per[1] = true; }
            lo[n - 1] = spec.r0; hi[n - 1] = spec.r1;
            break;
        case DomainKind::slab:
            if (!(spec.length > 0.0) || !(spec.height > 0.0))
                throw Error(ErrorKind::BadGeometry, "slab extents must be positive");
            for (int ax = 0; ax < n - 1; ++ax) { lo[ax] = 0.0; hi[ax] = spec.length; per[ax] = true; }
            lo[n - 1] = 0.0; hi[n - 1] = spec.height;
            break;
        case DomainKind::custom:
            if (!spec.metric) throw Error(ErrorKind::BadGeometry, "custom chart without metric");
            for (int ax = 0; ax < n; ++ax) {
                lo[ax] = spec.lo[ax]; hi[ax] = spec.hi[ax]; per[ax] = ax < n - 1 && spec.periodic[ax];
                if (!(hi[ax] > lo[ax])) throw Error(ErrorKind::BadGeometry, "empty axis extent");
            }
            break;
    }
    for (int ax = 0; ax < n; ++ax) {
        c->lo[ax] = lo[ax];
        c->periodic[ax] = per[ax];
        c->h[ax] = per[ax] ? (hi[ax] - lo[ax]) / c->N[ax] : (hi[ax] - lo[ax]) / (c->N[ax] - 1);
    }
    c->stride[n - 1] = 1;
    for (int ax = n - 2; ax >= 0; --ax) c->stride[ax] = c->stride[ax + 1] * c->N[ax + 1];
    c->nodes = c->stride[0] * c->N[0];
    for (int ax = 0; ax < n; ++ax) {
        if (!per[ax] && c->N[ax] < fd_order + 2)
            throw Error(ErrorKind::BadGeometry, "too few normal nodes for the stencil order");
        c->deriv[ax] = build_axis(c->N[ax], c->h[ax], per[ax], fd_order);
    }

    const int nn = n * n;
    c->metric.assign(static_cast<size_t>(c->nodes) * nn, 0.0);
    c->inv_metric.assign(static_cast<size_t>(c->nodes) * nn, 0.0);
    c->volume.assign(c->nodes, 0.0);
    c->weight.assign(c->nodes, 0.0);
    for (int node = 0; node < c->nodes; ++node) {
        Point p = c->point(node);
        Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
        switch (spec.kind) {
            case DomainKind::annulus:
            case DomainKind::shell: {
                double r = p[n - 1];
                g(0, 0) = r * r;
                break;
            }
            case DomainKind::slab: break;
            case DomainKind::custom: g = spec.metric(p).topLeftCorner(n, n); break;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success || (g - g.transpose()).norm() > 1e-14 * g.norm())
            throw Error(ErrorKind::BadGeometry, "metric not symmetric positive definite");
        Eigen::MatrixXd gi = g.inverse();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                c->metric[node * nn + i * n + j] = g(i, j);
                c->inv_metric[node * nn + i * n + j] = gi(i, j);
            }
        c->volume[node] = std::sqrt(g.determinant());
        double w = 1.0;
        for (int ax = 0; ax < n; ++ax) {
            int i = c->index_along(node, ax);
            double wa = c->h[ax];
            if (!per[ax] && (i == 0 || i == c->N[ax] - 1)) wa *= 0.5;
            w *= wa;
        }
        c->weight[node] = w;
    }
    return c;
}

double BoundaryScalar::max_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

bool is_type_a(const Chart& c, double tol) {
    const int n = c.n;
    for (int node = 0; node < c.nodes; ++node) {
        if (std::abs(c.g(node, n - 1, n - 1) - 1.0) > tol) return false;
        if (c.is_boundary(node))
            for (int i = 0; i < n - 1; ++i)
                if (std::abs(c.g(node, i, n - 1)) > tol) return false;
    }
    return true;
}

bool is_type_b(const Chart& c, double tol) {
    const int n = c.n;
    for (int node = 0; node < c.nodes; ++node)
        for (int i = 0; i < n - 1; ++i)
            if (std::abs(c.g(node, i, n - 1)) > tol) return false;
    return true;
}

BoundaryScalar mean_curvature_typeA(const ChartPtr& cp) {
    const Chart& c = *cp;
    if (!is_type_a(c)) throw Error(ErrorKind::NotTypeA, c.describe());
    BoundaryScalar H{cp, std::vector<double>(c.boundary_count())};
    const int ax = c.n - 1;
    for (int b = 0; b < c.boundary_count(); ++b) {
        int node = c.boundary_node(b);
        double s = c.inward_sign(c.face_of(b));
        double da = c.derivative_at(ax, c.volume.data(), node);
        H.v[b] = s * da / c.volume[node] / (c.n - 1);
    }
    return H;
}

BoundaryScalar mean_curvature_typeB(const ChartPtr& cp) {
    const Chart& c = *cp;
    if (!is_type_b(c)) throw Error(ErrorKind::NotTypeB, c.describe());
    const int ax = c.n - 1;
    std::vector<double> inv_sqrt(c.nodes);
    for (int node = 0; node < c.nodes; ++node) inv_sqrt[node] = 1.0 / std::sqrt(c.g(node, ax, ax));
    BoundaryScalar H{cp, std::vector<double>(c.boundary_count())};
    for (int b = 0; b < c.boundary_count(); ++b) {
        int node = c.boundary_node(b);
        double s = c.inward_sign(c.face_of(b));
        // d(u)(nu) = s / sqrt(h_nn) du/dx_n
        double speed = s * inv_sqrt[node];
        double t1 = (1.0 / inv_sqrt[node]) * speed * c.derivative_at(ax, inv_sqrt.data(), node);
        double t2 = speed * c.derivative_at(ax, c.volume.data(), node) / c.volume[node];
        H.v[b] = (t1 + t2) / (c.n - 1);
    }
    return H;
}

std::vector<double> inward_normal(const Chart& c, int face) {
    if (face != 0 && face != 1) throw Error(ErrorKind::BadGeometry, "face must be 0 or 1");
    return std::vector<double>(c.tangential_count(), c.inward_sign(face));
}

}  // namespace gb
