#include "gaugebench/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace gb {

namespace bump {

double edge(double t) { return t > 1e-8 ? std::exp(-1.0 / t) : 0.0; }

double step(double x, double a, double b) {
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    double u = (x - a) / (b - a);
    double e0 = edge(u), e1 = edge(1.0 - u);
    return e0 / (e0 + e1);
}

double bump(double x, double center, double half_width) {
    double u = (x - center) / half_width;
    double t = 1.0 - u * u;
    if (t <= 1e-8) return 0.0;
    return std::exp(1.0 - 1.0 / t);
}

double plateau(double x, double a0, double a1, double b0, double b1) {
    return step(x, a0, a1) * (1.0 - step(x, b0, b1));
}

}  // namespace bump

namespace {

double period(const Chart& c, int axis) { return c.N[axis] * c.h[axis]; }
double thickness(const Chart& c) { return (c.N[c.n - 1] - 1) * c.h[c.n - 1]; }
int reach(const Chart& c) { return c.fd_order / 2; }

// coordinate of index i measured from the face
double face_distance(const Chart& c, int face, int i) {
    const int a = c.n - 1;
    return face == 0 ? i * c.h[a] : (c.N[a] - 1 - i) * c.h[a];
}

ScalarField hb2(const ChartPtr& cp) {
    const Chart& c = *cp;
    ScalarField s = make_scalar(cp);
    const int a = c.n - 1;
    for (int node = 0; node < c.nodes; ++node)
        s.v[node] = c.ginv(node, a, a) * c.volume[node] * c.volume[node];
    return s;
}

bool all_zero(const ScalarField& s) {
    return std::all_of(s.v.begin(), s.v.end(), [](double x) { return x == 0.0; });
}

// Cumulative cell-integration weights on offsets -(k-1)..k for order 2k.
std::vector<double> cumulative_weights(int order) {
    const int k = order / 2;
    const int m = 2 * k;
    Eigen::MatrixXd V(m, m);
    Eigen::VectorXd rhs(m);
    for (int p = 0; p < m; ++p) {
        for (int q = 0; q < m; ++q) V(p, q) = std::pow(double(q - (k - 1)), p);
        rhs[p] = 1.0 / (p + 1);
    }
    Eigen::VectorXd w = V.fullPivLu().solve(rhs);
    return std::vector<double>(w.data(), w.data() + m);
}

struct Support {
    bool any = false;
    double lo = 0.0, hi = 0.0;  // unwrapped coordinates
};

// support of a per-index mask along a periodic axis, as an unwrapped interval
Support periodic_support(const Chart& c, int axis, const std::vector<char>& mark) {
    const int N = c.N[axis];
    Support s;
    int count = 0;
    for (char m : mark) count += m ? 1 : 0;
    if (count == 0) return s;
    s.any = true;
    if (count == N) throw Error(ErrorKind::WindowTooSmall, "support wraps the whole periodic axis");
    // largest run of unmarked indices
    int best_len = 0, best_end = 0;
    for (int start = 0; start < N; ++start) {
        if (mark[start] || !mark[(start + N - 1) % N]) continue;
        int len = 0;
        while (len < N && !mark[(start + len) % N]) ++len;
        if (len > best_len) {
            best_len = len;
            best_end = (start + len) % N;
        }
    }
    const int first = best_end;
    const int span = N - best_len;
    s.lo = c.coord(axis, first);
    s.hi = s.lo + (span - 1) * c.h[axis];
    return s;
}

AxisWindow tangential_window(const Chart& c, int axis, const Support& s, bool integrate) {
    const double h = c.h[axis];
    const int r = reach(c);
    const double m = (r + 1) * h;
    const double P = period(c, axis);
    AxisWindow w;
    w.role = integrate ? AxisRole::integrate : AxisRole::plateau;
    const double g4 = s.lo - m, g5 = s.hi + m;
    const double L = g5 - g4;
    // eta needs room for a resolved bump plus two stencil reaches before g3
    const double eta_room = (2 * r + 6) * h;
    const double delta = std::max({L / (kLadder[4] - kLadder[3]), eta_room / (kLadder[2] - kLadder[1]),
                                   3.0 * h / (kLadder[3] - kLadder[2])});
    if (delta < P * (1.0 - 1e-12)) {
        // fixed fractions, centred on the support
        const double w0 = 0.5 * (g4 + g5) - 0.5 * (kLadder[3] + kLadder[4]) * delta;
        for (int i = 0; i < 6; ++i) w.g[i] = w0 + kLadder[i] * delta;
        return w;
    }
    // compact ladder: minimal transitions around psi
    const double t = std::max(3.0 * h, m);
    w.g[3] = g4;
    w.g[4] = g5;
    w.g[2] = g4 - t;
    w.g[5] = g5 + t;
    if (integrate) {
        w.g[1] = w.g[2] - eta_room;
        w.g[0] = w.g[1] - 2.0 * h;
    } else {
        w.g[0] = w.g[1] = w.g[2];
    }
    if (w.g[5] - w.g[0] + 2.0 * h > P)
        throw Error(ErrorKind::WindowTooSmall, "support of width " + std::to_string(s.hi - s.lo) +
                                                   " does not leave room for the bump ladder on axis " +
                                                   std::to_string(axis));
    return w;
}

}  // namespace

double window_coordinate(const Chart& c, int axis, const AxisWindow& w, int i) {
    if (w.role == AxisRole::anchored) return face_distance(c, w.face, i);
    double x = c.coord(axis, i);
    if (!c.periodic[axis]) return x;
    const double P = period(c, axis);
    const double origin = 0.5 * (w.g[0] + w.g[5]) - 0.5 * P;
    double k = std::floor((x - origin) / P);
    return x - k * P;
}

ChartWindow window_for_support(const ScalarField& psi, int anchored_face) {
    const Chart& c = *psi.chart;
    const int n = c.n, na = n - 1;
    ChartWindow cw;
    cw.axes.resize(n);
    for (int a = 0; a < na; ++a) {
        std::vector<char> mark(c.N[a], 0);
        for (int node = 0; node < c.nodes; ++node)
            if (psi.v[node] != 0.0) mark[c.index_along(node, a)] = 1;
        Support s = periodic_support(c, a, mark);
        if (!s.any) throw Error(ErrorKind::WindowTooSmall, "empty support");
        cw.axes[a] = tangential_window(c, a, s, a == n - 2);
    }
    const double h = c.h[na];
    const int r = reach(c);
    const double mn = (2 * r + 1) * h;
    const double T = thickness(c);
    const double clear = (c.fd_order + 1) * h;  // one-sided stencils at the far face
    AxisWindow& w = cw.axes[na];
    if (anchored_face >= 0) {
        double ys = 0.0;
        for (int node = 0; node < c.nodes; ++node)
            if (psi.v[node] != 0.0)
                ys = std::max(ys, face_distance(c, anchored_face, c.index_along(node, na)));
        w.role = AxisRole::anchored;
        w.face = anchored_face;
        w.g[4] = ys + mn;
        double t = std::min(std::max(4.0 * h, 0.15 * T), T - clear - w.g[4]);
        if (t < 3.0 * h) throw Error(ErrorKind::WindowTooSmall, "normal support leaves no room for the cutoff");
        w.g[5] = w.g[4] + t;
    } else {
        int kmin = c.N[na], kmax = -1;
        for (int node = 0; node < c.nodes; ++node)
            if (psi.v[node] != 0.0) {
                int k = c.index_along(node, na);
                kmin = std::min(kmin, k);
                kmax = std::max(kmax, k);
            }
        const double lo = c.lo[na], hi = c.lo[na] + T;
        w.role = AxisRole::plateau;
        w.g[3] = c.coord(na, kmin) - mn;
        w.g[4] = c.coord(na, kmax) + mn;
        double room = std::min(w.g[3] - lo - clear, hi - clear - w.g[4]);
        double t = std::min(std::max(4.0 * h, 0.15 * T), room);
        if (t < 3.0 * h)
            throw Error(ErrorKind::SupportTouchesBoundary, "interior support too close to the boundary for the cutoff");
        w.g[2] = w.g[3] - t;
        w.g[5] = w.g[4] + t;
        w.g[0] = w.g[1] = w.g[2];
    }
    return cw;
}

BumpKit BumpKit::make(const ChartPtr& cp, const ChartWindow& w) {
    const Chart& c = *cp;
    BumpKit k;
    k.chart = cp;
    k.window = w;
    k.integration_axis = c.n - 2;
    k.v.resize(c.n);
    for (int a = 0; a < c.n; ++a) {
        const AxisWindow& aw = w.axes[a];
        k.v[a].resize(c.N[a]);
        for (int i = 0; i < c.N[a]; ++i) {
            double x = window_coordinate(c, a, aw, i);
            const auto& g = aw.g;
            switch (aw.role) {
                case AxisRole::integrate:
                    k.v[a][i] = (x - 0.5 * (g[3] + g[4])) * bump::plateau(x, g[2], g[3], g[4], g[5]);
                    break;
                case AxisRole::plateau: k.v[a][i] = bump::plateau(x, g[2], g[3], g[4], g[5]); break;
                case AxisRole::anchored: k.v[a][i] = 1.0 - bump::step(x, g[4], g[5]); break;
            }
        }
    }
    const int ia = k.integration_axis;
    const AxisWindow& aw = w.axes[ia];
    const double e0 = aw.g[1] + c.h[ia], e1 = aw.g[2] - (2 * reach(c) + 1) * c.h[ia];
    if (e1 <= e0) throw Error(ErrorKind::WindowTooSmall, "no room for the unit-integral bump");
    k.eta.resize(c.N[ia]);
    double sum = 0.0;
    for (int i = 0; i < c.N[ia]; ++i) {
        double x = window_coordinate(c, ia, aw, i);
        k.eta[i] = bump::bump(x, 0.5 * (e0 + e1), 0.5 * (e1 - e0));
        sum += c.h[ia] * k.eta[i];
    }
    if (sum <= 0.0) throw Error(ErrorKind::WindowTooSmall, "bump is not resolved by the grid");
    for (double& e : k.eta) e /= sum;
    return k;
}

ScalarField BumpKit::G() const {
    const Chart& c = *chart;
    ScalarField s = make_scalar(chart, 1.0);
    for (int node = 0; node < c.nodes; ++node)
        for (int a = 0; a < c.n; ++a) s.v[node] *= v[a][c.index_along(node, a)];
    return s;
}

double BumpKit::eta_integral() const {
    const Chart& c = *chart;
    double s = 0.0;
    for (double e : eta) s += c.h[integration_axis] * e;
    return s;
}

std::vector<double> compatibility_defect(const ScalarField& psi, int face) {
    const Chart& c = *psi.chart;
    const int na = c.n - 1;
    ScalarField q = hb2(psi.chart);
    for (int node = 0; node < c.nodes; ++node) q.v[node] *= psi.v[node];
    const int T = c.tangential_count();
    std::vector<double> d(T);
    for (int t = 0; t < T; ++t) d[t] = c.derivative_at(na, q.v.data(), c.boundary_node(face * T + t));
    return d;
}

double project_compatible(ScalarField& psi, int face, double collar) {
    const Chart& c = *psi.chart;
    const int na = c.n - 1;
    std::vector<double> d = compatibility_defect(psi, face);
    const int T = c.tangential_count();
    const int Nr = c.N[na];
    std::vector<double> q(Nr);
    for (int k = 0; k < Nr; ++k) {
        double y = face_distance(c, face, k);
        q[k] = (c.coord(na, k) - c.coord(na, face == 0 ? 0 : Nr - 1)) * (1.0 - bump::step(y, 0.5 * collar, collar));
    }
    ScalarField h2 = hb2(psi.chart);
    double corr = 0.0;
    for (int t = 0; t < T; ++t) {
        if (d[t] == 0.0) continue;
        const int base = t * Nr;
        // normalize so the discrete normal derivative of q at the face is exactly 1
        double dq = c.derivative_at(na, q.data(), face == 0 ? 0 : Nr - 1);
        for (int k = 0; k < Nr; ++k) {
            double delta = d[t] * q[k] / dq / h2.v[base + k];
            psi.v[base + k] -= delta;
            corr = std::max(corr, std::abs(delta));
        }
    }
    return corr;
}

ChartInverse boundary_chart_inverse(const ScalarField& psi, const Alg& A, const Alg& B, int anchored_face,
                                    const ChartInverseOptions& opt) {
    if (all_zero(psi)) {
        ChartInverse r;
        r.alpha = make_oneform(psi.chart);
        r.beta = make_oneform(psi.chart);
        r.F = make_scalar(psi.chart);
        r.G = make_scalar(psi.chart);
        r.phi = make_scalar(psi.chart);
        return r;
    }
    return boundary_chart_inverse(psi, A, B, window_for_support(psi, anchored_face), opt);
}

ChartInverse boundary_chart_inverse(const ScalarField& psi, const Alg& A, const Alg& B, const ChartWindow& w,
                                    const ChartInverseOptions& opt) {
    const ChartPtr& cp = psi.chart;
    const Chart& c = *cp;
    const int n = c.n, na = n - 1, ia = n - 2;
    if (n < 2) throw Error(ErrorKind::BadGeometry, "chart inverse needs n >= 2");
    if (!is_type_b(c)) throw Error(ErrorKind::NotTypeB, c.describe());
    ChartInverse r;
    r.window = w;
    const AxisWindow& nw = w.axes[na];
    if (nw.role == AxisRole::anchored) {
        auto d = compatibility_defect(psi, nw.face);
        for (double x : d) r.compatibility_defect = std::max(r.compatibility_defect, std::abs(x));
        ScalarField q = hb2(cp);
        double scale = 0.0;
        for (int node = 0; node < c.nodes; ++node) scale = std::max(scale, std::abs(q.v[node] * psi.v[node]));
        scale /= c.h[na];
        if (opt.check_compatibility && r.compatibility_defect > opt.compatibility_tol * scale)
            throw Error(ErrorKind::IncompatibleBoundaryData,
                        "discrete compatibility defect " + std::to_string(r.compatibility_defect) + " against scale " +
                            std::to_string(scale));
    }
    BumpKit kit = BumpKit::make(cp, w);

    // phi = -I eta + h^nn b^2 psi
    ScalarField q = hb2(cp);
    for (int node = 0; node < c.nodes; ++node) q.v[node] *= psi.v[node];
    const int s_int = c.stride[ia], N_int = c.N[ia];
    r.phi = make_scalar(cp);
    r.F = make_scalar(cp);
    const AxisWindow& iw = w.axes[ia];
    // line order by increasing window coordinate
    std::vector<int> order(N_int);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        return window_coordinate(c, ia, iw, x) < window_coordinate(c, ia, iw, y);
    });
    const double split = 0.5 * (iw.g[2] + iw.g[3]);
    const std::vector<double> cw = cumulative_weights(c.fd_order);
    const int k = c.fd_order / 2;
    std::vector<double> line(N_int), inc(N_int), FL(N_int), FR(N_int);
    for (int node = 0; node < c.nodes; ++node) {
        if (c.index_along(node, ia) != 0) continue;
        // node is the start of a line along the integration axis
        double I = 0.0;
        for (int i = 0; i < N_int; ++i) I += c.h[ia] * q.v[node + i * s_int];
        for (int j = 0; j < N_int; ++j) {
            int i = order[j];
            line[j] = -I * kit.eta[i] + q.v[node + i * s_int];
            r.phi.v[node + i * s_int] = line[j];
        }
        for (int j = 0; j < N_int; ++j) {
            double s = 0.0;
            for (int p = 0; p < 2 * k; ++p) {
                int jj = ((j + p - (k - 1)) % N_int + N_int) % N_int;
                s += cw[p] * line[jj];
            }
            inc[j] = c.h[ia] * s;  // integral from position j to j + 1
        }
        FL[0] = 0.0;
        for (int j = 1; j < N_int; ++j) FL[j] = FL[j - 1] + inc[j - 1];
        FR[N_int - 1] = 0.0;
        for (int j = N_int - 2; j >= 0; --j) FR[j] = FR[j + 1] - inc[j];
        for (int j = 0; j < N_int; ++j) {
            int i = order[j];
            double x = window_coordinate(c, ia, iw, i);
            r.F.v[node + i * s_int] = x < split ? FL[j] : FR[j];
        }
    }
    r.G = kit.G();
    r.alpha = lemma_codiff_closed(r.F, A);
    r.beta = lemma_codiff_closed(r.G, B);

    ScalarField Fn = flat_d_axis(r.F, na), Gn = flat_d_axis(r.G, na);
    for (int node = 0; node < c.nodes; ++node) r.fn_gn = std::max(r.fn_gn, std::abs(Fn.v[node] * Gn.v[node]));
    // supp F inside the window box
    for (int node = 0; node < c.nodes && r.f_support_ok; ++node) {
        if (r.F.v[node] == 0.0) continue;
        for (int a = 0; a < n; ++a) {
            const AxisWindow& aw = w.axes[a];
            double x = window_coordinate(c, a, aw, c.index_along(node, a));
            bool inside = true;
            switch (aw.role) {
                case AxisRole::integrate: inside = x > aw.g[0] && x < aw.g[4]; break;
                case AxisRole::plateau: inside = x > aw.g[3] && x < aw.g[4]; break;
                case AxisRole::anchored: inside = x < aw.g[4]; break;
            }
            if (!inside) r.f_support_ok = false;
        }
    }
    return r;
}

ScalarField compatible_profile(const ChartPtr& cp, int face, const std::vector<double>& tangential, int variant) {
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na];
    if (static_cast<int>(tangential.size()) != c.tangential_count())
        throw Error(ErrorKind::RankMismatch, "tangential factor has the wrong length");
    const double T = thickness(c);
    const double quad[3] = {0.0, 1.5, -2.0};
    const double kq = quad[((variant % 3) + 3) % 3] / (T * T);
    const double y0 = 0.15 * T, y1 = 0.3 * T;
    std::vector<double> r0(Nr), r1(Nr);
    for (int k = 0; k < Nr; ++k) {
        double y = face_distance(c, face, k);
        double chi = 1.0 - bump::step(y, y0, y1);
        r0[k] = (1.0 + kq * y * y) * chi;
        r1[k] = y * chi;
    }
    ScalarField h2 = hb2(cp);
    ScalarField psi = make_scalar(cp);
    std::vector<double> a0(Nr), a1(Nr);
    const int bk = face == 0 ? 0 : Nr - 1;
    for (int t = 0; t < c.tangential_count(); ++t) {
        const int base = t * Nr;
        for (int k = 0; k < Nr; ++k) {
            a0[k] = h2.v[base + k] * r0[k];
            a1[k] = h2.v[base + k] * r1[k];
        }
        double c1 = -c.derivative_at(na, a0.data(), bk) / c.derivative_at(na, a1.data(), bk);
        for (int k = 0; k < Nr; ++k) psi.v[base + k] = tangential[t] * (r0[k] + c1 * r1[k]);
    }
    return psi;
}

ScalarField compatible_profile(const ChartPtr& cp, int face, double center, double half_width, int variant) {
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na];
    std::vector<double> tb(c.tangential_count(), 1.0);
    for (int t = 0; t < c.tangential_count(); ++t)
        for (int a = 0; a < na; ++a) {
            double x = c.coord(a, c.index_along(t * Nr, a));
            tb[t] *= bump::bump(std::remainder(x - center, period(c, a)), 0.0, half_width);
        }
    return compatible_profile(cp, face, tb, variant);
}

KernelProjection kernel_project(const Section& g) {
    const ChartPtr& cp = g.chart;
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na], T = c.tangential_count(), nb = 2 * T;
    Connection flat = Connection::flat(cp);
    KernelProjection out;
    out.g = g;
    BoundaryField d = boundary_operator_T(g, flat);
    out.before = d.max_abs();
    // layer w(y) = (y/h)^2 cut off within a few cells of the face
    const double h = c.h[na];
    const double l0 = (c.fd_order + 2) * h, l1 = 2.0 * l0 + 2.0 * h;
    if (l1 >= 0.5 * thickness(c)) throw Error(ErrorKind::WindowTooSmall, "grid too coarse for the kernel layer");
    std::vector<double> w(Nr);
    for (int k = 0; k < Nr; ++k) {
        double y = face_distance(c, 0, k);
        w[k] = (y / h) * (y / h) * (1.0 - bump::step(y, l0, l1));
    }
    auto layer = [&](int b) {
        const int face = b / T, t = b % T;
        ScalarField s = make_scalar(cp);
        for (int k = 0; k < Nr; ++k) s.v[t * Nr + (face == 0 ? k : Nr - 1 - k)] = w[k];
        return s;
    };
    Eigen::MatrixXd M(nb, nb);
    for (int b = 0; b < nb; ++b) {
        BoundaryField col = boundary_operator_T(times(layer(b), Alg::basis(0)), flat);
        for (int q = 0; q < nb; ++q) M(q, b) = col.v[q][0];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    Eigen::MatrixXd rhs(nb, 3);
    for (int q = 0; q < nb; ++q)
        for (int k = 0; k < 3; ++k) rhs(q, k) = -d.v[q][k];
    Eigen::MatrixXd coef = lu.solve(rhs);
    Section corr = make_section(cp);
    for (int b = 0; b < nb; ++b) {
        ScalarField s = layer(b);
        for (int node = 0; node < c.nodes; ++node)
            if (s.v[node] != 0.0)
                for (int k = 0; k < 3; ++k) corr.v[node][k] += coef(b, k) * s.v[node];
    }
    out.correction = corr.max_abs();
    out.g += corr;
    out.after = boundary_operator_T(out.g, flat).max_abs();
    return out;
}

Section kernel_section(const ChartPtr& cp, std::uint64_t seed) {
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na];
    const double T = thickness(c), pi = 3.14159265358979323846;
    Connection flat = Connection::flat(cp);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Section g = make_section(cp);
    for (int k = 0; k < 3; ++k) {
        std::vector<double> tau(c.tangential_count(), 1.0);
        for (int a = 0; a < na; ++a) {
            const int m = 1 + static_cast<int>(U(rng) * 2.0);
            const double ph = 2.0 * pi * U(rng), P = period(c, a);
            for (int t = 0; t < c.tangential_count(); ++t) {
                double x = c.coord(a, c.index_along(t * Nr, a));
                tau[t] *= std::cos(2.0 * pi * m * (x - c.lo[a]) / P + ph);
            }
        }
        const double slope = U(rng) - 0.5;
        Section shape[3] = {make_section(cp), make_section(cp), make_section(cp)};
        for (int node = 0; node < c.nodes; ++node) {
            double xi = (c.coord(na, node % Nr) - c.lo[na]) / T, t = tau[node / Nr];
            shape[0].v[node][k] = t * std::sin(pi * xi) * (1.0 + slope * xi);
            shape[1].v[node][k] = t * xi * xi * (1.0 - xi);
            shape[2].v[node][k] = t * xi * (1.0 - xi) * (1.0 - xi);
        }
        BoundaryField b0 = boundary_operator_T(shape[0], flat), b1 = boundary_operator_T(shape[1], flat),
                      b2 = boundary_operator_T(shape[2], flat);
        const int nb = c.boundary_count();
        Eigen::MatrixXd M(nb, 2);
        Eigen::VectorXd r(nb);
        for (int q = 0; q < nb; ++q) {
            M(q, 0) = b1.v[q][k];
            M(q, 1) = b2.v[q][k];
            r[q] = -b0.v[q][k];
        }
        Eigen::VectorXd coef = M.colPivHouseholderQr().solve(r);
        shape[1] *= coef[0];
        shape[2] *= coef[1];
        g += shape[0];
        g += shape[1];
        g += shape[2];
    }
    for (int q = 0; q < c.boundary_count(); ++q) g.v[c.boundary_node(q)] = Alg();
    return g;
}

std::vector<std::vector<double>> periodic_partition(const Chart& c, int axis, int pieces) {
    if (pieces < 1) throw Error(ErrorKind::BadCover, "need at least one piece");
    const int N = c.N[axis];
    std::vector<std::vector<double>> mu(pieces, std::vector<double>(N, 1.0));
    if (pieces == 1) return mu;
    const double P = period(c, axis);
    const double spacing = P / pieces, w = 0.75 * spacing;
    for (int i = 0; i < N; ++i) {
        double x = c.coord(axis, i), total = 0.0;
        for (int k = 0; k < pieces; ++k) {
            double dx = std::remainder(x - (c.lo[axis] + k * spacing), P);
            mu[k][i] = bump::bump(dx, 0.0, w);
            total += mu[k][i];
        }
        if (!(total > 0.0)) throw Error(ErrorKind::BadCover, "partition bumps leave a gap");
        for (int k = 0; k < pieces; ++k) mu[k][i] /= total;
    }
    return mu;
}

namespace {

// all products of per-axis tangential partitions: per piece, per tangential index t
std::vector<std::vector<double>> tangential_pieces(const Chart& c, int pieces) {
    const int na = c.n - 1, Nr = c.N[na], T = c.tangential_count();
    std::vector<std::vector<std::vector<double>>> per_axis;
    for (int a = 0; a < na; ++a) per_axis.push_back(periodic_partition(c, a, pieces));
    std::vector<std::vector<double>> out;
    std::vector<int> sel(na, 0);
    while (true) {
        std::vector<double> m(T, 1.0);
        for (int t = 0; t < T; ++t)
            for (int a = 0; a < na; ++a) m[t] *= per_axis[a][sel[a]][c.index_along(t * Nr, a)];
        out.push_back(std::move(m));
        int a = 0;
        while (a < na && ++sel[a] == pieces) sel[a++] = 0;
        if (a == na) break;
    }
    return out;
}

void collar_defaults(const Chart& c, double& c0, double& c1) {
    const int na = c.n - 1;
    const double T = thickness(c), h = c.h[na];
    if (c0 < 0.0) c0 = std::max(0.15 * T, (2 * c.fd_order + 5) * h);
    if (c1 < 0.0) c1 = std::max(0.3 * T, c0 + 4.0 * h);
    if (!(c0 > 0.0 && c1 > c0 && c1 < 0.5 * T))
        throw Error(ErrorKind::BadCover, "collar widths must satisfy 0 < c0 < c1 < half the normal extent");
}

std::pair<Alg, Alg> basis_commutator(int k) {
    auto p = commutator_decompose(Alg::basis(k));
    if (p.size() != 1) throw Error(ErrorKind::RankMismatch, "basis element is not a single commutator");
    return p[0];
}

void form_stats(const FormPair& p, double& codiff, double& dbc) {
    Connection flat = Connection::flat(p.alpha.chart);
    codiff = std::max({codiff, codiff_A(p.alpha, flat).max_abs(), codiff_A(p.beta, flat).max_abs()});
    dbc = std::max({dbc, check_dbc(p.alpha, 0.0).violation, check_dbc(p.beta, 0.0).violation});
}

}  // namespace

PartitionOfUnity make_partition_of_unity(const ChartPtr& cp, int pieces, double collar0, double collar1) {
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na];
    PartitionOfUnity pu;
    collar_defaults(c, collar0, collar1);
    pu.collar0 = collar0;
    pu.collar1 = collar1;
    auto mu = tangential_pieces(c, pieces);
    pu.remainder = make_scalar(cp, 1.0);
    for (int face = 0; face < 2; ++face) {
        std::vector<double> col(Nr);
        for (int k = 0; k < Nr; ++k) col[k] = 1.0 - bump::step(face_distance(c, face, k), collar0, collar1);
        for (const auto& m : mu) {
            ScalarField l = make_scalar(cp);
            for (int node = 0; node < c.nodes; ++node) l.v[node] = m[node / Nr] * col[node % Nr];
            for (int node = 0; node < c.nodes; ++node) pu.remainder.v[node] -= l.v[node];
            pu.lambda.push_back(std::move(l));
            pu.face.push_back(face);
        }
    }
    // exact zeros of the remainder on the collar
    for (int node = 0; node < c.nodes; ++node) {
        int k = node % Nr;
        if (std::min(face_distance(c, 0, k), face_distance(c, 1, k)) <= collar0) pu.remainder.v[node] = 0.0;
    }
    return pu;
}

Section reconstruct_brackets(const std::vector<FormPair>& pairs, const ChartPtr& c) {
    Section s = make_section(c);
    for (const auto& p : pairs) s += bracket_dot(p.alpha, p.beta);
    return s;
}

InteriorInverse interior_inverse(const Section& f, int pieces) {
    const ChartPtr& cp = f.chart;
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na];
    InteriorInverse out;
    for (int node = 0; node < c.nodes; ++node) {
        int k = node % Nr;
        if ((k < 2 || k > Nr - 3) && f.v[node].max_abs() != 0.0)
            throw Error(ErrorKind::SupportTouchesBoundary, "interior target is nonzero within two cells of the boundary");
    }
    if (f.max_abs() == 0.0) return out;
    auto mu = tangential_pieces(c, pieces);
    for (size_t p = 0; p < mu.size(); ++p) {
        bool used = false;
        for (int comp = 0; comp < 3; ++comp) {
            ScalarField psi = make_scalar(cp);
            for (int node = 0; node < c.nodes; ++node) psi.v[node] = mu[p][node / Nr] * f.v[node][comp];
            if (all_zero(psi)) continue;
            auto [A, B] = basis_commutator(comp);
            ChartInverse ci = boundary_chart_inverse(psi, A, B, -1);
            FormPair fp{std::move(ci.alpha), std::move(ci.beta),
                        "cube " + std::to_string(p) + " component " + std::to_string(comp)};
            form_stats(fp, out.max_codiff, out.max_dbc);
            out.pairs.push_back(std::move(fp));
            used = true;
        }
        out.cubes += used ? 1 : 0;
    }
    Section rec = reconstruct_brackets(out.pairs, cp);
    rec -= f;
    out.residual = rec.max_abs();
    return out;
}

KernelDecomposition kernel_decompose(const Section& f, const KernelOptions& opt) {
    const ChartPtr& cp = f.chart;
    const Chart& c = *cp;
    const int na = c.n - 1;
    KernelDecomposition out;
    out.ttilde = boundary_operator_Ttilde(f).max_abs();
    if (f.max_abs() == 0.0) return out;
    if (opt.kernel_tol >= 0.0) {
        double scale = f.max_abs() / c.h[na], worst = 0.0;
        for (int comp = 0; comp < 3; ++comp) {
            ScalarField s = component(f, comp);
            for (int face = 0; face < 2; ++face)
                for (double d : compatibility_defect(s, face)) worst = std::max(worst, std::abs(d));
        }
        ScalarField h2 = hb2(cp);
        double hmax = *std::max_element(h2.v.begin(), h2.v.end());
        if (worst > opt.kernel_tol * scale * hmax)
            throw Error(ErrorKind::KernelConditionViolated,
                        "boundary kernel defect " + std::to_string(worst) + " (|T0~ f| = " + std::to_string(out.ttilde) + ")");
    }
    PartitionOfUnity pu = make_partition_of_unity(cp, opt.pieces);
    ChartInverseOptions cio;
    cio.check_compatibility = !opt.project && opt.kernel_tol >= 0.0;
    for (size_t p = 0; p < pu.lambda.size(); ++p) {
        for (int comp = 0; comp < 3; ++comp) {
            ScalarField psi = make_scalar(cp);
            for (int node = 0; node < c.nodes; ++node) psi.v[node] = pu.lambda[p].v[node] * f.v[node][comp];
            if (all_zero(psi)) continue;
            if (opt.project) out.correction = std::max(out.correction, project_compatible(psi, pu.face[p], pu.collar0));
            auto [A, B] = basis_commutator(comp);
            ChartInverse ci = boundary_chart_inverse(psi, A, B, pu.face[p], cio);
            FormPair fp{std::move(ci.alpha), std::move(ci.beta),
                        "collar " + std::to_string(p) + " face " + std::to_string(pu.face[p]) + " component " +
                            std::to_string(comp)};
            form_stats(fp, out.max_codiff, out.max_dbc);
            out.pairs.push_back(std::move(fp));
            ++out.boundary_pairs;
        }
    }
    Section rest = times(pu.remainder, f);
    InteriorInverse ii = interior_inverse(rest, opt.interior_pieces);
    out.interior_pairs = static_cast<int>(ii.pairs.size());
    out.max_codiff = std::max(out.max_codiff, ii.max_codiff);
    out.max_dbc = std::max(out.max_dbc, ii.max_dbc);
    for (auto& p : ii.pairs) out.pairs.push_back(std::move(p));
    Section rec = reconstruct_brackets(out.pairs, cp);
    rec -= f;
    out.residual = rec.max_abs();
    return out;
}

GeneratorResult generator_for_boundary_data(const BoundaryField& F, const GeneratorOptions& opt) {
    const ChartPtr& cp = F.chart;
    const Chart& c = *cp;
    const int n = c.n, na = n - 1, Nr = c.N[na], T = c.tangential_count();
    GeneratorResult out;
    out.sum = make_section(cp);
    const double Fn = F.max_abs();
    if (Fn == 0.0) return out;
    Connection flat = Connection::flat(cp);
    GreenSolve gs(flat);
    auto green_scalar = [&](const ScalarField& s) { return component(gs.solve(times(s, Alg::basis(0))), 0); };

    // nonnegative interior source
    const double Tn = thickness(c), mid = c.lo[na] + 0.5 * Tn;
    ScalarField phi = make_scalar(cp);
    for (int node = 0; node < c.nodes; ++node) {
        double v = bump::bump(c.coord(na, node % Nr), mid, 0.3 * Tn);
        if (opt.source == GeneratorOptions::Source::centered)
            for (int a = 0; a < na; ++a) {
                double x = c.coord(a, c.index_along(node, a));
                double P = period(c, a);
                v *= bump::bump(std::remainder(x - (c.lo[a] + 0.5 * P), P), 0.0, 0.25 * P);
            }
        phi.v[node] = v;
    }
    ScalarField Gphi = green_scalar(phi);
    BoundaryScalar dG = normal_derivative(Gphi);
    out.hopf_min = *std::min_element(dG.v.begin(), dG.v.end());
    out.hopf_max = *std::max_element(dG.v.begin(), dG.v.end());
    if (!(out.hopf_min > 0.0))
        throw Error(ErrorKind::HopfViolation, "d(G phi)(nu) has minimum " + std::to_string(out.hopf_min));

    BoundaryScalar H = is_type_a(c) ? mean_curvature_typeA(cp) : mean_curvature_typeB(cp);
    auto mu = tangential_pieces(c, opt.pieces);
    const double depth = opt.extension_depth * Tn;
    for (int comp = 0; comp < 3; ++comp) {
        bool any = false;
        for (int b = 0; b < 2 * T; ++b) any = any || F.v[b][comp] != 0.0;
        if (!any) continue;
        auto [X, C] = basis_commutator(comp);  // [X, C] = e_comp
        auto ab = commutator_decompose(X);     // sum [A, B] = X
        Alg AB = reconstruct(ab);
        ScalarField ft = make_scalar(cp);
        for (int face = 0; face < 2; ++face)
            for (const auto& m : mu)
                for (int t = 0; t < T; ++t) {
                    const int b = face * T + t;
                    double fk = m[t] * F.v[b][comp] / (3.0 * dG.v[b]);
                    if (fk == 0.0) continue;
                    for (int k = 0; k < Nr; ++k) {
                        double y = face_distance(c, face, k);
                        double e = 1.0 - bump::step(y, 0.25 * depth, 0.5 * depth);
                        if (e == 0.0) continue;
                        ft.v[t * Nr + k] += fk * e * std::exp(-2.0 * (n - 1) * H.v[b] * y);
                    }
                }
        ScalarField Gf = green_scalar(ft);
        SectionPair sp{times(Gf, AB), times(Gphi, C)};
        out.sum += bracket(sp.g, sp.h);
        out.pairs.push_back(std::move(sp));
    }
    BoundaryField Tsum = boundary_operator_T(out.sum, flat);
    Tsum -= F;
    out.residual = Tsum.max_abs() / Fn;
    return out;
}

DecompositionCertificate full_decompose(const Section& g, const DecomposeOptions& opt) {
    const ChartPtr& cp = g.chart;
    DecompositionCertificate cert;
    cert.chart = cp->describe();
    if (g.max_abs() == 0.0) return cert;
    Connection flat = Connection::flat(cp);
    BoundaryField u = boundary_operator_T(g, flat);
    const double un = u.max_abs();
    GeneratorResult gen = generator_for_boundary_data(u, opt.generator);
    cert.generator_residual = gen.residual;
    cert.hopf_min = gen.hopf_min;
    cert.commutator_pairs = gen.pairs;
    Section rest = g - gen.sum;
    cert.boundary_stage = un > 0.0 ? boundary_operator_T(rest, flat).max_abs() / un : 0.0;
    Section q = laplacian_A(rest, flat, Codiff::pointwise, false);
    KernelDecomposition kd = kernel_decompose(q, opt.kernel);
    cert.correction = kd.correction;
    Section S = reconstruct_brackets(kd.pairs, cp);
    cert.horizontal_pairs = std::move(kd.pairs);
    const double qn = q.max_abs();
    cert.kernel_stage = qn > 0.0 ? kd.residual / qn : kd.residual;
    GreenSolve gs(flat);
    Section GS = gs.solve(S);
    Section res = rest - GS;
    cert.residual = res.max_abs() / g.max_abs();
    cert.boundary_residual = trace_boundary(res).max_abs() / g.max_abs();
    return cert;
}

BracketIdentity bracket_identity_check(const Section& g1, const Section& g2) {
    require_same_chart(g1.chart, g2.chart);
    const ChartPtr& cp = g1.chart;
    const Chart& c = *cp;
    Connection flat = Connection::flat(cp);
    BracketIdentity r;
    Section b12 = bracket(g1, g2);
    Section L1 = laplacian_A(g1, flat, Codiff::pointwise, false);
    Section L2 = laplacian_A(g2, flat, Codiff::pointwise, false);
    Section L12 = laplacian_A(b12, flat, Codiff::pointwise, false);
    OneForm d1 = flat_d(g1), d2 = flat_d(g2);
    Section prod = bracket(L1, g2) + bracket(g1, L2) - 2.0 * bracket_dot(d1, d2);
    Section diff = L12 - prod;
    r.interior = interior_max(diff);
    r.interior_scale = std::max(interior_max(L12), interior_max(prod));

    BoundaryField lhs = boundary_operator_from_laplacian(L12, flat);
    BoundaryField t1 = trace_boundary(L1), t2 = trace_boundary(L2);
    BoundaryField n1 = normal_component(d1), n2 = normal_component(d2);
    BoundaryField rhs{cp, std::vector<Alg>(c.boundary_count())};
    for (int b = 0; b < c.boundary_count(); ++b)
        rhs.v[b] = 3.0 * (gb::bracket(t1.v[b], n2.v[b]) + gb::bracket(n1.v[b], t2.v[b]));
    BoundaryField dn = normal_component(d_A(L12, flat));
    r.boundary_scale = std::max({lhs.max_abs(), rhs.max_abs(), dn.max_abs()});
    lhs -= rhs;
    r.boundary = lhs.max_abs();
    for (const Section* g : {&g1, &g2}) {
        double tn = boundary_operator_T(*g, flat, false).max_abs();
        double s = laplacian_A(*g, flat, Codiff::pointwise, false).max_abs() / c.h[c.n - 1];
        r.kernel_defect = std::max(r.kernel_defect, s > 0.0 ? tn / s : tn);
    }
    return r;
}

}  // namespace gb
