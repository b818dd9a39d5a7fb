#include "gaugebench/fields.hpp"

#include <cmath>
#include <functional>
#include <cstdio>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

namespace gb {

const std::vector<std::vector<int>>& multi_indices(int n, int p) {
    static std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, p);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(cur.size()) == p) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < n; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return cache.emplace(key, std::move(out)).first->second;
}

int multi_index_position(int n, const std::vector<int>& sorted) {
    const auto& all = multi_indices(n, static_cast<int>(sorted.size()));
    for (size_t i = 0; i < all.size(); ++i)
        if (all[i] == sorted) return static_cast<int>(i);
    return -1;
}

Form::Form(ChartPtr c, int p) : chart(std::move(c)), degree(p) {
    if (p < 0 || p > chart->n) throw Error(ErrorKind::UnsupportedDegree, "degree " + std::to_string(p));
    v.assign(multi_indices(chart->n, p).size() * static_cast<size_t>(chart->nodes), Alg{});
}

void require_same_chart(const ChartPtr& a, const ChartPtr& b) {
    if (a.get() != b.get()) throw Error(ErrorKind::ChartMismatch, "fields live on different charts");
}

static void require_same_shape(const Form& a, const Form& b) {
    require_same_chart(a.chart, b.chart);
    if (a.degree != b.degree) throw Error(ErrorKind::RankMismatch, "form degrees differ");
}

Form& Form::operator+=(const Form& o) {
    require_same_shape(*this, o);
    for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
}

Form& Form::operator-=(const Form& o) {
    require_same_shape(*this, o);
    for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
    return *this;
}

Form& Form::operator*=(double s) {
    for (auto& x : v) x *= s;
    return *this;
}

double Form::max_abs() const {
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, x.max_abs());
    return m;
}

Form operator+(Form a, const Form& b) { return a += b; }
Form operator-(Form a, const Form& b) { return a -= b; }
Form operator*(double s, Form a) { return a *= s; }

Section make_section(const ChartPtr& c) { return Form(c, 0); }
OneForm make_oneform(const ChartPtr& c) { return Form(c, 1); }

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

ScalarField make_scalar(const ChartPtr& c, double value) {
    return ScalarField{c, std::vector<double>(c->nodes, value)};
}

Section times(const ScalarField& s, const Alg& x) {
    Section f = make_section(s.chart);
    for (int i = 0; i < s.chart->nodes; ++i) f.v[i] = s.v[i] * x;
    return f;
}

Section times(const ScalarField& s, const Section& g) {
    require_same_chart(s.chart, g.chart);
    Section f = g;
    const int nodes = s.chart->nodes;
    for (size_t i = 0; i < f.v.size(); ++i) f.v[i] *= s.v[i % nodes];
    return f;
}

ScalarField component(const Section& f, int k) {
    ScalarField s = make_scalar(f.chart);
    for (int i = 0; i < f.chart->nodes; ++i) s.v[i] = f.v[i][k];
    return s;
}

double BoundaryField::max_abs() const {
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, x.max_abs());
    return m;
}

BoundaryField& BoundaryField::operator-=(const BoundaryField& o) {
    require_same_chart(chart, o.chart);
    for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
    return *this;
}

OneForm flat_d(const Section& f) {
    if (f.degree != 0) throw Error(ErrorKind::RankMismatch, "flat_d expects a section");
    const Chart& c = *f.chart;
    OneForm w = make_oneform(f.chart);
    for (int ax = 0; ax < c.n; ++ax) c.differentiate(ax, f.comp(0), w.comp(ax));
    return w;
}

ScalarField flat_d_axis(const ScalarField& f, int axis) {
    ScalarField out = make_scalar(f.chart);
    f.chart->differentiate(axis, f.v.data(), out.v.data());
    return out;
}

BoundaryField trace_boundary(const Section& f) {
    if (f.degree != 0) throw Error(ErrorKind::RankMismatch, "trace_boundary expects a section");
    const Chart& c = *f.chart;
    BoundaryField b{f.chart, std::vector<Alg>(c.boundary_count())};
    for (int q = 0; q < c.boundary_count(); ++q) b.v[q] = f.v[c.boundary_node(q)];
    return b;
}

BoundaryScalar trace_boundary(const ScalarField& f) {
    const Chart& c = *f.chart;
    BoundaryScalar b{f.chart, std::vector<double>(c.boundary_count())};
    for (int q = 0; q < c.boundary_count(); ++q) b.v[q] = f.v[c.boundary_node(q)];
    return b;
}

BoundaryField normal_component(const OneForm& w) {
    if (w.degree != 1) throw Error(ErrorKind::RankMismatch, "normal_component expects a one-form");
    const Chart& c = *w.chart;
    const int ax = c.n - 1;
    BoundaryField b{w.chart, std::vector<Alg>(c.boundary_count())};
    for (int q = 0; q < c.boundary_count(); ++q) {
        int node = c.boundary_node(q);
        double s = c.inward_sign(c.face_of(q)) / std::sqrt(c.g(node, ax, ax));
        b.v[q] = s * w.at(ax, node);
    }
    return b;
}

BoundaryScalar normal_derivative(const ScalarField& f) {
    const Chart& c = *f.chart;
    const int ax = c.n - 1;
    BoundaryScalar b{f.chart, std::vector<double>(c.boundary_count())};
    for (int q = 0; q < c.boundary_count(); ++q) {
        int node = c.boundary_node(q);
        double s = c.inward_sign(c.face_of(q)) / std::sqrt(c.g(node, ax, ax));
        b.v[q] = s * c.derivative_at(ax, f.v.data(), node);
    }
    return b;
}

namespace {

// determinant of the inverse-metric minor with rows I and columns K
double inv_minor(const Chart& c, int node, const std::vector<int>& I, const std::vector<int>& K) {
    const size_t p = I.size();
    if (p == 0) return 1.0;
    if (p == 1) return c.ginv(node, I[0], K[0]);
    if (p == 2)
        return c.ginv(node, I[0], K[0]) * c.ginv(node, I[1], K[1]) -
               c.ginv(node, I[0], K[1]) * c.ginv(node, I[1], K[0]);
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = c.ginv(node, I[i], K[j]);
    return m.determinant();
}

}  // namespace

double pointwise_inner(const Form& u, const Form& v, int node) {
    const Chart& c = *u.chart;
    const auto& mi = multi_indices(c.n, u.degree);
    double s = 0.0;
    for (size_t I = 0; I < mi.size(); ++I)
        for (size_t K = 0; K < mi.size(); ++K) {
            double gik = (I == K || u.degree > 0) ? inv_minor(c, node, mi[I], mi[K]) : 0.0;
            if (gik == 0.0) continue;
            s += gik * trace_inner(u.at(static_cast<int>(I), node), v.at(static_cast<int>(K), node));
        }
    return s;
}

double l2_inner(const Form& u, const Form& v) {
    require_same_shape(u, v);
    const Chart& c = *u.chart;
    double s = 0.0;
    for (int node = 0; node < c.nodes; ++node)
        s += c.weight[node] * c.volume[node] * pointwise_inner(u, v, node);
    return s;
}

double l2_norm(const Form& u) { return std::sqrt(std::max(0.0, l2_inner(u, u))); }

DbcCheck check_dbc(const Form& w, double tol) {
    const Chart& c = *w.chart;
    const auto& mi = multi_indices(c.n, w.degree);
    DbcCheck r;
    for (int q = 0; q < c.boundary_count(); ++q) {
        int node = c.boundary_node(q);
        for (size_t I = 0; I < mi.size(); ++I) {
            bool tangential = true;
            for (int ax : mi[I]) tangential = tangential && ax != c.n - 1;
            if (!tangential) continue;
            r.violation = std::max(r.violation, w.at(static_cast<int>(I), node).norm());
        }
    }
    r.ok = r.violation <= tol;
    return r;
}

Form random_smooth_field(const ChartPtr& cp, int degree, std::uint64_t seed, bool dbc,
                         const RandomFieldOptions& opt) {
    const Chart& c = *cp;
    Form f(cp, degree);
    const auto& mi = multi_indices(c.n, degree);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const int nt = c.n - 1;
    // enumerate tangential modes (m, parity) per axis
    std::vector<std::vector<std::pair<int, int>>> modes(1);
    for (int ax = 0; ax < nt; ++ax) {
        std::vector<std::vector<std::pair<int, int>>> next;
        for (const auto& m : modes)
            for (int k = 0; k <= opt.modes; ++k)
                for (int par = 0; par < (k == 0 ? 1 : 2); ++par) {
                    auto mm = m;
                    mm.emplace_back(k, par);
                    next.push_back(mm);
                }
        modes = std::move(next);
    }

    std::vector<double> extent(c.n);
    for (int ax = 0; ax < c.n; ++ax)
        extent[ax] = c.periodic[ax] ? c.h[ax] * c.N[ax] : c.h[ax] * (c.N[ax] - 1);

    for (size_t I = 0; I < mi.size(); ++I) {
        bool tangential = true;
        for (int ax : mi[I]) tangential = tangential && ax != c.n - 1;
        const bool vanish = dbc && tangential;
        for (int k = 0; k < 3; ++k) {
            std::vector<double> coef(modes.size() * (opt.degree + 1));
            for (auto& x : coef) x = opt.scale * normal(rng);
            for (int node = 0; node < c.nodes; ++node) {
                Point p = c.point(node);
                double s = 2.0 * (p[c.n - 1] - c.lo[c.n - 1]) / extent[c.n - 1] - 1.0;
                double val = 0.0;
                for (size_t m = 0; m < modes.size(); ++m) {
                    double trig = 1.0;
                    for (int ax = 0; ax < nt; ++ax) {
                        auto [kk, par] = modes[m][ax];
                        double x = p[ax] - c.lo[ax];
                        double arg = (c.periodic[ax] ? 2.0 * M_PI / extent[ax] : M_PI / extent[ax]) * kk * x;
                        trig *= par == 0 ? std::cos(arg) : std::sin(arg);
                    }
                    double poly = 0.0, sp = 1.0;
                    for (int q = 0; q <= opt.degree; ++q) {
                        poly += coef[m * (opt.degree + 1) + q] * sp;
                        sp *= s;
                    }
                    val += trig * poly;
                }
                if (vanish) val *= (1.0 - s * s);
                f.at(static_cast<int>(I), node)[k] = val;
            }
        }
    }
    if (dbc) {
        // exact zeros on boundary nodes for the constrained components
        for (int q = 0; q < c.boundary_count(); ++q) {
            int node = c.boundary_node(q);
            for (size_t I = 0; I < mi.size(); ++I) {
                bool tangential = true;
                for (int ax : mi[I]) tangential = tangential && ax != c.n - 1;
                if (tangential) f.at(static_cast<int>(I), node) = Alg{};
            }
        }
    }
    return f;
}

void dump_form(std::ostream& os, const Form& f, std::uint64_t seed) {
    const Chart& c = *f.chart;
    os << "# gaugebench field dump v1\n";
    os << "chart " << domain_name(c.kind()) << " n " << c.n << " sizes";
    for (int ax = 0; ax < c.n; ++ax) os << ' ' << c.N[ax];
    os << " order " << c.fd_order << "\n";
    os << "rank " << f.degree << " components " << f.ncomp() << " seed " << seed << "\n";
    os << "nodes " << c.nodes << "\n";
    char buf[64];
    for (int node = 0; node < c.nodes; ++node) {
        for (int comp = 0; comp < f.ncomp(); ++comp)
            for (int k = 0; k < 3; ++k) {
                std::snprintf(buf, sizeof buf, "%.17g", f.at(comp, node)[k]);
                os << (comp == 0 && k == 0 ? "" : " ") << buf;
            }
        os << "\n";
    }
}

Form load_form(std::istream& is, const ChartPtr& cp) {
    const Chart& c = *cp;
    std::string line, word;
    auto next_line = [&]() {
        do {
            if (!std::getline(is, line)) throw Error(ErrorKind::IoError, "truncated field dump");
        } while (!line.empty() && line[0] == '#');
    };
    next_line();
    {
        std::istringstream ls(line);
        std::string kind;
        int n = 0;
        ls >> word >> kind >> word >> n >> word;
        if (kind != domain_name(c.kind()) || n != c.n)
            throw Error(ErrorKind::IoError, "dump chart does not match");
        for (int ax = 0; ax < n; ++ax) {
            int Na = 0;
            ls >> Na;
            if (Na != c.N[ax]) throw Error(ErrorKind::IoError, "dump sizes do not match");
        }
    }
    next_line();
    int rank = 0, ncomp = 0;
    {
        std::istringstream ls(line);
        ls >> word >> rank >> word >> ncomp;
    }
    next_line();
    int nodes = 0;
    {
        std::istringstream ls(line);
        ls >> word >> nodes;
    }
    if (nodes != c.nodes) throw Error(ErrorKind::IoError, "dump node count does not match");
    Form f(cp, rank);
    if (f.ncomp() != ncomp) throw Error(ErrorKind::IoError, "dump component count does not match");
    for (int node = 0; node < nodes; ++node) {
        next_line();
        const char* p = line.c_str();
        for (int comp = 0; comp < ncomp; ++comp)
            for (int k = 0; k < 3; ++k) {
                char* end = nullptr;
                f.at(comp, node)[k] = std::strtod(p, &end);
                if (end == p) throw Error(ErrorKind::IoError, "bad number in dump");
                p = end;
            }
    }
    return f;
}

}  // namespace gb
