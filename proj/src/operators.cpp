#include "gaugebench/operators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <random>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/FFT>

namespace gb {

Connection Connection::flat(const ChartPtr& c) { return Connection(make_oneform(c), false); }

Connection::Connection(OneForm perturbation, bool check, double tol)
    : chart(perturbation.chart), eta(std::move(perturbation)) {
    if (eta.degree != 1) throw Error(ErrorKind::RankMismatch, "connection perturbation must be a one-form");
    if (check) {
        auto d = check_dbc(eta, tol);
        if (!d.ok) throw Error(ErrorKind::DbcViolation, "connection perturbation violates DBC by " + std::to_string(d.violation));
    }
}

OneForm d_A(const Section& f, const Connection& A) {
    require_same_chart(f.chart, A.chart);
    OneForm w = flat_d(f);
    const Chart& c = *f.chart;
    for (int i = 0; i < c.n; ++i)
        for (int node = 0; node < c.nodes; ++node) w.at(i, node) += gb::bracket(A.component(i, node), f.v[node]);
    return w;
}

Section bracket_dot(const OneForm& a, const OneForm& b) {
    require_same_chart(a.chart, b.chart);
    if (a.degree != 1 || b.degree != 1) throw Error(ErrorKind::RankMismatch, "bracket_dot expects one-forms");
    const Chart& c = *a.chart;
    Section s = make_section(a.chart);
    for (int node = 0; node < c.nodes; ++node) {
        Alg acc;
        for (int i = 0; i < c.n; ++i)
            for (int j = 0; j < c.n; ++j) {
                double gij = c.ginv(node, i, j);
                if (gij == 0.0) continue;
                acc += gij * gb::bracket(a.at(i, node), b.at(j, node));
            }
        s.v[node] = acc;
    }
    return s;
}

Section bracket(const Section& f, const Section& g) {
    require_same_chart(f.chart, g.chart);
    Section s = make_section(f.chart);
    for (size_t i = 0; i < s.v.size(); ++i) s.v[i] = gb::bracket(f.v[i], g.v[i]);
    return s;
}

namespace {

// out[j] += sum_i w_ij in[i]: transpose of Chart::differentiate
template <class T>
void differentiate_transpose(const Chart& c, int axis, const T* in, T* out) {
    const int s = c.stride[axis];
    const int Na = c.N[axis];
    for (int node = 0; node < c.nodes; ++node) out[node] = T{};
    for (int node = 0; node < c.nodes; ++node) {
        const int i = (node / s) % Na;
        const int base = node - i * s;
        const StencilRow& r = c.deriv[axis][i];
        for (size_t q = 0; q < r.idx.size(); ++q) out[base + r.idx[q] * s] += r.w[q] * in[node];
    }
}

}  // namespace

Section codiff_A(const OneForm& w, const Connection& A, Codiff form) {
    require_same_chart(w.chart, A.chart);
    if (w.degree != 1) throw Error(ErrorKind::RankMismatch, "codiff_A expects a one-form");
    const Chart& c = *w.chart;
    Section out = make_section(w.chart);
    std::vector<Alg> mu(c.nodes), tmp(c.nodes);
    for (int i = 0; i < c.n; ++i) {
        for (int node = 0; node < c.nodes; ++node) {
            Alg acc;
            for (int j = 0; j < c.n; ++j) {
                double gij = c.ginv(node, i, j);
                if (gij != 0.0) acc += gij * w.at(j, node);
            }
            double scale = c.volume[node] * (form == Codiff::adjoint ? c.weight[node] : 1.0);
            mu[node] = scale * acc;
        }
        if (form == Codiff::pointwise) {
            c.differentiate(i, mu.data(), tmp.data());
            for (int node = 0; node < c.nodes; ++node) out.v[node] -= (1.0 / c.volume[node]) * tmp[node];
        } else {
            differentiate_transpose(c, i, mu.data(), tmp.data());
            for (int node = 0; node < c.nodes; ++node)
                out.v[node] += (1.0 / (c.volume[node] * c.weight[node])) * tmp[node];
        }
    }
    Section ad = bracket_dot(A.eta, w);
    out -= ad;
    if (form == Codiff::adjoint)
        for (int q = 0; q < c.boundary_count(); ++q) out.v[c.boundary_node(q)] = Alg{};
    return out;
}

double interior_max(const Section& f) {
    const Chart& c = *f.chart;
    double m = 0.0;
    for (int node = 0; node < c.nodes; ++node)
        if (!c.is_boundary(node))
            for (int comp = 0; comp < f.ncomp(); ++comp) m = std::max(m, f.at(comp, node).max_abs());
    return m;
}

Section laplacian_A(const Section& f, const Connection& A, Codiff form, bool require_dbc) {
    if (require_dbc) {
        auto d = check_dbc(f, 1e-12 * std::max(1.0, f.max_abs()));
        if (!d.ok) throw Error(ErrorKind::DbcViolation, "laplacian_A input violates DBC by " + std::to_string(d.violation));
    }
    return codiff_A(d_A(f, A), A, form);
}

Section laplacian_expansion(const Section& f, const Connection& A) {
    Connection flat = Connection::flat(f.chart);
    OneForm df = flat_d(f);
    Section out = codiff_A(df, flat);
    Section d0h = codiff_A(A.eta, flat);
    out += bracket(d0h, f);
    const Chart& c = *f.chart;
    OneForm hf = make_oneform(f.chart);
    for (int i = 0; i < c.n; ++i)
        for (int node = 0; node < c.nodes; ++node) hf.at(i, node) = gb::bracket(A.component(i, node), f.v[node]);
    out -= bracket_dot(A.eta, hf);
    out -= 2.0 * bracket_dot(A.eta, df);
    return out;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

SpMat axis_matrix(const Chart& c, int axis) {
    std::vector<Trip> t;
    const int s = c.stride[axis];
    for (int node = 0; node < c.nodes; ++node) {
        const int i = (node / s) % c.N[axis];
        const int base = node - i * s;
        const StencilRow& r = c.deriv[axis][i];
        for (size_t q = 0; q < r.idx.size(); ++q)
            for (int k = 0; k < 3; ++k) t.emplace_back(3 * node + k, 3 * (base + r.idx[q] * s) + k, r.w[q]);
    }
    SpMat m(3 * c.nodes, 3 * c.nodes);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

SpMat diag_matrix(const std::vector<double>& d) {
    SpMat m(3 * d.size(), 3 * d.size());
    std::vector<Trip> t;
    for (size_t node = 0; node < d.size(); ++node)
        for (int k = 0; k < 3; ++k) t.emplace_back(3 * node + k, 3 * node + k, d[node]);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

SpMat ad_blocks(const Connection& A, int axis) {
    const Chart& c = *A.chart;
    std::vector<Trip> t;
    for (int node = 0; node < c.nodes; ++node) {
        const Alg& x = A.component(axis, node);
        if (x.max_abs() == 0.0) continue;
        Eigen::Matrix3d m = ad_matrix(x);
        for (int r = 0; r < 3; ++r)
            for (int q = 0; q < 3; ++q)
                if (m(r, q) != 0.0) t.emplace_back(3 * node + r, 3 * node + q, m(r, q));
    }
    SpMat m(3 * c.nodes, 3 * c.nodes);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

std::vector<int> interior_nodes(const Chart& c) {
    std::vector<int> out;
    for (int node = 0; node < c.nodes; ++node)
        if (!c.is_boundary(node)) out.push_back(node);
    return out;
}

}  // namespace

SpMat assemble_laplacian(const Connection& A, bool interior_only) {
    const Chart& c = *A.chart;
    const int n = c.n;
    std::vector<SpMat> D(n), ad(n), DA(n);
    for (int i = 0; i < n; ++i) {
        D[i] = axis_matrix(c, i);
        ad[i] = ad_blocks(A, i);
        DA[i] = D[i] + ad[i];
    }
    std::vector<double> inv_a(c.nodes);
    for (int node = 0; node < c.nodes; ++node) inv_a[node] = 1.0 / c.volume[node];
    SpMat inva = diag_matrix(inv_a);
    SpMat L(3 * c.nodes, 3 * c.nodes);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            std::vector<double> agij(c.nodes), gij(c.nodes);
            bool any = false;
            for (int node = 0; node < c.nodes; ++node) {
                gij[node] = c.ginv(node, i, j);
                agij[node] = c.volume[node] * gij[node];
                any = any || gij[node] != 0.0;
            }
            if (!any) continue;
            SpMat term = inva * D[i] * diag_matrix(agij) * DA[j];
            SpMat brk = diag_matrix(gij) * ad[i] * DA[j];
            L -= term;
            L -= brk;
        }
    L.prune(0.0);
    if (!interior_only) return L;
    std::vector<int> inner = interior_nodes(c);
    std::vector<int> pos(c.nodes, -1);
    for (size_t q = 0; q < inner.size(); ++q) pos[inner[q]] = static_cast<int>(q);
    std::vector<Trip> t;
    for (int col = 0; col < L.outerSize(); ++col)
        for (SpMat::InnerIterator it(L, col); it; ++it) {
            int pr = pos[it.row() / 3], pc = pos[it.col() / 3];
            if (pr < 0 || pc < 0) continue;
            t.emplace_back(3 * pr + it.row() % 3, 3 * pc + it.col() % 3, it.value());
        }
    SpMat Li(3 * inner.size(), 3 * inner.size());
    Li.setFromTriplets(t.begin(), t.end());
    return Li;
}

namespace {

bool separable_chart(const Chart& c) {
    const int n = c.n, Nr = c.N[n - 1];
    for (int ax = 0; ax + 1 < n; ++ax)
        if (!c.periodic[ax]) return false;
    for (int node = 0; node < c.nodes; ++node) {
        const int ref = node % Nr;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double v = c.g(node, i, j);
                if (i != j && v != 0.0) return false;
                if (std::abs(v - c.g(ref, i, j)) > 1e-14 * std::max(1.0, std::abs(v))) return false;
            }
    }
    return true;
}

// Exact inverse of the flat interior Laplacian on charts whose metric is
// diagonal and depends on the normal coordinate only: Fourier transform over
// the periodic axes, then one dense normal-axis system per wavenumber.
class FlatPoisson {
public:
    explicit FlatPoisson(const Chart& c) : c_(c) {
        const int n = c.n;
        Nr_ = c.N[n - 1];
        T_ = c.tangential_count();
        const int m = Nr_ - 2;
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(Nr_, Nr_);
        for (int i = 0; i < Nr_; ++i) {
            const StencilRow& r = c.deriv[n - 1][i];
            for (size_t q = 0; q < r.idx.size(); ++q) D(i, r.idx[q]) += r.w[q];
        }
        Eigen::VectorXd a(Nr_), agrr(Nr_);
        for (int k = 0; k < Nr_; ++k) {
            a[k] = c.volume[k];
            agrr[k] = c.volume[k] * c.ginv(k, n - 1, n - 1);
        }
        Eigen::MatrixXd Mr = -(a.cwiseInverse().asDiagonal() * D * agrr.asDiagonal() * D);
        Eigen::MatrixXd Mi = Mr.block(1, 1, m, m);

        std::array<std::vector<double>, 2> mu;
        for (int ax = 0; ax + 1 < n; ++ax) {
            const int Na = c.N[ax];
            const StencilRow& r = c.deriv[ax][0];
            mu[ax].resize(Na);
            for (int k = 0; k < Na; ++k) {
                std::complex<double> s = 0.0;
                for (size_t q = 0; q < r.idx.size(); ++q) {
                    int off = r.idx[q];
                    if (off > Na / 2) off -= Na;
                    s += r.w[q] * std::polar(1.0, 2.0 * M_PI * k * off / Na);
                }
                mu[ax][k] = -(s * s).real();
            }
        }
        const int N0 = c.N[0], N1 = n == 3 ? c.N[1] : 1;
        mode_.assign(T_, -1);
        std::map<std::pair<int, int>, int> seen;
        for (int k0 = 0; k0 < N0; ++k0)
            for (int k1 = 0; k1 < N1; ++k1) {
                const int c0 = std::min(k0, N0 - k0), c1 = std::min(k1, N1 - k1);
                auto key = std::make_pair(c0, c1);
                auto it = seen.find(key);
                if (it == seen.end()) {
                    Eigen::MatrixXd M = Mi;
                    for (int k = 0; k < m; ++k) {
                        double add = mu[0][k0] * c.ginv(k + 1, 0, 0);
                        if (n == 3) add += mu[1][k1] * c.ginv(k + 1, 1, 1);
                        M(k, k) += add;
                    }
                    it = seen.emplace(key, static_cast<int>(lu_.size())).first;
                    lu_.emplace_back(M);
                }
                mode_[k0 * N1 + k1] = it->second;
            }
    }

    // in, out: 3 * nodes coefficient vectors; boundary entries of in are ignored
    void apply(const double* in, double* out) const {
        const int n = c_.n, m = Nr_ - 2;
        const int N0 = c_.N[0], N1 = n == 3 ? c_.N[1] : 1;
        using cd = std::complex<double>;
        std::vector<cd> spec(static_cast<size_t>(3) * T_ * Nr_);
        auto at = [&](int k, int t, int r) -> cd& { return spec[(static_cast<size_t>(k) * T_ + t) * Nr_ + r]; };
        Eigen::FFT<double> fft;
        std::vector<cd> line, res;
        auto transform = [&](bool forward) {
            for (int k = 0; k < 3; ++k)
                for (int r = 1; r < Nr_ - 1; ++r) {
                    if (N1 > 1)
                        for (int i0 = 0; i0 < N0; ++i0) {
                            line.resize(N1);
                            for (int i1 = 0; i1 < N1; ++i1) line[i1] = at(k, i0 * N1 + i1, r);
                            if (forward) fft.fwd(res, line); else fft.inv(res, line);
                            for (int i1 = 0; i1 < N1; ++i1) at(k, i0 * N1 + i1, r) = res[i1];
                        }
                    for (int i1 = 0; i1 < N1; ++i1) {
                        line.resize(N0);
                        for (int i0 = 0; i0 < N0; ++i0) line[i0] = at(k, i0 * N1 + i1, r);
                        if (forward) fft.fwd(res, line); else fft.inv(res, line);
                        for (int i0 = 0; i0 < N0; ++i0) at(k, i0 * N1 + i1, r) = res[i0];
                    }
                }
        };
        for (int t = 0; t < T_; ++t)
            for (int r = 0; r < Nr_; ++r)
                for (int k = 0; k < 3; ++k) at(k, t, r) = in[3 * (t * Nr_ + r) + k];
        transform(true);
        Eigen::MatrixXd rhs(m, 6);
        for (int t = 0; t < T_; ++t) {
            for (int k = 0; k < 3; ++k)
                for (int r = 0; r < m; ++r) {
                    rhs(r, 2 * k) = at(k, t, r + 1).real();
                    rhs(r, 2 * k + 1) = at(k, t, r + 1).imag();
                }
            Eigen::MatrixXd x = lu_[mode_[t]].solve(rhs);
            for (int k = 0; k < 3; ++k)
                for (int r = 0; r < m; ++r) at(k, t, r + 1) = cd(x(r, 2 * k), x(r, 2 * k + 1));
        }
        transform(false);
        for (int t = 0; t < T_; ++t)
            for (int r = 0; r < Nr_; ++r)
                for (int k = 0; k < 3; ++k)
                    out[3 * (t * Nr_ + r) + k] = (r == 0 || r == Nr_ - 1) ? 0.0 : at(k, t, r).real();
    }

private:
    const Chart& c_;
    int Nr_ = 0, T_ = 0;
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
    std::vector<int> mode_;
};

std::shared_ptr<const FlatPoisson> flat_poisson_for(const ChartPtr& c) {
    static std::mutex mu;
    static std::map<const Chart*, std::pair<std::weak_ptr<const Chart>, std::shared_ptr<const FlatPoisson>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    for (auto it = cache.begin(); it != cache.end();)
        it = it->second.first.expired() ? cache.erase(it) : std::next(it);
    auto it = cache.find(c.get());
    if (it != cache.end()) return it->second.second;
    auto p = std::make_shared<const FlatPoisson>(*c);
    cache[c.get()] = {c, p};
    return p;
}

}  // namespace

struct GreenSolve::Impl {
    std::vector<int> inner;
    SpMat L;
    std::unique_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu;
    std::unique_ptr<Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>>> bicg;
    std::shared_ptr<const FlatPoisson> flat;
    GreenOptions::Method method = GreenOptions::Method::direct;
};

const char* method_name(GreenOptions::Method m) {
    switch (m) {
        case GreenOptions::Method::automatic: return "automatic";
        case GreenOptions::Method::direct: return "direct";
        case GreenOptions::Method::bicgstab: return "bicgstab";
        case GreenOptions::Method::cg: return "cg";
        case GreenOptions::Method::gmres: return "gmres";
    }
    return "?";
}

GreenSolve::GreenSolve(const Connection& A, GreenOptions opt) : A_(A), opt_(opt), impl_(std::make_unique<Impl>()) {
    const Chart& c = *A.chart;
    impl_->inner = interior_nodes(c);
    auto m = opt.method;
    if (m == GreenOptions::Method::automatic)
        m = separable_chart(c) ? GreenOptions::Method::gmres
                               : (c.n == 2 ? GreenOptions::Method::direct : GreenOptions::Method::bicgstab);
    if (m == GreenOptions::Method::gmres && !separable_chart(c))
        throw Error(ErrorKind::ConfigError, "gmres Green solve needs a chart with a normal-only diagonal metric");
    impl_->method = m;
    if (m == GreenOptions::Method::cg) return;
    if (m == GreenOptions::Method::gmres) {
        impl_->flat = flat_poisson_for(A.chart);
        return;
    }
    impl_->L = assemble_laplacian(A, true);
    impl_->L.makeCompressed();
    if (m == GreenOptions::Method::direct) {
        impl_->lu = std::make_unique<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
        impl_->lu->analyzePattern(impl_->L);
        impl_->lu->factorize(impl_->L);
        if (impl_->lu->info() != Eigen::Success)
            throw Error(ErrorKind::NoConvergence, "sparse LU factorization failed: " + impl_->lu->lastErrorMessage());
    } else {
        impl_->bicg = std::make_unique<Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>>>();
        impl_->bicg->preconditioner().setDroptol(1e-4);
        impl_->bicg->preconditioner().setFillfactor(10);
        impl_->bicg->setTolerance(opt.tolerance);
        int cap = opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(200.0 * std::sqrt(double(c.nodes)));
        impl_->bicg->setMaxIterations(cap);
        impl_->bicg->compute(impl_->L);
        if (impl_->bicg->info() != Eigen::Success)
            throw Error(ErrorKind::NoConvergence, "preconditioner setup failed");
    }
}

GreenSolve::~GreenSolve() = default;
GreenSolve::GreenSolve(GreenSolve&&) noexcept = default;
GreenSolve& GreenSolve::operator=(GreenSolve&&) noexcept = default;

namespace {

int iteration_cap(const GreenOptions& opt, const Chart& c) {
    return opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(200.0 * std::sqrt(double(c.nodes)));
}

// Conjugate gradients for the adjoint-form Laplacian, which is symmetric in the
// weighted inner product sum W a <u, v>.
Section cg_solve(const Connection& A, const Section& g, const GreenOptions& opt, SolveStats& st) {
    const Chart& c = *A.chart;
    auto apply = [&](const Section& x) { return codiff_A(d_A(x, A), A, Codiff::adjoint); };
    auto dot = [&](const Section& u, const Section& v) {
        double s = 0.0;
        for (int node = 0; node < c.nodes; ++node)
            if (!c.is_boundary(node)) s += c.weight[node] * c.volume[node] * trace_inner(u.v[node], v.v[node]);
        return s;
    };
    Section b = g;
    for (int q = 0; q < c.boundary_count(); ++q) b.v[c.boundary_node(q)] = Alg{};
    Section x = make_section(A.chart);
    Section r = b, p = b;
    double bb = dot(b, b);
    st.method = "cg";
    st.iterations = 0;
    if (bb == 0.0) {
        st.residual = 0.0;
        return x;
    }
    double rr = bb;
    const int cap = iteration_cap(opt, c);
    const double tol2 = opt.tolerance * opt.tolerance * bb;
    while (rr > tol2 && st.iterations < cap) {
        Section Ap = apply(p);
        double alpha = rr / dot(p, Ap);
        for (size_t i = 0; i < x.v.size(); ++i) {
            x.v[i] += alpha * p.v[i];
            r.v[i] -= alpha * Ap.v[i];
        }
        double rr_new = dot(r, r);
        double beta = rr_new / rr;
        rr = rr_new;
        for (size_t i = 0; i < p.v.size(); ++i) p.v[i] = r.v[i] + beta * p.v[i];
        ++st.iterations;
    }
    // true residual
    Section res = apply(x);
    res -= b;
    st.residual = std::sqrt(dot(res, res) / bb);
    if (st.residual > opt.tolerance * 10.0)
        throw Error(ErrorKind::NoConvergence, "CG stopped at relative residual " + std::to_string(st.residual) +
                                                  " after " + std::to_string(st.iterations) + " iterations");
    return x;
}

// Restarted GMRES with the flat solve as right preconditioner. Vectors hold
// 3 * nodes coefficients with zero boundary entries.
Section gmres_solve(const Connection& A, const FlatPoisson& P, const Section& g, const GreenOptions& opt,
                    SolveStats& st) {
    using Vec = Eigen::VectorXd;
    const Chart& c = *A.chart;
    const int len = 3 * c.nodes;
    auto mask = [&](Vec& v) {
        for (int q = 0; q < c.boundary_count(); ++q) {
            const int node = c.boundary_node(q);
            v.segment<3>(3 * node).setZero();
        }
    };
    auto apply_L = [&](const Vec& x) {
        Section s = make_section(A.chart);
        std::copy(x.data(), x.data() + len, &s.v[0].c[0]);
        Section Ls = laplacian_A(s, A, Codiff::pointwise, false);
        Vec y(len);
        std::copy(&Ls.v[0].c[0], &Ls.v[0].c[0] + len, y.data());
        mask(y);
        return y;
    };
    auto apply_P = [&](const Vec& x) {
        Vec y(len);
        P.apply(x.data(), y.data());
        return y;
    };
    Vec b(len);
    std::copy(&g.v[0].c[0], &g.v[0].c[0] + len, b.data());
    mask(b);
    st.method = "gmres";
    st.iterations = 0;
    Vec x = Vec::Zero(len);
    const double bn = b.norm();
    if (bn == 0.0) {
        st.residual = 0.0;
        return make_section(A.chart);
    }
    const int restart = 40;
    const int cap = iteration_cap(opt, c);
    Vec r = b;
    double rn = bn;
    while (rn > opt.tolerance * bn && st.iterations < cap) {
        std::vector<Vec> V{r / rn};
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
        Vec cs = Vec::Zero(restart), sn = Vec::Zero(restart), e = Vec::Zero(restart + 1);
        e[0] = rn;
        int j = 0;
        for (; j < restart && st.iterations < cap; ++j) {
            Vec w = apply_L(apply_P(V[j]));
            for (int i = 0; i <= j; ++i) {
                H(i, j) = w.dot(V[i]);
                w -= H(i, j) * V[i];
            }
            H(j + 1, j) = w.norm();
            for (int i = 0; i < j; ++i) {
                double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            double den = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = H(j, j) / den;
            sn[j] = H(j + 1, j) / den;
            H(j, j) = den;
            const double wn = H(j + 1, j);
            H(j + 1, j) = 0.0;
            e[j + 1] = -sn[j] * e[j];
            e[j] = cs[j] * e[j];
            ++st.iterations;
            if (std::abs(e[j + 1]) <= 0.1 * opt.tolerance * bn || wn == 0.0) {
                ++j;
                break;
            }
            V.push_back(w / wn);
        }
        Vec y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(e.head(j));
        Vec z = Vec::Zero(len);
        for (int i = 0; i < j; ++i) z += y[i] * V[i];
        x += apply_P(z);
        r = b - apply_L(x);
        rn = r.norm();
    }
    st.residual = rn / bn;
    if (!(st.residual <= opt.tolerance))
        throw Error(ErrorKind::NoConvergence, "GMRES stopped at relative residual " + std::to_string(st.residual) +
                                                  " after " + std::to_string(st.iterations) + " iterations");
    Section f = make_section(A.chart);
    std::copy(x.data(), x.data() + len, &f.v[0].c[0]);
    return f;
}

}  // namespace

Section GreenSolve::solve(const Section& g) {
    require_same_chart(g.chart, A_.chart);
    if (g.degree != 0) throw Error(ErrorKind::RankMismatch, "green_A expects a section");
    if (impl_->method == GreenOptions::Method::cg) return cg_solve(A_, g, opt_, last_);
    if (impl_->method == GreenOptions::Method::gmres) return gmres_solve(A_, *impl_->flat, g, opt_, last_);

    const auto& inner = impl_->inner;
    Eigen::VectorXd b(3 * inner.size());
    for (size_t q = 0; q < inner.size(); ++q)
        for (int k = 0; k < 3; ++k) b[3 * q + k] = g.v[inner[q]][k];
    Section f = make_section(A_.chart);
    double bn = b.norm();
    last_.method = method_name(impl_->method);
    if (bn == 0.0) {
        last_.iterations = 0;
        last_.residual = 0.0;
        return f;
    }
    Eigen::VectorXd x;
    if (impl_->method == GreenOptions::Method::direct) {
        x = impl_->lu->solve(b);
        last_.iterations = 1;
    } else {
        x = impl_->bicg->solve(b);
        last_.iterations = static_cast<int>(impl_->bicg->iterations());
    }
    last_.residual = (impl_->L * x - b).norm() / bn;
    if (!(last_.residual <= opt_.tolerance))
        throw Error(ErrorKind::NoConvergence, last_.method + " relative residual " + std::to_string(last_.residual));
    for (size_t q = 0; q < inner.size(); ++q)
        for (int k = 0; k < 3; ++k) f.v[inner[q]][k] = x[3 * q + k];
    return f;
}

Section green_A(const Section& g, const Connection& A, GreenSolve& s) {
    require_same_chart(A.chart, s.connection().chart);
    return s.solve(g);
}

Section green_A(const Section& g, const Connection& A, const GreenOptions& opt) {
    GreenSolve s(A, opt);
    return s.solve(g);
}

OneForm horizontal_project(const OneForm& eta, const Connection& A, GreenSolve& s) {
    auto d = check_dbc(eta, 1e-12 * std::max(1.0, eta.max_abs()));
    if (!d.ok) throw Error(ErrorKind::DbcViolation, "horizontal_project input violates DBC");
    Codiff form = s.options().method == GreenOptions::Method::cg ? Codiff::adjoint : Codiff::pointwise;
    Section gamma = s.solve(codiff_A(eta, A, form));
    return eta - d_A(gamma, A);
}

OneForm horizontal_project(const OneForm& eta, const Connection& A) {
    GreenSolve s(A);
    return horizontal_project(eta, A, s);
}

namespace {

int perm_sign(const std::vector<int>& p) {
    int s = 1;
    for (size_t i = 0; i < p.size(); ++i)
        for (size_t j = i + 1; j < p.size(); ++j)
            if (p[i] > p[j]) s = -s;
    return s;
}

double inv_minor(const Chart& c, int node, const std::vector<int>& I, const std::vector<int>& K) {
    const size_t p = I.size();
    if (p == 0) return 1.0;
    Eigen::MatrixXd m(p, p);
    for (size_t i = 0; i < p; ++i)
        for (size_t j = 0; j < p; ++j) m(i, j) = c.ginv(node, I[i], K[j]);
    return m.determinant();
}

}  // namespace

Form hodge_star(const Form& w) {
    const Chart& c = *w.chart;
    const int n = c.n, p = w.degree;
    if (p < 0 || p > n) throw Error(ErrorKind::UnsupportedDegree, "degree out of range");
    const auto& src = multi_indices(n, p);
    Form out(w.chart, n - p);
    for (size_t I = 0; I < src.size(); ++I) {
        std::vector<int> J;
        for (int ax = 0; ax < n; ++ax)
            if (std::find(src[I].begin(), src[I].end(), ax) == src[I].end()) J.push_back(ax);
        std::vector<int> cat = src[I];
        cat.insert(cat.end(), J.begin(), J.end());
        const int sgn = perm_sign(cat);
        const int jpos = multi_index_position(n, J);
        for (int node = 0; node < c.nodes; ++node) {
            Alg raised;
            for (size_t K = 0; K < src.size(); ++K) {
                double gik = inv_minor(c, node, src[I], src[K]);
                if (gik != 0.0) raised += gik * w.at(static_cast<int>(K), node);
            }
            out.at(jpos, node) += (sgn * c.volume[node]) * raised;
        }
    }
    return out;
}

Form hodge_star_inverse(const Form& w) {
    const int q = w.degree, n = w.chart->n;
    Form s = hodge_star(w);
    if ((q * (n - q)) % 2 == 1) s *= -1.0;
    return s;
}

Form exterior_d_A(const Form& w, const Connection& A) {
    require_same_chart(w.chart, A.chart);
    const Chart& c = *w.chart;
    const int n = c.n, p = w.degree;
    if (p >= n) throw Error(ErrorKind::UnsupportedDegree, "d of a top form");
    Form out(w.chart, p + 1);
    const auto& dst = multi_indices(n, p + 1);
    std::vector<Alg> tmp(c.nodes);
    for (size_t J = 0; J < dst.size(); ++J) {
        for (int k = 0; k <= p; ++k) {
            std::vector<int> rest = dst[J];
            const int ax = rest[k];
            rest.erase(rest.begin() + k);
            const int src = multi_index_position(n, rest);
            const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
            c.differentiate(ax, w.comp(src), tmp.data());
            for (int node = 0; node < c.nodes; ++node)
                out.at(static_cast<int>(J), node) +=
                    sgn * (tmp[node] + gb::bracket(A.component(ax, node), w.at(src, node)));
        }
    }
    return out;
}

Form codiff_form(const Form& w, const Connection& A) {
    const int n = w.chart->n, p = w.degree;
    if (p < 1) throw Error(ErrorKind::UnsupportedDegree, "codifferential of a 0-form");
    Form out = hodge_star(exterior_d_A(hodge_star(w), A));
    if ((n * (p + 1) + 1) % 2 == 1) out *= -1.0;
    return out;
}

OneForm codiff_2form(const TwoForm& w, const Connection& A) {
    if (w.degree != 2) throw Error(ErrorKind::UnsupportedDegree, "codiff_2form expects a two-form");
    if (w.chart->n != 2 && w.chart->n != 3) throw Error(ErrorKind::UnsupportedDegree, "n must be 2 or 3");
    return codiff_form(w, A);
}

TwoForm lemma_two_form(const ScalarField& F, const Alg& x) {
    const Chart& c = *F.chart;
    Form base(F.chart, c.n - 2);
    // dy_1 ^ ... ^ dy_{n-2} is the first multi-index of degree n-2
    for (int node = 0; node < c.nodes; ++node) base.at(0, node) = F.v[node] * x;
    return hodge_star_inverse(base);
}

OneForm lemma_codiff_closed(const ScalarField& F, const Alg& x) {
    const Chart& c = *F.chart;
    const int n = c.n, an1 = n - 2, an = n - 1;
    ScalarField F1 = flat_d_axis(F, an1), Fn = flat_d_axis(F, an);
    OneForm w = make_oneform(F.chart);
    for (int node = 0; node < c.nodes; ++node) {
        double b = c.volume[node];
        for (int i = 0; i < n; ++i) {
            double v = -(F1.v[node] * c.g(node, i, an) - Fn.v[node] * c.g(node, i, an1)) / b;
            w.at(i, node) = v * x;
        }
    }
    return w;
}

namespace {

BoundaryScalar chart_mean_curvature(const ChartPtr& c) {
    return is_type_a(*c) ? mean_curvature_typeA(c) : mean_curvature_typeB(c);
}

}  // namespace

BoundaryField boundary_operator_from_laplacian(const Section& L, const Connection& A) {
    BoundaryField t = normal_component(d_A(L, A));
    BoundaryField tr = trace_boundary(L);
    BoundaryScalar H = chart_mean_curvature(L.chart);
    const double k = 2.0 * (L.chart->n - 1);
    for (size_t q = 0; q < t.v.size(); ++q) t.v[q] += (k * H.v[q]) * tr.v[q];
    return t;
}

BoundaryField boundary_operator_T(const Section& f, const Connection& A, bool require_dbc) {
    return boundary_operator_from_laplacian(laplacian_A(f, A, Codiff::pointwise, require_dbc), A);
}

BoundaryField boundary_operator_Ttilde(const Section& f) {
    return boundary_operator_from_laplacian(f, Connection::flat(f.chart));
}

double smallest_ritz_value(const Connection& A, Codiff form, int iterations, std::uint64_t seed) {
    GreenOptions opt;
    opt.method = form == Codiff::adjoint ? GreenOptions::Method::cg : GreenOptions::Method::automatic;
    opt.tolerance = 1e-10;
    GreenSolve solver(A, opt);
    Section x = random_smooth_field(A.chart, 0, seed, true);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        x *= 1.0 / l2_norm(x);
        Section y = solver.solve(x);
        x = y;
    }
    x *= 1.0 / l2_norm(x);
    Section Lx = laplacian_A(x, A, form, false);
    lambda = l2_inner(x, Lx);
    return lambda;
}

}  // namespace gb
