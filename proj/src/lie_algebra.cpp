#include "gaugebench/lie_algebra.hpp"

#include <algorithm>

namespace gb {

const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::NearCutLocus: return "NearCutLocus";
        case ErrorKind::BadGeometry: return "BadGeometry";
        case ErrorKind::NotTypeA: return "NotTypeA";
        case ErrorKind::NotTypeB: return "NotTypeB";
        case ErrorKind::RankMismatch: return "RankMismatch";
        case ErrorKind::ChartMismatch: return "ChartMismatch";
        case ErrorKind::DbcViolation: return "DbcViolation";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::UnsupportedDegree: return "UnsupportedDegree";
        case ErrorKind::NotHorizontal: return "NotHorizontal";
        case ErrorKind::IncompatibleBoundaryData: return "IncompatibleBoundaryData";
        case ErrorKind::WindowTooSmall: return "WindowTooSmall";
        case ErrorKind::SupportTouchesBoundary: return "SupportTouchesBoundary";
        case ErrorKind::KernelConditionViolated: return "KernelConditionViolated";
        case ErrorKind::HopfViolation: return "HopfViolation";
        case ErrorKind::BadCover: return "BadCover";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Error";
}

namespace {

using cd = std::complex<double>;

Mat2 pauli(int k) {
    Mat2 s;
    if (k == 0) s << 0, 1, 1, 0;
    else if (k == 1) s << 0, cd(0, -1), cd(0, 1), 0;
    else s << 1, 0, 0, -1;
    return s;
}

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

}  // namespace

Eigen::Matrix3d ad_matrix(const Alg& x) {
    Eigen::Matrix3d m;
    m << 0, -x[2], x[1],
         x[2], 0, -x[0],
         -x[1], x[0], 0;
    return kStructure * m;
}

Mat2 to_matrix(const Alg& x) {
    Mat2 m = Mat2::Zero();
    for (int k = 0; k < 3; ++k) m += cd(0, kInvSqrt2 * x[k]) * pauli(k);
    return m;
}

Alg from_matrix(const Mat2& m) {
    Alg x;
    for (int k = 0; k < 3; ++k) {
        Mat2 e = cd(0, kInvSqrt2) * pauli(k);
        x[k] = (e.adjoint() * m).trace().real();
    }
    return x;
}

GroupElement GroupElement::operator*(const GroupElement& o) const {
    GroupElement r(m_ * o.m_, std::max(age_, o.age_) + 1);
    if (r.age_ >= kRenormEvery) return r.renormalized();
    return r;
}

Alg GroupElement::adjoint(const Alg& x) const {
    return from_matrix(m_ * to_matrix(x) * m_.adjoint());
}

Alg GroupElement::adjoint_inverse(const Alg& x) const {
    return from_matrix(m_.adjoint() * to_matrix(x) * m_);
}

GroupElement GroupElement::renormalized() const {
    // SU(2) = {[[a, b], [-conj b, conj a]]}: symmetrize then normalize.
    cd a = 0.5 * (m_(0, 0) + std::conj(m_(1, 1)));
    cd b = 0.5 * (m_(0, 1) - std::conj(m_(1, 0)));
    double s = std::sqrt(std::norm(a) + std::norm(b));
    a /= s;
    b /= s;
    Mat2 m;
    m << a, b, -std::conj(b), std::conj(a);
    return GroupElement(m, 0);
}

double GroupElement::unitarity_defect() const {
    return (m_.adjoint() * m_ - Mat2::Identity()).norm();
}

double GroupElement::det_defect() const { return std::abs(m_.determinant() - cd(1, 0)); }

GroupElement exp_map(const Alg& x) {
    // exp(i t n.sigma) = cos t + i sin t n.sigma with t = |x|/sqrt 2
    double t = x.norm() * kInvSqrt2;
    double sinc = t < 1e-8 ? 1.0 - t * t / 6.0 : std::sin(t) / t;
    Mat2 m = std::cos(t) * Mat2::Identity();
    for (int k = 0; k < 3; ++k) m += cd(0, sinc * kInvSqrt2 * x[k]) * pauli(k);
    return GroupElement(m);
}

Alg log_map(const GroupElement& g, double tol) {
    const Mat2& m = g.matrix();
    double tr = m.trace().real();
    if (tr <= -2.0 + tol) throw Error(ErrorKind::NearCutLocus, "trace " + std::to_string(tr));
    // vector part: (m - m^*)/2 = i sin t (n.sigma)
    Alg v = from_matrix(0.5 * (m - m.adjoint()));
    // v = sqrt2 sin t n  in e-coefficients
    double s = v.norm() * kInvSqrt2;
    double c = 0.5 * tr;
    double t = std::atan2(s, c);
    double factor = s < 1e-12 ? 1.0 : t / s;
    return factor * v;
}

Alg dexp_left(const Alg& x, const Alg& y) {
    double nx = x.norm();
    double w = std::abs(kStructure) * nx;
    if (w < 1e-6) {
        Alg b = bracket(x, y);
        return y - 0.5 * b + (1.0 / 6.0) * bracket(x, b);
    }
    Alg u = (1.0 / nx) * x;
    Alg par = trace_inner(u, y) * u;
    Alg perp = y - par;
    return par + (std::sin(w) / w) * perp - ((1.0 - std::cos(w)) / (w * w)) * bracket(x, y);
}

std::vector<std::pair<Alg, Alg>> commutator_decompose(const Alg& v) {
    std::vector<std::pair<Alg, Alg>> out;
    for (int k = 0; k < 3; ++k) {
        if (v[k] == 0.0) continue;
        int i = (k + 1) % 3, j = (k + 2) % 3;
        // [e_i, e_j] = c e_k, so v_k e_k = [(v_k / (c s)) e_i, s e_j]
        double s = std::sqrt(std::abs(v[k] / kStructure));
        out.emplace_back((v[k] / (kStructure * s)) * Alg::basis(i), s * Alg::basis(j));
    }
    return out;
}

Alg reconstruct(const std::vector<std::pair<Alg, Alg>>& pairs) {
    Alg s;
    for (const auto& [f, g] : pairs) s += bracket(f, g);
    return s;
}

}  // namespace gb
