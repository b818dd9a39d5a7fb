#pragma once

// su(2) arithmetic in the basis e_k = (i/sqrt 2) sigma_k, which is orthonormal
// for (A,B) = tr(A^* B).

#include <array>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gaugebench/errors.hpp"

namespace gb {

struct Alg {
    std::array<double, 3> c{0.0, 0.0, 0.0};

    Alg() = default;
    Alg(double x, double y, double z) : c{x, y, z} {}
    static Alg basis(int k) {
        Alg e;
        e.c[k] = 1.0;
        return e;
    }

    double& operator[](int k) { return c[k]; }
    double operator[](int k) const { return c[k]; }

    Alg& operator+=(const Alg& o) {
        c[0] += o.c[0]; c[1] += o.c[1]; c[2] += o.c[2];
        return *this;
    }
    Alg& operator-=(const Alg& o) {
        c[0] -= o.c[0]; c[1] -= o.c[1]; c[2] -= o.c[2];
        return *this;
    }
    Alg& operator*=(double s) {
        c[0] *= s; c[1] *= s; c[2] *= s;
        return *this;
    }
    double norm() const { return std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]); }
    double max_abs() const { return std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2])}); }
};

inline Alg operator+(Alg a, const Alg& b) { return a += b; }
inline Alg operator-(Alg a, const Alg& b) { return a -= b; }
inline Alg operator-(Alg a) { return a *= -1.0; }
inline Alg operator*(double s, Alg a) { return a *= s; }
inline Alg operator*(Alg a, double s) { return a *= s; }

using AlgebraElement = Alg;

// [e1, e2] = kStructure * e3 (and cyclic).
inline const double kStructure = -std::sqrt(2.0);

inline Alg bracket(const Alg& x, const Alg& y) {
    return Alg(kStructure * (x.c[1] * y.c[2] - x.c[2] * y.c[1]),
               kStructure * (x.c[2] * y.c[0] - x.c[0] * y.c[2]),
               kStructure * (x.c[0] * y.c[1] - x.c[1] * y.c[0]));
}

inline double trace_inner(const Alg& x, const Alg& y) {
    return x.c[0] * y.c[0] + x.c[1] * y.c[1] + x.c[2] * y.c[2];
}

// 3x3 matrix of ad_x acting on coefficient vectors.
Eigen::Matrix3d ad_matrix(const Alg& x);

using Mat2 = Eigen::Matrix2cd;

Mat2 to_matrix(const Alg& x);
// Coefficients of the su(2) part of an arbitrary 2x2 matrix (orthogonal
// projection under Re tr(A^* B)).
Alg from_matrix(const Mat2& m);

class GroupElement {
public:
    GroupElement() : m_(Mat2::Identity()) {}
    explicit GroupElement(const Mat2& m, int age = 0) : m_(m), age_(age) {}

    static GroupElement identity() { return GroupElement(); }

    const Mat2& matrix() const { return m_; }
    int age() const { return age_; }

    GroupElement operator*(const GroupElement& o) const;
    GroupElement inverse() const { return GroupElement(m_.adjoint(), age_); }

    // Ad(g) x = g x g^{-1}
    Alg adjoint(const Alg& x) const;
    Alg adjoint_inverse(const Alg& x) const;

    // Nearest SU(2) element; resets the drift counter.
    GroupElement renormalized() const;

    double unitarity_defect() const;
    double det_defect() const;
    double distance_to_identity() const { return (m_ - Mat2::Identity()).norm(); }

    static constexpr int kRenormEvery = 64;

private:
    Mat2 m_;
    int age_ = 0;
};

GroupElement exp_map(const Alg& x);

// Principal logarithm; throws NearCutLocus when trace(g) <= -2 + tol.
Alg log_map(const GroupElement& g, double tol = 1e-8);

// Left-trivialized differential of exp: exp(x)^{-1} d/dt exp(x + t y)|_{t=0}.
Alg dexp_left(const Alg& x, const Alg& y);

// Pairs (f_j, g_j) with sum_j [f_j, g_j] = v.
std::vector<std::pair<Alg, Alg>> commutator_decompose(const Alg& v);

Alg reconstruct(const std::vector<std::pair<Alg, Alg>>& pairs);

}  // namespace gb
