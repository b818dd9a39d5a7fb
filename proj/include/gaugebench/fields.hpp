#pragma once

// Grid-sampled k-valued differential forms. Component c of a p-form refers to
// the c-th increasing multi-index of {0..n-1}; storage is component-major.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gaugebench/geometry.hpp"
#include "gaugebench/lie_algebra.hpp"

namespace gb {

const std::vector<std::vector<int>>& multi_indices(int n, int p);
int multi_index_position(int n, const std::vector<int>& sorted);

struct Form {
    ChartPtr chart;
    int degree = 0;
    std::vector<Alg> v;

    Form() = default;
    Form(ChartPtr c, int p);

    int ncomp() const { return static_cast<int>(v.size()) / chart->nodes; }
    Alg& at(int comp, int node) { return v[static_cast<size_t>(comp) * chart->nodes + node]; }
    const Alg& at(int comp, int node) const { return v[static_cast<size_t>(comp) * chart->nodes + node]; }
    Alg* comp(int c) { return v.data() + static_cast<size_t>(c) * chart->nodes; }
    const Alg* comp(int c) const { return v.data() + static_cast<size_t>(c) * chart->nodes; }

    Form& operator+=(const Form& o);
    Form& operator-=(const Form& o);
    Form& operator*=(double s);
    double max_abs() const;
};

Form operator+(Form a, const Form& b);
Form operator-(Form a, const Form& b);
Form operator*(double s, Form a);

using Section = Form;
using OneForm = Form;
using TwoForm = Form;

Section make_section(const ChartPtr& c);
OneForm make_oneform(const ChartPtr& c);

// Real-valued node data.
struct ScalarField {
    ChartPtr chart;
    std::vector<double> v;
    double max_abs() const;
};

ScalarField make_scalar(const ChartPtr& c, double value = 0.0);
Section times(const ScalarField& s, const Alg& x);
Section times(const ScalarField& s, const Section& f);
ScalarField component(const Section& f, int k);

struct BoundaryField {
    ChartPtr chart;
    std::vector<Alg> v;
    double max_abs() const;
    BoundaryField& operator-=(const BoundaryField& o);
};

void require_same_chart(const ChartPtr& a, const ChartPtr& b);

OneForm flat_d(const Section& f);
ScalarField flat_d_axis(const ScalarField& f, int axis);
BoundaryField trace_boundary(const Section& f);
BoundaryScalar trace_boundary(const ScalarField& f);
BoundaryField normal_component(const OneForm& w);
BoundaryScalar normal_derivative(const ScalarField& f);

// Pointwise metric contraction <u, v> of two forms of equal degree.
double pointwise_inner(const Form& u, const Form& v, int node);
double l2_inner(const Form& u, const Form& v);
double l2_norm(const Form& u);

struct DbcCheck {
    bool ok = true;
    double violation = 0.0;
};
DbcCheck check_dbc(const Form& w, double tol = 1e-12);

struct RandomFieldOptions {
    int modes = 1;       // tangential Fourier modes 0..modes per axis
    int degree = 1;      // normal-axis polynomial degree
    double scale = 1.0;
};

Form random_smooth_field(const ChartPtr& c, int degree, std::uint64_t seed, bool dbc,
                         const RandomFieldOptions& opt = {});

// Text dump: header lines then one record per node, 17 significant digits.
void dump_form(std::ostream& os, const Form& f, std::uint64_t seed = 0);
Form load_form(std::istream& is, const ChartPtr& c);

}  // namespace gb
