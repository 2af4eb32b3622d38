#pragma once

#include <vector>

#include "zklab/common.hpp"

namespace zklab {

// Dense complex matrix, row major. Dimensions here stay small (at most a few
// hundred), so nothing clever is attempted.
struct CMat {
    int rows = 0, cols = 0;
    std::vector<cplx> a;

    CMat() = default;
    CMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}

    cplx& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    const cplx& at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    static CMat identity(int n);
    static CMat zero(int n) { return CMat(n, n); }
};

CMat mat_mul(const CMat& x, const CMat& y);
CMat mat_adjoint(const CMat& x);
CMat mat_add(const CMat& x, const CMat& y);
CMat mat_scale(const CMat& x, cplx s);
cplx mat_trace(const CMat& x);
double mat_max_abs_diff(const CMat& x, const CMat& y);
bool mat_is_hermitian(const CMat& x, double tol);
bool mat_is_unitary(const CMat& x, double tol);

// Eigenvalues of a Hermitian matrix, ascending. Uses cyclic Jacobi on the
// real symmetric embedding [[Re, -Im], [Im, Re]], whose spectrum is that of
// the input with every eigenvalue doubled.
std::vector<double> hermitian_eigenvalues(const CMat& x);

double min_eigenvalue(const CMat& x);
double max_eigenvalue(const CMat& x);

}  // namespace zklab
