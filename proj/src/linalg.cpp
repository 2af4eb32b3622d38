#include "zklab/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace zklab {

CMat CMat::identity(int n) {
    CMat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

CMat mat_mul(const CMat& x, const CMat& y) {
    if (x.cols != y.rows) throw DomainError("mat_mul: shape mismatch");
    CMat r(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            cplx v = x.at(i, k);
            if (v == cplx{}) continue;
            for (int j = 0; j < y.cols; ++j) r.at(i, j) += v * y.at(k, j);
        }
    return r;
}

CMat mat_adjoint(const CMat& x) {
    CMat r(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r.at(j, i) = std::conj(x.at(i, j));
    return r;
}

CMat mat_add(const CMat& x, const CMat& y) {
    if (x.rows != y.rows || x.cols != y.cols) throw DomainError("mat_add: shape mismatch");
    CMat r = x;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
    return r;
}

CMat mat_scale(const CMat& x, cplx s) {
    CMat r = x;
    for (auto& v : r.a) v *= s;
    return r;
}

cplx mat_trace(const CMat& x) {
    if (x.rows != x.cols) throw DomainError("mat_trace: not square");
    cplx t = 0;
    for (int i = 0; i < x.rows; ++i) t += x.at(i, i);
    return t;
}

double mat_max_abs_diff(const CMat& x, const CMat& y) {
    if (x.rows != y.rows || x.cols != y.cols) throw DomainError("mat_max_abs_diff: shape mismatch");
    double m = 0;
    for (size_t i = 0; i < x.a.size(); ++i) m = std::max(m, std::abs(x.a[i] - y.a[i]));
    return m;
}

bool mat_is_hermitian(const CMat& x, double tol) {
    if (x.rows != x.cols) return false;
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j <= i; ++j)
            if (std::abs(x.at(i, j) - std::conj(x.at(j, i))) > tol) return false;
    return true;
}

bool mat_is_unitary(const CMat& x, double tol) {
    if (x.rows != x.cols) return false;
    CMat p = mat_mul(mat_adjoint(x), x);
    return mat_max_abs_diff(p, CMat::identity(x.rows)) <= tol;
}

namespace {

// Cyclic Jacobi for a real symmetric matrix stored dense. Good enough for the
// dimensions we see (<= 256 after embedding).
std::vector<double> jacobi_symmetric(std::vector<double> s, int n) {
    auto at = [&](int i, int j) -> double& { return s[static_cast<size_t>(i) * n + j]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-26) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (at(q, q) - at(p, p)) / (2 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - sn * akq;
                    at(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - sn * aqk;
                    at(q, k) = sn * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace

std::vector<double> hermitian_eigenvalues(const CMat& x) {
    if (x.rows != x.cols) throw DomainError("hermitian_eigenvalues: not square");
    int n = x.rows;
    std::vector<double> s(static_cast<size_t>(2 * n) * (2 * n));
    auto at = [&](int i, int j) -> double& { return s[static_cast<size_t>(i) * 2 * n + j]; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            at(i, j) = x.at(i, j).real();
            at(i + n, j + n) = x.at(i, j).real();
            at(i + n, j) = x.at(i, j).imag();
            at(i, j + n) = -x.at(i, j).imag();
        }
    std::vector<double> all = jacobi_symmetric(std::move(s), 2 * n);
    // doubled spectrum: take every other entry
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = all[2 * i];
    return ev;
}

double min_eigenvalue(const CMat& x) { return hermitian_eigenvalues(x).front(); }
double max_eigenvalue(const CMat& x) { return hermitian_eigenvalues(x).back(); }

}  // namespace zklab
