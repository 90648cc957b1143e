#include "pdeop/tridiagonal.hpp"

#include <cmath>
#include <utility>

namespace pdeop::pde {

Tridiagonal Tridiagonal::transpose() const {
    Tridiagonal t(size());
    t.diag = diag;
    t.lower = upper;
    t.upper = lower;
    return t;
}

Vec Tridiagonal::multiply(const Vec& v) const {
    const int n = size();
    if (v.size() != n) throw DimensionError("tridiagonal multiply: size mismatch");
    Vec out = diag.cwiseProduct(v);
    for (int i = 0; i + 1 < n; ++i) {
        out[i] += upper[i] * v[i + 1];
        out[i + 1] += lower[i] * v[i];
    }
    return out;
}

Mat Tridiagonal::dense() const {
    const int n = size();
    Mat m = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = diag[i];
    for (int i = 0; i + 1 < n; ++i) {
        m(i, i + 1) = upper[i];
        m(i + 1, i) = lower[i];
    }
    return m;
}

Vec Tridiagonal::solve(const Vec& rhs) const {
    const int n = size();
    if (rhs.size() != n) throw DimensionError("tridiagonal solve: size mismatch");
    if (n == 0) return rhs;
    // d: diagonal, du: first superdiagonal, du2: second superdiagonal (fill-in), dl: subdiagonal
    Vec d = diag, du = upper, dl = lower, b = rhs;
    Vec du2 = Vec::Zero(n > 2 ? n - 2 : 0);
    for (int i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (d[i] == 0.0) throw NumericalError("tridiagonal solve: singular matrix");
            const double f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            // swap rows i and i+1
            const double f = d[i] / dl[i];
            d[i] = dl[i];
            const double tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= f * b[i];
        }
    }
    if (d[n - 1] == 0.0) throw NumericalError("tridiagonal solve: singular matrix");
    Vec x(n);
    x[n - 1] = b[n - 1] / d[n - 1];
    if (n > 1) x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    for (int i = n - 3; i >= 0; --i) x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    return x;
}

}  // namespace pdeop::pde
