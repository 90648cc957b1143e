#pragma once

#include "pdeop/core.hpp"

namespace pdeop::pde {

/// Tridiagonal matrix stored by diagonals: lower[i] = T(i+1, i),
/// diag[i] = T(i, i), upper[i] = T(i, i+1).
struct Tridiagonal {
    Vec lower;
    Vec diag;
    Vec upper;

    explicit Tridiagonal(int n = 0) : lower(Vec::Zero(n > 0 ? n - 1 : 0)), diag(Vec::Zero(n)),
                                      upper(Vec::Zero(n > 0 ? n - 1 : 0)) {}

    int size() const noexcept { return static_cast<int>(diag.size()); }
    Tridiagonal transpose() const;
    Vec multiply(const Vec& v) const;
    Mat dense() const;

    /// Gaussian elimination with partial pivoting (LAPACK gtsv scheme).
    /// Throws NumericalError on a zero pivot.
    Vec solve(const Vec& rhs) const;
};

}  // namespace pdeop::pde
