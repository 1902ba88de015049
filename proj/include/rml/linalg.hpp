#pragma once

#include <utility>
#include <vector>

#include "rml/matrix.hpp"

namespace rml {

// Result of the dense nonsymmetric eigensolver. `values` are sorted by
// (real, imag) so downstream output is reproducible. `sweeps` is the total
// number of QR sweeps spent; on a convergence failure the solver throws
// instead of returning, and the exception message carries the sweep count.
struct EigenResult {
    std::vector<cdouble> values;
    bool converged = false;
    int sweeps = 0;
};

// Eigenvalues of a Hermitian matrix, ascending. Rejects input whose
// Hermiticity defect exceeds 1e-12 * hs_norm(H) entrywise. Householder
// reduction to real symmetric tridiagonal form, then implicitly shifted QL
// with Wilkinson shift; subdiagonal entries are deflated once
// |e_k| <= 1e-14 * (|d_k| + |d_k+1|), and more than 40 sweeps on one
// eigenvalue is an error.
std::vector<double> hermitian_eigen(const ComplexMatrix& h);

// Eigenvalues of a general complex square matrix: Householder reduction to
// upper Hessenberg form followed by implicitly shifted QR with the Wilkinson
// shift (the trailing 2x2 eigenvalue nearer to the corner entry), same
// deflation threshold and per-eigenvalue sweep cap as hermitian_eigen.
EigenResult complex_eigen(const ComplexMatrix& m);

// Singular values, descending. Computed as the nonnegative eigenvalues of
// the Hermitian embedding [[0, M], [M*, 0]], whose spectrum is +-sigma_i
// plus |rows-cols| zeros; reuses hermitian_eigen.
std::vector<double> singular_values(const ComplexMatrix& m);

// (Hilbert-Schmidt norm, spectral norm). The spectral norm is sigma_max and
// never exceeds the Hilbert-Schmidt norm.
std::pair<double, double> norms(const ComplexMatrix& m);

// LU factorization with partial pivoting, kept around for resolvent work.
struct LuFactors {
    ComplexMatrix lu;           // unit-lower / upper packed in place
    std::vector<int> perm;      // row permutation
    int sign = 1;
    bool singular = false;
};
LuFactors lu_factor(const ComplexMatrix& m);
std::vector<cdouble> lu_solve(const LuFactors& f, std::vector<cdouble> b);
ComplexMatrix inverse(const ComplexMatrix& m);
// log |det M|; -inf when numerically singular.
double log_abs_det(const ComplexMatrix& m);

}  // namespace rml
