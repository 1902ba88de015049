#pragma once

// Shared test helpers. Oracles here are deliberately independent of the
// library's solvers: characteristic polynomials come from Faddeev-LeVerrier
// trace recursion and are rooted with Durand-Kerner iteration, so agreement
// with the QR path is a genuine cross-check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "rml/linalg.hpp"
#include "rml/matrix.hpp"
#include "rml/rng.hpp"

namespace testsupport {

using rml::cdouble;
using rml::ComplexMatrix;

inline ComplexMatrix random_complex_matrix(std::size_t n, std::uint64_t seed,
                                           double scale = 1.0) {
    rml::CounterRng rng(seed, 0xabcd);
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m(i, j) = scale * rml::cdouble(rng.next_gaussian(), rng.next_gaussian());
    return m;
}

inline ComplexMatrix random_hermitian_matrix(std::size_t n, std::uint64_t seed,
                                             double scale = 1.0) {
    ComplexMatrix g = random_complex_matrix(n, seed, scale);
    ComplexMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            h(i, j) = 0.5 * (g(i, j) + std::conj(g(j, i)));
    return h;
}

// Monic characteristic polynomial coefficients [c_{n-1}, ..., c_0] of
// p(x) = x^n + c_{n-1} x^{n-1} + ... + c_0 via the trace recursion
// A_1 = A, c_1 = -tr A_1; A_k = A (A_{k-1} + c_{k-1} I), c_k = -tr(A_k)/k.
inline std::vector<cdouble> characteristic_polynomial(const ComplexMatrix& a) {
    const std::size_t n = a.rows();
    std::vector<cdouble> coeff(n);
    ComplexMatrix ak = a;
    for (std::size_t k = 1; k <= n; ++k) {
        if (k > 1) {
            ComplexMatrix shifted = ak;
            for (std::size_t i = 0; i < n; ++i) shifted(i, i) += coeff[k - 2];
            ak = rml::matmul(a, shifted);
        }
        coeff[k - 1] = -ak.trace() / static_cast<double>(k);
    }
    return coeff;
}

// All roots of a monic polynomial by Durand-Kerner iteration.
inline std::vector<cdouble> polynomial_roots(const std::vector<cdouble>& coeff) {
    const std::size_t n = coeff.size();
    auto eval = [&](cdouble x) {
        cdouble p = 1.0;
        for (std::size_t k = 0; k < n; ++k) p = p * x + coeff[k];
        return p;
    };
    double radius = 1.0;
    for (const cdouble& c : coeff) radius = std::max(radius, std::abs(c));
    radius = 1.0 + radius;
    std::vector<cdouble> x(n);
    const cdouble w(0.4, 0.9);
    cdouble p = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        p *= w;
        x[i] = radius * p;
    }
    for (int it = 0; it < 2000; ++it) {
        double shift = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cdouble denom = 1.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) denom *= x[i] - x[j];
            const cdouble dx = eval(x[i]) / denom;
            x[i] -= dx;
            shift = std::max(shift, std::abs(dx));
        }
        if (shift < 1e-14 * radius) break;
    }
    return x;
}

// Greedy one-to-one matching of two equal-size multisets in C.
// Returns the largest pairing distance.
inline double multiset_match_distance(std::vector<cdouble> a, std::vector<cdouble> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    std::vector<bool> used(b.size(), false);
    for (const cdouble& va : a) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = b.size();
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (used[j]) continue;
            const double dist = std::abs(va - b[j]);
            if (dist < best) {
                best = dist;
                arg = j;
            }
        }
        used[arg] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

// Residual ||H v - lambda v|| for a unit v obtained by one inverse-iteration
// step at a slightly displaced shift; small output certifies lambda is within
// O(residual) of a true eigenvalue.
inline double eigen_residual(const ComplexMatrix& h, cdouble lambda) {
    const std::size_t n = h.rows();
    const double scale = rml::hs_norm(h);
    ComplexMatrix shifted = h;
    const cdouble mu = lambda + cdouble(0.0, 1e-11 * (scale > 0 ? scale : 1.0));
    for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= mu;
    rml::CounterRng rng(0x5eed, n);
    std::vector<cdouble> v(n);
    for (auto& c : v) c = cdouble(rng.next_gaussian(), rng.next_gaussian());
    const rml::LuFactors f = rml::lu_factor(shifted);
    if (f.singular) return 0.0;  // shift hit the eigenvalue exactly
    double vn = 0.0;
    for (int step = 0; step < 2; ++step) {
        v = rml::lu_solve(f, v);
        vn = 0.0;
        for (const cdouble& c : v) vn += std::norm(c);
        vn = std::sqrt(vn);
        for (cdouble& c : v) c /= vn;
        vn = 1.0;
    }
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cdouble acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += h(i, j) * v[j];
        res += std::norm(acc - lambda * v[i]);
    }
    return std::sqrt(res) / vn;
}

}  // namespace testsupport
