#include "rml/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rml {

namespace {

constexpr double kDeflate = 1e-14;   // subdiagonal deflation, relative to neighbors
constexpr int kMaxSweeps = 40;       // per eigenvalue

void require_square(const ComplexMatrix& m, const char* who) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
        std::ostringstream os;
        os << who << ": matrix must be square and nonempty, got " << m.rows() << "x" << m.cols();
        throw std::invalid_argument(os.str());
    }
}

void require_finite(const ComplexMatrix& m, const char* who) {
    if (!m.all_finite()) throw std::invalid_argument(std::string(who) + ": non-finite entry");
}

// Complex Householder generator, LAPACK zlarfg convention: given (alpha, x)
// produces real beta, complex tau and v (with implicit v[0] = 1) such that
// (I - tau v v*) [alpha; x] = [beta; 0].
struct Reflector {
    double beta = 0.0;
    cdouble tau{0.0, 0.0};
};

Reflector make_reflector(cdouble alpha, cdouble* x, std::size_t m) {
    double xnorm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) xnorm2 += std::norm(x[i]);
    Reflector r;
    if (xnorm2 == 0.0 && alpha.imag() == 0.0) {
        r.beta = alpha.real();
        r.tau = 0.0;
        return r;
    }
    const double anorm = std::sqrt(std::norm(alpha) + xnorm2);
    r.beta = alpha.real() >= 0.0 ? -anorm : anorm;
    r.tau = cdouble{(r.beta - alpha.real()) / r.beta, -alpha.imag() / r.beta};
    const cdouble scale = 1.0 / (alpha - r.beta);
    for (std::size_t i = 0; i < m; ++i) x[i] *= scale;
    return r;
}

// Implicitly shifted QL with Wilkinson shift on a real symmetric tridiagonal
// (d, e); d holds the eigenvalues on return.
void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = d.size();
    if (n == 0) return;
    e.resize(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        while (true) {
            std::size_t m = l;
            while (m + 1 < n) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= kDeflate * dd) break;
                ++m;
            }
            if (m == l) break;
            if (++iter > kMaxSweeps) {
                std::ostringstream os;
                os << "hermitian_eigen: eigenvalue " << l << " did not converge after "
                   << kMaxSweeps << " sweeps";
                throw std::runtime_error(os.str());
            }
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0, c = 1.0, p = 0.0;
            bool underflow_split = false;
            for (std::size_t i = m; i-- > l;) {
                double f = s * e[i];
                const double b = c * e[i];
                r = std::hypot(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow_split = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if (underflow_split) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    std::sort(d.begin(), d.end());
}

// Complex Givens rotation [c s; -conj(s) c] with real c mapping (f, g) to (r, 0).
struct Givens {
    double c = 1.0;
    cdouble s{0.0, 0.0};
    cdouble r{0.0, 0.0};
};

Givens make_givens(cdouble f, cdouble g) {
    Givens gv;
    const double af = std::abs(f), ag = std::abs(g);
    if (ag == 0.0) {
        gv.r = f;
        return gv;
    }
    if (af == 0.0) {
        gv.c = 0.0;
        gv.s = std::conj(g) / ag;
        gv.r = ag;
        return gv;
    }
    const double denom = std::hypot(af, ag);
    const cdouble fphase = f / af;
    gv.c = af / denom;
    gv.s = fphase * std::conj(g) / denom;
    gv.r = fphase * denom;
    return gv;
}

}  // namespace

std::vector<double> hermitian_eigen(const ComplexMatrix& h) {
    require_square(h, "hermitian_eigen");
    require_finite(h, "hermitian_eigen");
    const std::size_t n = h.rows();
    const double scale = hs_norm(h);
    const double herm_tol = 1e-12 * scale;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            if (std::abs(h(i, j) - std::conj(h(j, i))) > herm_tol)
                throw std::invalid_argument("hermitian_eigen: input is not Hermitian");

    ComplexMatrix a = h;
    std::vector<double> d(n), e(n, 0.0);
    std::vector<cdouble> v(n), p(n), w(n);

    // Householder reduction to tridiagonal form; reflectors act on the
    // trailing block only, so the subdiagonal comes out real (zlarfg form).
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const std::size_t m = n - k - 1;  // trailing block size
        for (std::size_t i = 0; i < m - 1; ++i) v[i + 1] = a(k + 2 + i, k);
        Reflector refl = make_reflector(a(k + 1, k), v.data() + 1, m - 1);
        e[k] = refl.beta;
        if (refl.tau == cdouble{}) {
            a(k + 1, k) = refl.beta;
            continue;
        }
        v[0] = 1.0;
        // trailing block update A22 <- H* A22 H (H* annihilates the column):
        // p = tau A22 v, w = p - (tau/2)(p* v) v, A22 -= v w* + w v*
        for (std::size_t i = 0; i < m; ++i) {
            const cdouble* row = a.row(k + 1 + i) + (k + 1);
            cdouble acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += row[j] * v[j];
            p[i] = refl.tau * acc;
        }
        cdouble pv = 0.0;
        for (std::size_t i = 0; i < m; ++i) pv += std::conj(p[i]) * v[i];
        const cdouble half = 0.5 * refl.tau * pv;
        for (std::size_t i = 0; i < m; ++i) w[i] = p[i] - half * v[i];
        // A22 -= v w* + w v*
        for (std::size_t i = 0; i < m; ++i) {
            cdouble* row = a.row(k + 1 + i) + (k + 1);
            const cdouble vi = v[i], wi = w[i];
            for (std::size_t j = 0; j < m; ++j)
                row[j] -= vi * std::conj(w[j]) + wi * std::conj(v[j]);
        }
        a(k + 1, k) = refl.beta;
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i).real();
    if (n >= 2) e[n - 2] = std::abs(a(n - 1, n - 2));

    tridiagonal_ql(d, e);
    return d;
}

EigenResult complex_eigen(const ComplexMatrix& m0) {
    require_square(m0, "complex_eigen");
    require_finite(m0, "complex_eigen");
    const std::size_t n = m0.rows();
    ComplexMatrix a = m0;
    std::vector<cdouble> v(n);

    // Householder reduction to upper Hessenberg form (unitary similarity).
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const std::size_t m = n - k - 1;
        for (std::size_t i = 0; i < m - 1; ++i) v[i + 1] = a(k + 2 + i, k);
        Reflector refl = make_reflector(a(k + 1, k), v.data() + 1, m - 1);
        if (refl.tau == cdouble{}) {
            a(k + 1, k) = refl.beta;
            continue;
        }
        v[0] = 1.0;
        // similarity A <- H* A H; H* = I - conj(tau) v v* annihilates the column
        for (std::size_t j = k + 1; j < n; ++j) {
            cdouble s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += std::conj(v[i]) * a(k + 1 + i, j);
            s *= std::conj(refl.tau);
            for (std::size_t i = 0; i < m; ++i) a(k + 1 + i, j) -= s * v[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            cdouble* row = a.row(i) + (k + 1);
            cdouble s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += row[j] * v[j];
            s *= refl.tau;
            for (std::size_t j = 0; j < m; ++j) row[j] -= s * std::conj(v[j]);
        }
        a(k + 1, k) = refl.beta;
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }

    EigenResult result;
    result.values.reserve(n);
    int sweeps_total = 0;

    // Implicit single-shift QR on the Hessenberg form.
    std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(n) - 1;
    int iter_this = 0;
    while (hi >= 0) {
        // deflation scan for the top of the active window
        std::ptrdiff_t lo = hi;
        while (lo > 0) {
            const double dd = std::abs(a(lo - 1, lo - 1)) + std::abs(a(lo, lo));
            if (std::abs(a(lo, lo - 1)) <= kDeflate * dd) {
                a(lo, lo - 1) = 0.0;
                break;
            }
            --lo;
        }
        if (lo == hi) {
            result.values.push_back(a(hi, hi));
            --hi;
            iter_this = 0;
            continue;
        }
        if (hi - lo == 1) {
            // closed-form 2x2
            const cdouble p = a(lo, lo), q = a(lo, hi), r = a(hi, lo), s = a(hi, hi);
            const cdouble half = 0.5 * (p + s);
            const cdouble disc = std::sqrt(0.25 * (p - s) * (p - s) + q * r);
            result.values.push_back(half + disc);
            result.values.push_back(half - disc);
            hi -= 2;
            iter_this = 0;
            continue;
        }
        ++sweeps_total;
        if (++iter_this > kMaxSweeps) {
            std::ostringstream os;
            os << "complex_eigen: eigenvalue " << hi << " did not converge after " << kMaxSweeps
               << " sweeps (" << sweeps_total << " total)";
            throw std::runtime_error(os.str());
        }

        // Wilkinson shift: trailing 2x2 eigenvalue nearer to the corner;
        // every 10th stalled sweep takes an exceptional shift instead.
        cdouble mu;
        const cdouble aa = a(hi - 1, hi - 1), bb = a(hi - 1, hi), cc = a(hi, hi - 1),
                      dq = a(hi, hi);
        if (iter_this % 10 == 0) {
            mu = dq + 0.75 * std::abs(cc);
        } else {
            const cdouble half = 0.5 * (aa + dq);
            const cdouble disc = std::sqrt(0.25 * (aa - dq) * (aa - dq) + bb * cc);
            const cdouble mu1 = half + disc, mu2 = half - disc;
            mu = std::abs(mu1 - dq) <= std::abs(mu2 - dq) ? mu1 : mu2;
        }

        // bulge chase
        cdouble f = a(lo, lo) - mu;
        cdouble g = a(lo + 1, lo);
        for (std::ptrdiff_t k = lo; k < hi; ++k) {
            if (k > lo) {
                f = a(k, k - 1);
                g = a(k + 1, k - 1);
            }
            const Givens gv = make_givens(f, g);
            if (k > lo) {
                a(k, k - 1) = gv.r;
                a(k + 1, k - 1) = 0.0;
            }
            for (std::ptrdiff_t j = k; j <= hi; ++j) {
                const cdouble h1 = a(k, j), h2 = a(k + 1, j);
                a(k, j) = gv.c * h1 + gv.s * h2;
                a(k + 1, j) = -std::conj(gv.s) * h1 + gv.c * h2;
            }
            const std::ptrdiff_t imax = std::min(k + 2, hi);
            for (std::ptrdiff_t i = lo; i <= imax; ++i) {
                const cdouble h1 = a(i, k), h2 = a(i, k + 1);
                a(i, k) = gv.c * h1 + std::conj(gv.s) * h2;
                a(i, k + 1) = -gv.s * h1 + gv.c * h2;
            }
        }
    }

    std::sort(result.values.begin(), result.values.end(), [](cdouble x, cdouble y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    result.converged = true;
    result.sweeps = sweeps_total;
    return result;
}

std::vector<double> singular_values(const ComplexMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0)
        throw std::invalid_argument("singular_values: empty matrix");
    const std::size_t r = m.rows(), c = m.cols(), n = r + c;
    ComplexMatrix j(n, n);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < c; ++k) {
            j(i, r + k) = m(i, k);
            j(r + k, i) = std::conj(m(i, k));
        }
    std::vector<double> ev = hermitian_eigen(j);  // ascending, +-sigma pairs
    const std::size_t ns = std::min(r, c);
    std::vector<double> s(ns);
    for (std::size_t i = 0; i < ns; ++i) s[i] = std::max(0.0, ev[n - 1 - i]);
    return s;  // descending
}

std::pair<double, double> norms(const ComplexMatrix& m) {
    const double hs = hs_norm(m);
    const std::vector<double> s = singular_values(m);
    return {hs, s.empty() ? 0.0 : s.front()};
}

LuFactors lu_factor(const ComplexMatrix& m) {
    require_square(m, "lu_factor");
    const std::size_t n = m.rows();
    LuFactors f;
    f.lu = m;
    f.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = static_cast<int>(i);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(f.lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double cand = std::abs(f.lu(i, k));
            if (cand > best) {
                best = cand;
                piv = i;
            }
        }
        if (best == 0.0) {
            f.singular = true;
            continue;
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.sign = -f.sign;
        }
        const cdouble pivot = f.lu(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const cdouble l = f.lu(i, k) / pivot;
            f.lu(i, k) = l;
            if (l == cdouble{}) continue;
            const cdouble* rk = f.lu.row(k);
            cdouble* ri = f.lu.row(i);
            for (std::size_t j = k + 1; j < n; ++j) ri[j] -= l * rk[j];
        }
    }
    return f;
}

std::vector<cdouble> lu_solve(const LuFactors& f, std::vector<cdouble> b) {
    const std::size_t n = f.lu.rows();
    if (b.size() != n) throw std::invalid_argument("lu_solve: rhs size mismatch");
    if (f.singular) throw std::runtime_error("lu_solve: singular matrix");
    std::vector<cdouble> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[static_cast<std::size_t>(f.perm[i])];
    for (std::size_t i = 1; i < n; ++i) {
        cdouble s = x[i];
        const cdouble* ri = f.lu.row(i);
        for (std::size_t j = 0; j < i; ++j) s -= ri[j] * x[j];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        cdouble s = x[i];
        const cdouble* ri = f.lu.row(i);
        for (std::size_t j = i + 1; j < n; ++j) s -= ri[j] * x[j];
        x[i] = s / ri[i];
    }
    return x;
}

ComplexMatrix inverse(const ComplexMatrix& m) {
    const std::size_t n = m.rows();
    const LuFactors f = lu_factor(m);
    if (f.singular) throw std::runtime_error("inverse: singular matrix");
    ComplexMatrix inv(n, n);
    std::vector<cdouble> e(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), cdouble{});
        e[j] = 1.0;
        const std::vector<cdouble> col = lu_solve(f, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

double log_abs_det(const ComplexMatrix& m) {
    const LuFactors f = lu_factor(m);
    if (f.singular) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += std::log(std::abs(f.lu(i, i)));
    return s;
}

}  // namespace rml
