#include "rml/limitlaw.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rml/linalg.hpp"

namespace rml {

namespace {

constexpr double kAsymptoteHeight = 1e4;
constexpr double kInversionOffset = 1e-6;
constexpr double kResidualScale = 1e-12;
constexpr double kDensityClamp = 1e-9;
constexpr double kShellTol = 1e-8;
constexpr double kMaxHalfWidth = 512.0;

struct Cubic {
    cdouble c2, c1, c0;
    cdouble eval(cdouble m) const { return ((m + c2) * m + c1) * m + c0; }
    cdouble deriv(cdouble m) const { return (3.0 * m + 2.0 * c2) * m + c1; }
};

Cubic cubic_at(cdouble z, cdouble w) { return {2.0 * w, w * w - std::norm(z) + 1.0, w}; }

std::vector<cdouble> cubic_roots(const Cubic& c) {
    ComplexMatrix comp(3, 3);
    comp(0, 2) = -c.c0;
    comp(1, 0) = 1.0;
    comp(1, 2) = -c.c1;
    comp(2, 1) = 1.0;
    comp(2, 2) = -c.c2;
    return complex_eigen(comp).values;
}

cdouble newton_polish(const Cubic& c, cdouble m) {
    for (int it = 0; it < 50; ++it) {
        const cdouble df = c.deriv(m);
        if (std::abs(df) == 0.0) break;
        const cdouble step = c.eval(m) / df;
        m -= step;
        if (std::abs(step) <= 1e-16 * (1.0 + std::abs(m))) break;
    }
    return m;
}

// Walk the tracked root along the straight segment w_from -> w_to. A step is
// accepted only when the nearest root at the trial point is well separated
// from the runner-up and the jump stays inside the implicit-derivative
// envelope; otherwise the step is halved.
cdouble track_root(cdouble z, cdouble w_from, cdouble m, cdouble w_to, std::size_t& accepted) {
    const cdouble seg = w_to - w_from;
    if (std::abs(seg) == 0.0) return m;
    double s = 0.0;
    double ds = 0.25;
    while (s < 1.0) {
        ds = std::min(ds, 1.0 - s);
        const cdouble w_prev = w_from + s * seg;
        const cdouble w_next = w_from + (s + ds) * seg;
        const cdouble dpdw = 2.0 * m * m + 2.0 * w_prev * m + 1.0;
        const cdouble dpdm = cubic_at(z, w_prev).deriv(m);
        const double slope =
            std::abs(dpdm) < 1e-300 ? 1e300 : std::abs(dpdw) / std::abs(dpdm);
        const Cubic next = cubic_at(z, w_next);
        auto roots = cubic_roots(next);
        std::sort(roots.begin(), roots.end(),
                  [&](cdouble a, cdouble b) { return std::abs(a - m) < std::abs(b - m); });
        const double jump = std::abs(roots[0] - m);
        const double runner_up = std::abs(roots[1] - m);
        const double envelope = 10.0 * std::abs(ds * seg) * slope + 1e-9 * (1.0 + std::abs(m));
        // keep per-step motion small relative to the root itself, so a decoy
        // root drifting past the stale position cannot win the proximity vote
        const double relative_cap = 0.25 * std::abs(m) + 1e-9;
        if (jump <= 0.45 * runner_up && jump <= envelope && jump <= relative_cap) {
            m = newton_polish(next, roots[0]);
            s += ds;
            ++accepted;
            ds *= 2.0;
        } else {
            ds *= 0.5;
            if (ds * std::abs(seg) < 1e-13 * (1.0 + std::abs(w_to)))
                throw std::runtime_error(
                    "solve_cubic_m: branch ambiguity, roots indistinguishable along the path");
        }
    }
    return m;
}

// adaptive Simpson with function-value reuse
double simpson_step(cdouble z, double a, double fa, double b, double fb, double fm,
                    double whole, double tol, int depth) {
    const double mid = 0.5 * (a + b);
    const double lm = 0.5 * (a + mid), rm = 0.5 * (mid + b);
    const double flm = density_rho(z, lm), frm = density_rho(z, rm);
    const double left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0) return left + right;
    if (std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_step(z, a, fa, mid, fm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(z, mid, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

double integrate_density(cdouble z, double a, double b, double tol) {
    if (!(b > a)) return 0.0;
    const double fa = density_rho(z, a), fb = density_rho(z, b);
    const double fm = density_rho(z, 0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(z, a, fa, b, fb, fm, whole, tol, 24);
}

// One-sided bracket search: grow the half-width until the outer shell holds
// less than kShellTol of mass. Returns {half_width, mass on [0, half_width]}.
std::pair<double, double> bracket_support(cdouble z, double tol) {
    double half = 4.0;
    double mass = integrate_density(z, 0.0, half, tol);
    while (true) {
        const double shell = integrate_density(z, half, 2.0 * half, tol);
        if (2.0 * shell < kShellTol) break;
        mass += shell;
        half *= 2.0;
        if (half > kMaxHalfWidth)
            throw std::runtime_error("nu_z_cdf: support bracket search did not converge");
    }
    return {half, mass};
}

}  // namespace

CubicSolution solve_cubic_m(cdouble z, cdouble w) {
    if (!(w.imag() > 0.0))
        throw std::invalid_argument("solve_cubic_m: Im w must be positive");
    const cdouble w0{0.0, kAsymptoteHeight};
    CubicSolution sol;
    sol.z = z;
    sol.w = w;
    sol.branch_path_points = 1;
    cdouble m = newton_polish(cubic_at(z, w0), -1.0 / w0);
    m = track_root(z, w0, m, w, sol.branch_path_points);
    const Cubic target = cubic_at(z, w);
    m = newton_polish(target, m);
    sol.m = m;
    sol.residual = std::abs(target.eval(m));
    const double abs_w = std::abs(w);
    const double bound = kResidualScale * (1.0 + abs_w) * (1.0 + abs_w) * (1.0 + abs_w);
    if (!(sol.residual <= bound))
        throw std::runtime_error("solve_cubic_m: residual certification failed");
    if (!(m.imag() > 0.0))
        throw std::runtime_error("solve_cubic_m: tracked root left the upper half-plane");
    return sol;
}

double density_rho(cdouble z, double x) {
    const CubicSolution sol = solve_cubic_m(z, cdouble{x, kInversionOffset});
    const double rho = sol.m.imag() / std::numbers::pi;
    return rho < kDensityClamp ? 0.0 : rho;
}

void LimitDensity::validate() const {
    if (grid.empty()) throw std::invalid_argument("limit density: empty grid");
    if (!(half_width > 0.0)) throw std::invalid_argument("limit density: bad half width");
    const std::size_t n = grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n && !(grid[i].first < grid[i + 1].first))
            throw std::invalid_argument("limit density: grid must ascend");
        if (grid[i].second < 0.0)
            throw std::invalid_argument("limit density: negative density");
        if (grid[i].second > 1.0 + 1e-6)
            throw std::invalid_argument("limit density: density exceeds 1");
        if (std::abs(grid[i].second - grid[n - 1 - i].second) > 1e-9)
            throw std::invalid_argument("limit density: not even in x");
    }
    if (std::abs(total_mass - 1.0) > 1e-6)
        throw std::invalid_argument("limit density: mass must be 1");
}

LimitDensity tabulate_limit_density(cdouble z, std::size_t points) {
    if (points < 3) throw std::invalid_argument("tabulate_limit_density: need >= 3 points");
    const double tol = 1e-9;
    const auto [half, mass_one_side] = bracket_support(z, tol);
    LimitDensity out;
    out.z = z;
    out.half_width = half;
    out.total_mass = 2.0 * mass_one_side;
    const double center = 0.5 * static_cast<double>(points - 1);
    const double step = 2.0 * half / static_cast<double>(points - 1);
    out.grid.reserve(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double x = (static_cast<double>(k) - center) * step;
        out.grid.emplace_back(x, density_rho(z, x));
    }
    return out;
}

double nu_z_cdf(cdouble z, double x) {
    const double tol = 1e-9;
    const auto [half, mass_one_side] = bracket_support(z, tol);
    const double total = 2.0 * mass_one_side;
    if (x >= half) return total;
    if (x <= -half) return 0.0;
    if (x >= 0.0) return mass_one_side + integrate_density(z, 0.0, std::min(x, half), tol);
    return mass_one_side - integrate_density(z, 0.0, std::min(-x, half), tol);
}

double g_limit(double s, double t) {
    const double r2 = s * s + t * t;
    return r2 > 1.0 ? 2.0 * s / r2 : 2.0 * s;
}

double circular_radial_cdf(double r) {
    if (r < 0.0) throw std::invalid_argument("circular_radial_cdf: r must be nonnegative");
    const double c = std::min(r, 1.0);
    return c * c;
}

}  // namespace rml
