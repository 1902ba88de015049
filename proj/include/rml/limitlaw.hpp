#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "rml/matrix.hpp"

namespace rml {

// Root of m^3 + 2w m^2 + (w^2 - |z|^2 + 1) m + w = 0 on the upper half-plane,
// selected by continuation from the -1/w asymptote at w = i*1e4. The residual
// is certified against 1e-12 * (1 + |w|)^3 before the solution is returned.
struct CubicSolution {
    cdouble z;
    cdouble w;
    cdouble m;
    double residual = 0.0;
    std::size_t branch_path_points = 0;
};

CubicSolution solve_cubic_m(cdouble z, cdouble w);

// Im m(z, x + i*1e-6) / pi, clamped to 0 below 1e-9.
double density_rho(cdouble z, double x);

// Density table over a symmetric bracket [-half_width, half_width] found by
// doubling until the shell mass drops below 1e-8.
struct LimitDensity {
    cdouble z;
    std::vector<std::pair<double, double>> grid;  // (x, rho), x ascending
    double half_width = 0.0;
    double total_mass = 0.0;
    void validate() const;
};

LimitDensity tabulate_limit_density(cdouble z, std::size_t points);

// distribution function of the symmetrized singular-value limit at z
double nu_z_cdf(cdouble z, double x);

// radial slope of the limiting log-potential at s + it
double g_limit(double s, double t);

// radial distribution function of the uniform unit-disk law
double circular_radial_cdf(double r);

}  // namespace rml
