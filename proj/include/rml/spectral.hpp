#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rml/matrix.hpp"

namespace rml {

// Weighted point measure on the complex plane (or the real line, with
// imaginary parts zero).
struct EmpiricalMeasure {
    std::vector<std::pair<cdouble, double>> atoms;  // (position, weight)
    bool normalized = false;
    void validate() const;  // weights > 0; if normalized, total within 1e-12 of 1
};

// Right-continuous step CDF: value_at(x) = cum[i] for the largest xs[i] <= x.
struct StepCdf {
    std::vector<double> xs;   // strictly ascending jump points
    std::vector<double> cum;  // nondecreasing, back() == 1

    double value_at(double x) const;
    double left_limit(double x) const;
    void validate() const;

    // Merges duplicate positions and normalizes weights to total mass 1.
    static StepCdf from_points(std::vector<std::pair<double, double>> weighted);
    static StepCdf from_measure(const EmpiricalMeasure& m);  // real positions required
};

// Continuous nondecreasing reference CDF, defined on all of R (flat outside
// its support). Continuity is what the distance routines rely on: it makes
// endpoint evaluation over each step-constancy interval exact.
struct AnalyticCdf {
    std::function<double(double)> f;
};

struct ResolventSummary {
    cdouble m_hat{};
    cdouble block_trace_upper_left{};
    cdouble block_trace_lower_right{};
    bool has_block_traces = false;  // direct inversion only for carriers <= 64
    cdouble w{};
    cdouble z{};
};

// Eigenvalue measure of M/normalization with uniform weights.
EmpiricalMeasure esd(const ComplexMatrix& m, double normalization);

// CDF of |lambda| under the measure. The circular-law reference is min(r,1)^2.
StepCdf radial_cdf(const EmpiricalMeasure& m);

// nu of M/normalization - zI: atoms at +-sigma_i, each with weight 1/(2n).
EmpiricalMeasure symmetrized_singular_measure(const ComplexMatrix& m, cdouble z,
                                              double normalization);

// [[0, B], [B*, 0]] with B = M/normalization - zI; Hermitian by construction,
// spectrum {+-sigma_i(B)}.
ComplexMatrix hermitization(const ComplexMatrix& m, cdouble z, double normalization);

// inf{eps : F(x-eps)-eps <= G(x) <= F(x+eps)+eps for all x}. Step/step is
// exact (feasibility checked at jump points, bisected to 1e-13). Step/analytic
// adds the documented 2e-6 resolution bound to the reported value.
double levy_distance(const StepCdf& f, const StepCdf& g);
double levy_distance(const StepCdf& f, const AnalyticCdf& g);
inline double levy_distance(const AnalyticCdf& f, const StepCdf& g) {
    return levy_distance(g, f);
}

// sup_x |F(x) - G(x)|, exact at jump points (and one-sided limits).
double kolmogorov_distance(const StepCdf& f, const StepCdf& g);
double kolmogorov_distance(const StepCdf& f, const AnalyticCdf& g);
inline double kolmogorov_distance(const AnalyticCdf& f, const StepCdf& g) {
    return kolmogorov_distance(g, f);
}

// m_hat = (1/(2n')) sum_i [1/(sigma_i - w) + 1/(-sigma_i - w)] over the
// singular values of M/normalization - zI (n' = rows of M). Block traces of
// (H - w)^{-1} are filled by direct inversion when n' <= 64.
ResolventSummary empirical_stieltjes(const ComplexMatrix& m, cdouble z, cdouble w,
                                     double normalization);

// (1/n') sum_i log sigma_i^2 of M/normalization - zI; throws domain_error when
// sigma_min < 1e-13.
double log_potential(const ComplexMatrix& m, cdouble z, double normalization);

// Central difference of the log-potential in the real part of z.
double g_emp(const ComplexMatrix& m, double s, double t, double h, double normalization);

}  // namespace rml
