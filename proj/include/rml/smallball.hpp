#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rml/ensembles.hpp"
#include "rml/matrix.hpp"

namespace rml {

// Generalized arithmetic progression in C^dim: offset + sum k_i * generator_i
// with bounds.first <= k_i <= bounds.second.
struct Gap {
    std::vector<cdouble> offset;
    std::vector<std::vector<cdouble>> generators;
    std::vector<std::pair<long long, long long>> bounds;

    std::size_t rank() const { return generators.size(); }
    std::size_t dim() const { return offset.size(); }
    bool symmetric() const;      // offset 0 and bounds of the form [-K, K]
    long long volume() const;    // product of (hi - lo + 1)
    void validate() const;

    static Gap symmetric_rank1(cdouble g, long long k);
};

struct GapElement {
    std::vector<cdouble> point;
    std::vector<long long> coeffs;
};

// Exhaustive element list in lexicographic coefficient order (volume <= 1e6).
std::vector<GapElement> gap_elements(const Gap& q);

// True when the volume-many coefficient tuples hit pairwise distinct points.
bool gap_proper(const Gap& q);

// Closest element within distance delta, ties broken by coefficient tuple.
std::optional<GapElement> gap_membership(const Gap& q, const std::vector<cdouble>& x,
                                         double delta);

// Bounds scaled by n >= 1; requires a symmetric gap.
Gap gap_dilate(const Gap& q, long long n);

// Dense degree-D array of side n: entries indexed by (i_1, ..., i_D).
struct CoefficientArray {
    std::size_t degree = 0;
    std::size_t side = 0;
    std::vector<cdouble> entries;  // row-major, size side^degree

    static CoefficientArray zeros(std::size_t degree, std::size_t side);
    std::size_t flat(const std::vector<std::size_t>& idx) const;
    cdouble& at(const std::vector<std::size_t>& idx) { return entries[flat(idx)]; }
    const cdouble& at(const std::vector<std::size_t>& idx) const { return entries[flat(idx)]; }
    void validate() const;
};

struct SmallBallResult {
    double rho = 0.0;
    cdouble center;
    std::string method;          // exact-enumeration | dp-lattice | monte-carlo
    std::uint64_t hits = 0;      // exact methods over equal-weight atoms
    std::uint64_t total = 0;     //   ... rho == hits / total
    std::uint64_t trials = 0;    // monte-carlo sample count
    double ci_half_width = 0.0;  // monte-carlo 95% half-width
};

struct SmallBallOptions {
    enum class Method { automatic, enumeration, lattice, monte_carlo };
    Method method = Method::automatic;
    std::uint64_t trials = 200000;  // monte-carlo only
    std::uint64_t seed = 1;
    unsigned workers = 1;  // enumeration chunking; result independent of the split
};

// sup over centers z of P(|sum_k a_k xi_k - z| <= beta).
SmallBallResult linear_smallball(const std::vector<cdouble>& a, const AtomDistribution& atom,
                                 double beta);
SmallBallResult linear_smallball(const std::vector<cdouble>& a, const AtomDistribution& atom,
                                 double beta, const SmallBallOptions& opt);

// sup over scalar centers of the degree-D form over independent variable
// groups x_1..x_D, plus an optional fixed degree-(D-1) form in x_1..x_{D-1}.
SmallBallResult multilinear_smallball(const CoefficientArray& a, const AtomDistribution& atom,
                                      double beta);
SmallBallResult multilinear_smallball(const CoefficientArray& a, const AtomDistribution& atom,
                                      double beta, const std::optional<CoefficientArray>& shift,
                                      const SmallBallOptions& opt);

struct PigeonholeReport {
    double bound = 0.0;                // 1 / |n-fold dilate value set|
    double rho = 0.0;                  // exact small-ball probability at beta = 0
    std::uint64_t value_set_size = 0;  // distinct points of the dilated gap
    bool verified = false;             // rho >= bound
};

// Coefficients default to n copies of the generator sum; explicit sequences
// must lie in q exactly.
PigeonholeReport pigeonhole_bound(const Gap& q, std::size_t n, const AtomDistribution& atom);
PigeonholeReport pigeonhole_bound(const Gap& q, std::size_t n, const AtomDistribution& atom,
                                  const std::vector<cdouble>& coefficients);

// Nonzero integer vector alpha with sum_i alpha_i * coords_i = 0, built from
// signed maximal minors, falling back to an exact integer kernel when those
// all vanish. Result is gcd-reduced with its first nonzero entry positive.
std::vector<long long> gap_integer_relation(const std::vector<std::vector<long long>>& coords);

struct DecouplingReport {
    std::size_t d = 0;
    std::size_t n = 0;
    double beta = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> partition;  // U_1..U_d over 0..n-1
    double rho_hat = 0.0;
    cdouble center;                 // maximizer found for the plain form
    double rho_power = 0.0;         // rho_hat^(2d)
    double rho_decoupled_hat = 0.0;
    double decoupled_radius = 0.0;  // beta * max(1, sqrt(log n))
    double ratio = 0.0;             // rho_decoupled_hat / rho_power
    double ratio_ci_half_width = 0.0;
};

// Monte Carlo comparison of the determinant-form concentration against its
// decoupled, difference-variable restriction over a fixed ordered partition.
DecouplingReport decoupling_check(const BlockEnsembleSpec& spec, std::size_t n, double beta,
                                  std::uint64_t trials, std::uint64_t seed);

}  // namespace rml
