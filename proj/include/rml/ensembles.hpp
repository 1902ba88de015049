#pragma once

#include <cstdint>
#include <vector>

#include "rml/matrix.hpp"
#include "rml/rng.hpp"

namespace rml {

// Scalar atom law for one block entry. Built-ins are normalized so that the
// mean is exactly 0 and the variance exactly 1/d. discrete_custom may opt out
// of normalization (normalize = false keeps the support as given); such atoms
// are for truncation experiments and will fail validate() unless the raw
// variance already equals 1/d.
enum class AtomKind { BernoulliReal, GaussianReal, GaussianComplex, DiscreteCustom };

struct AtomDistribution {
    AtomKind kind = AtomKind::BernoulliReal;
    std::size_t d = 2;               // variance target is 1/d
    double scale = 1.0;              // multiplies raw draws / support points
    std::vector<cdouble> support;    // DiscreteCustom only, pre-scale
    std::vector<double> probs;

    static AtomDistribution bernoulli_real(std::size_t d);
    static AtomDistribution gaussian_real(std::size_t d);
    static AtomDistribution gaussian_complex(std::size_t d);
    static AtomDistribution discrete_custom(std::size_t d, std::vector<cdouble> support,
                                            std::vector<double> probs, bool normalize = true);

    bool is_complex() const;
    cdouble mean() const;
    double variance() const;          // E|xi|^2 - |E xi|^2
    cdouble pseudo_variance() const;  // E[xi^2]
    double abs_moment(double p) const;
    cdouble sample(CounterRng& rng) const;
    void validate() const;
};

enum class BlockMode { Independent, Quaternionic, CorrelatedDemo };

// d x d grid of atom laws plus the dependence mode across a block tuple.
// Independent and Quaternionic keep cross-entries uncorrelated; CorrelatedDemo
// deliberately does not (c0_compliant() exposes the flag).
struct BlockEnsembleSpec {
    std::size_t d = 2;
    std::vector<AtomDistribution> atoms;  // row-major, index s*d + t
    BlockMode mode = BlockMode::Independent;
    double moment_eta = 1.0;

    const AtomDistribution& atom(std::size_t s, std::size_t t) const { return atoms[s * d + t]; }
    bool c0_compliant() const { return mode != BlockMode::CorrelatedDemo; }
    void validate() const;

    static BlockEnsembleSpec independent(std::size_t d, const AtomDistribution& proto,
                                         double eta = 1.0);
    static BlockEnsembleSpec quaternionic(const AtomDistribution& proto, double eta = 1.0);
    static BlockEnsembleSpec correlated_demo(const AtomDistribution& proto, double eta = 1.0);
};

struct PerturbationSpec {
    double rank_exponent = 1.0;         // eps in (0,1]; rank <= ceil(n^(1-eps))
    double entry_bound_exponent = 0.0;  // alpha >= 0; |entries| <= n^alpha
    double hs_budget = 1.0;             // C >= 0; hs_norm^2 <= C*n^2
};

// Fills out[0..d*d) with one block tuple at position (i, j). Every entry draws
// from its own counter stream keyed by (seed, role, i, j), so sampling order
// never affects values.
void sample_block_tuple(const BlockEnsembleSpec& spec, std::uint64_t seed, std::uint64_t i,
                        std::uint64_t j, cdouble* out);

// dn x dn matrix whose (s,t) block holds x_{st;ij} at block position (i,j);
// the n^2 tuples are iid across (i,j) and deterministic in (spec, n, seed).
ComplexMatrix sample_c0_matrix(const BlockEnsembleSpec& spec, std::size_t n, std::uint64_t seed);

// n x n matrix of iid draws from one atom law.
ComplexMatrix sample_iid_matrix(const AtomDistribution& atom, std::size_t n, std::uint64_t seed);

// [[A, B], [-conj(B), conj(A)]] with entrywise conjugation.
ComplexMatrix quaternion_embed(const ComplexMatrix& a, const ComplexMatrix& b);

// [[A, A], [A, B]]: the dependent-but-identically-distributed counterexample.
ComplexMatrix build_correlated_demo(const ComplexMatrix& a, const ComplexMatrix& b);

struct CovarianceReport {
    std::size_t d = 0;
    std::size_t trials = 0;
    ComplexMatrix table;      // d^2 x d^2, entry (st, uv) = empirical E[xi_st conj(xi_uv)]
    double max_cross = 0.0;   // max |table(st, uv)| over (s,t) != (u,v)
    double threshold = 0.0;   // 4 / (d * sqrt(trials))
    bool pass = false;        // max_cross <= threshold
};

CovarianceReport covariance_check(const BlockEnsembleSpec& spec, std::size_t trials,
                                  std::uint64_t seed);

// Deterministic dn x dn matrix with rank <= ceil(n^(1-eps)), entries bounded
// by n^alpha in modulus, and squared Hilbert-Schmidt norm at most C*n^2.
ComplexMatrix low_rank_perturbation(const PerturbationSpec& p, std::size_t d, std::size_t n,
                                    std::uint64_t seed);

}  // namespace rml
