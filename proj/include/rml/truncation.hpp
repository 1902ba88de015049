#pragma once

#include <cstdint>

#include "rml/ensembles.hpp"
#include "rml/matrix.hpp"

namespace rml {

// Parameters of the tilde/hat truncation: entries are cut at n^delta, then
// recentered and rescaled back to variance 1/d. m2eta is the ensemble-wide
// max of E|xi|^(2+eta) that the closeness bounds are stated against.
struct TruncationParams {
    double delta = 0.01;
    double eta = 1.0;
    double m2eta = 1.0;
    std::size_t n = 1;

    double threshold() const;  // n^delta
    void validate() const;
};

// One entry law after truncation. transform() is the exact map applied to a
// draw x of the source law:
//   tilde = x * 1{|x| <= threshold} - center,   hat = tilde * scale_hat,
// so the hat law has mean 0 and variance exactly 1/d by construction.
struct TruncatedAtom {
    AtomDistribution source;
    double threshold = 0.0;
    cdouble center{};              // E[x 1{|x| <= threshold}], analytic
    double variance_tilde = 0.0;   // Var of the tilde law, analytic
    double scale_hat = 1.0;        // 1 / sqrt(d * variance_tilde)
    cdouble pseudo_tilde{};        // E[tilde^2], analytic

    cdouble transform(cdouble x) const {
        const cdouble kept = std::abs(x) <= threshold ? x : cdouble{};
        return scale_hat * (kept - center);
    }
    cdouble sample(CounterRng& rng) const { return transform(source.sample(rng)); }
    cdouble hat_pseudo_variance() const { return pseudo_tilde * (scale_hat * scale_hat); }
};

// Analytic truncated moments: exact sums for discrete support, closed forms
// from the error-function family for the Gaussian kinds. Throws domain_error
// when variance_tilde <= 1/(2d) (threshold below the usable range; the law
// needs a larger n before truncation behaves).
TruncatedAtom truncate_atom(const AtomDistribution& a, const TruncationParams& p);

struct TruncationBoundReport {
    double var_gap = 0.0;      // |1/d - variance_tilde|
    double var_bound = 0.0;    // 2 m2eta / n^(delta eta)
    bool var_pass = false;
    double corr_gap = 0.0;     // |E[hat^2]|: cross-correlation of conjugate-paired entries
    double corr_bound = 0.0;   // 10 sqrt(m2eta) / n^(delta eta / 2)
    bool corr_pass = false;
};

TruncationBoundReport truncation_bound_report(const AtomDistribution& a,
                                              const TruncationParams& p);

// Entrywise truncation of a sampled block matrix, block (s,t) transformed by
// the truncated law of spec.atom(s,t).
ComplexMatrix truncate_matrix(const ComplexMatrix& x, const BlockEnsembleSpec& spec,
                              const TruncationParams& p);

}  // namespace rml
