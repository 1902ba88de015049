#include "rml/truncation.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rml {

namespace {

// E[g^2 1{|g| <= a}] for a standard real Gaussian.
double gaussian_second_trunc(double a) {
    return std::erf(a / std::numbers::sqrt2) -
           std::sqrt(2.0 / std::numbers::pi) * a * std::exp(-0.5 * a * a);
}

}  // namespace

double TruncationParams::threshold() const {
    return std::pow(static_cast<double>(n), delta);
}

void TruncationParams::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw std::invalid_argument("truncation: delta must be positive");
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("truncation: eta must be positive");
    if (!(m2eta > 0.0) || !std::isfinite(m2eta))
        throw std::invalid_argument("truncation: m2eta must be positive finite");
    if (n == 0) throw std::invalid_argument("truncation: n must be >= 1");
}

TruncatedAtom truncate_atom(const AtomDistribution& a, const TruncationParams& p) {
    p.validate();
    const double dd = static_cast<double>(a.d);
    if (p.m2eta < std::pow(1.0 / dd, 1.0 + 0.5 * p.eta) * (1.0 - 1e-12))
        throw std::invalid_argument("truncation: m2eta below the (1/d)^(1+eta/2) floor");

    TruncatedAtom t;
    t.source = a;
    t.threshold = p.threshold();
    const double T = t.threshold;

    // A bounded atom that is fully retained and already normalized passes
    // through untouched: snap to the exact identity instead of multiplying
    // by 1/sqrt(d * vt) with vt off by rounding.
    bool all_retained = false;
    if (a.kind == AtomKind::BernoulliReal) {
        all_retained = a.scale <= T;
    } else if (a.kind == AtomKind::DiscreteCustom) {
        all_retained = true;
        for (const cdouble& x : a.support)
            if (std::abs(a.scale * x) > T) all_retained = false;
    }
    if (all_retained && std::abs(a.mean()) <= 1e-12 &&
        std::abs(dd * a.variance() - 1.0) <= 1e-9) {
        t.center = cdouble{};
        t.variance_tilde = 1.0 / dd;
        t.pseudo_tilde = a.pseudo_variance();
        t.scale_hat = 1.0;
        return t;
    }

    cdouble center{};
    double abs2 = 0.0;  // E[|x|^2 1]
    cdouble sq{};       // E[x^2 1]
    switch (a.kind) {
        case AtomKind::BernoulliReal:
            if (a.scale <= T) {
                abs2 = a.scale * a.scale;
                sq = abs2;
            }
            break;
        case AtomKind::GaussianReal: {
            const double m2 = gaussian_second_trunc(T / a.scale);
            abs2 = a.scale * a.scale * m2;
            sq = abs2;
            break;
        }
        case AtomKind::GaussianComplex: {
            // |x|^2 = scale^2 * chi^2_2; E[|x|^2 1{|x| <= T}] via the
            // exponential tail, E[x^2 1] = 0 by rotation invariance
            const double r2 = T * T / (a.scale * a.scale);
            abs2 = 2.0 * a.scale * a.scale * (1.0 - (1.0 + 0.5 * r2) * std::exp(-0.5 * r2));
            break;
        }
        case AtomKind::DiscreteCustom:
            for (std::size_t i = 0; i < a.support.size(); ++i) {
                const cdouble x = a.scale * a.support[i];
                if (std::abs(x) <= T) {
                    center += a.probs[i] * x;
                    abs2 += a.probs[i] * std::norm(x);
                    sq += a.probs[i] * x * x;
                }
            }
            break;
    }

    t.center = center;
    t.variance_tilde = abs2 - std::norm(center);
    t.pseudo_tilde = sq - center * center;
    if (!(t.variance_tilde > 0.5 / dd)) {
        std::ostringstream os;
        os << "truncate_atom: degenerate truncation, variance_tilde = " << t.variance_tilde
           << " <= 1/(2d) = " << 0.5 / dd << " at threshold " << T;
        throw std::domain_error(os.str());
    }
    t.scale_hat = 1.0 / std::sqrt(dd * t.variance_tilde);
    return t;
}

TruncationBoundReport truncation_bound_report(const AtomDistribution& a,
                                              const TruncationParams& p) {
    const TruncatedAtom t = truncate_atom(a, p);
    TruncationBoundReport r;
    const double nd = static_cast<double>(p.n);
    r.var_gap = std::abs(1.0 / static_cast<double>(a.d) - t.variance_tilde);
    r.var_bound = 2.0 * p.m2eta / std::pow(nd, p.delta * p.eta);
    r.var_pass = r.var_gap <= r.var_bound;
    r.corr_gap = std::abs(t.hat_pseudo_variance());
    r.corr_bound = 10.0 * std::sqrt(p.m2eta) / std::pow(nd, 0.5 * p.delta * p.eta);
    r.corr_pass = r.corr_gap <= r.corr_bound;
    return r;
}

ComplexMatrix truncate_matrix(const ComplexMatrix& x, const BlockEnsembleSpec& spec,
                              const TruncationParams& p) {
    spec.validate();
    const std::size_t d = spec.d;
    if (x.rows() != x.cols() || x.rows() % d != 0)
        throw std::invalid_argument("truncate_matrix: matrix size is not a multiple of d");
    const std::size_t n = x.rows() / d;
    ComplexMatrix out(x.rows(), x.cols());
    for (std::size_t s = 0; s < d; ++s)
        for (std::size_t t = 0; t < d; ++t) {
            const TruncatedAtom ta = truncate_atom(spec.atom(s, t), p);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    out(s * n + i, t * n + j) = ta.transform(x(s * n + i, t * n + j));
        }
    return out;
}

}  // namespace rml
