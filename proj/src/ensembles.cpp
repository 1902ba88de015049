#include "rml/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rml {

namespace {

constexpr double kMeanTol = 1e-12;
constexpr double kVarRelTol = 1e-9;

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed,
                                            std::uint64_t role) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    CounterRng rng(seed, role, 0, 0);
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
        std::swap(p[i], p[j]);
    }
    return p;
}

}  // namespace

AtomDistribution AtomDistribution::bernoulli_real(std::size_t d) {
    AtomDistribution a;
    a.kind = AtomKind::BernoulliReal;
    a.d = d;
    a.scale = 1.0 / std::sqrt(static_cast<double>(d));
    return a;
}

AtomDistribution AtomDistribution::gaussian_real(std::size_t d) {
    AtomDistribution a;
    a.kind = AtomKind::GaussianReal;
    a.d = d;
    a.scale = 1.0 / std::sqrt(static_cast<double>(d));
    return a;
}

AtomDistribution AtomDistribution::gaussian_complex(std::size_t d) {
    AtomDistribution a;
    a.kind = AtomKind::GaussianComplex;
    a.d = d;
    a.scale = 1.0 / std::sqrt(2.0 * static_cast<double>(d));
    return a;
}

AtomDistribution AtomDistribution::discrete_custom(std::size_t d, std::vector<cdouble> support,
                                                   std::vector<double> probs, bool normalize) {
    if (support.empty() || support.size() != probs.size())
        throw std::invalid_argument("discrete_custom: support/probs size mismatch");
    AtomDistribution a;
    a.kind = AtomKind::DiscreteCustom;
    a.d = d;
    a.support = std::move(support);
    a.probs = std::move(probs);
    if (normalize) {
        cdouble m{};
        double m2 = 0.0;
        for (std::size_t i = 0; i < a.support.size(); ++i) {
            m += a.probs[i] * a.support[i];
            m2 += a.probs[i] * std::norm(a.support[i]);
        }
        const double var = m2 - std::norm(m);
        if (!(var > 0.0))
            throw std::invalid_argument("discrete_custom: zero variance, cannot normalize");
        a.scale = 1.0 / std::sqrt(static_cast<double>(d) * var);
    }
    return a;
}

bool AtomDistribution::is_complex() const {
    if (kind == AtomKind::GaussianComplex) return true;
    if (kind != AtomKind::DiscreteCustom) return false;
    for (const cdouble& x : support)
        if (x.imag() != 0.0) return true;
    return false;
}

cdouble AtomDistribution::mean() const {
    if (kind != AtomKind::DiscreteCustom) return {};
    cdouble m{};
    for (std::size_t i = 0; i < support.size(); ++i) m += probs[i] * support[i];
    return scale * m;
}

double AtomDistribution::variance() const {
    switch (kind) {
        case AtomKind::BernoulliReal:
        case AtomKind::GaussianReal:
            return scale * scale;
        case AtomKind::GaussianComplex:
            return 2.0 * scale * scale;
        case AtomKind::DiscreteCustom: {
            double m2 = 0.0;
            for (std::size_t i = 0; i < support.size(); ++i)
                m2 += probs[i] * std::norm(scale * support[i]);
            return m2 - std::norm(mean());
        }
    }
    return 0.0;
}

cdouble AtomDistribution::pseudo_variance() const {
    switch (kind) {
        case AtomKind::BernoulliReal:
        case AtomKind::GaussianReal:
            return scale * scale;
        case AtomKind::GaussianComplex:
            return {};
        case AtomKind::DiscreteCustom: {
            cdouble s{};
            for (std::size_t i = 0; i < support.size(); ++i) {
                const cdouble x = scale * support[i];
                s += probs[i] * x * x;
            }
            const cdouble m = mean();
            return s - m * m;
        }
    }
    return {};
}

double AtomDistribution::abs_moment(double p) const {
    if (p < 0.0) throw std::invalid_argument("abs_moment: negative order");
    const double sp = std::pow(scale, p);
    switch (kind) {
        case AtomKind::BernoulliReal:
            return sp;
        case AtomKind::GaussianReal:
            // E|g|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi)
            return sp * std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (p + 1.0)) /
                   std::sqrt(std::numbers::pi);
        case AtomKind::GaussianComplex:
            // |g1 + i g2| is Rayleigh: E[(g1^2+g2^2)^(p/2)] = 2^(p/2) Gamma(p/2 + 1)
            return sp * std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * p + 1.0);
        case AtomKind::DiscreteCustom: {
            double s = 0.0;
            for (std::size_t i = 0; i < support.size(); ++i)
                s += probs[i] * std::pow(std::abs(scale * support[i]), p);
            return s;
        }
    }
    return 0.0;
}

cdouble AtomDistribution::sample(CounterRng& rng) const {
    switch (kind) {
        case AtomKind::BernoulliReal:
            return (rng.next_u64() & 1u) ? cdouble{scale, 0.0} : cdouble{-scale, 0.0};
        case AtomKind::GaussianReal:
            return {scale * rng.next_gaussian(), 0.0};
        case AtomKind::GaussianComplex:
            return scale * rng.next_gaussian_pair();
        case AtomKind::DiscreteCustom: {
            const double u = rng.next_unit();
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < support.size(); ++i) {
                acc += probs[i];
                if (u <= acc) return scale * support[i];
            }
            return scale * support.back();
        }
    }
    return {};
}

void AtomDistribution::validate() const {
    if (d == 0) throw std::invalid_argument("atom: d must be >= 1");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw std::invalid_argument("atom: scale must be positive finite");
    if (kind == AtomKind::DiscreteCustom) {
        if (support.empty() || support.size() != probs.size())
            throw std::invalid_argument("atom: support/probs size mismatch");
        double psum = 0.0;
        for (double p : probs) {
            if (p < 0.0) throw std::invalid_argument("atom: negative probability");
            psum += p;
        }
        if (std::abs(psum - 1.0) > kMeanTol)
            throw std::invalid_argument("atom: probabilities must sum to 1");
    }
    if (std::abs(mean()) > kMeanTol) throw std::invalid_argument("atom: mean is not 0");
    const double target = 1.0 / static_cast<double>(d);
    if (std::abs(variance() - target) > kVarRelTol * target) {
        std::ostringstream os;
        os << "atom: variance " << variance() << " != 1/d = " << target;
        throw std::invalid_argument(os.str());
    }
}

void BlockEnsembleSpec::validate() const {
    if (d < 2) throw std::invalid_argument("ensemble: d must be >= 2");
    if (atoms.size() != d * d)
        throw std::invalid_argument("ensemble: atom grid must have d*d entries");
    if (!(moment_eta > 0.0)) throw std::invalid_argument("ensemble: moment_eta must be > 0");
    for (const AtomDistribution& a : atoms) {
        a.validate();
        if (a.d != d) throw std::invalid_argument("ensemble: atom scaled for a different d");
    }
    if (mode == BlockMode::Quaternionic) {
        if (d != 2) throw std::invalid_argument("ensemble: quaternionic mode requires d = 2");
        if (std::abs(atom(0, 0).pseudo_variance()) > kMeanTol)
            throw std::invalid_argument("ensemble: quaternionic mode requires E[xi^2] = 0");
    }
    if (mode == BlockMode::CorrelatedDemo && d != 2)
        throw std::invalid_argument("ensemble: correlated-demo mode requires d = 2");
}

BlockEnsembleSpec BlockEnsembleSpec::independent(std::size_t d, const AtomDistribution& proto,
                                                 double eta) {
    BlockEnsembleSpec s;
    s.d = d;
    s.atoms.assign(d * d, proto);
    s.mode = BlockMode::Independent;
    s.moment_eta = eta;
    return s;
}

BlockEnsembleSpec BlockEnsembleSpec::quaternionic(const AtomDistribution& proto, double eta) {
    BlockEnsembleSpec s;
    s.d = 2;
    s.atoms.assign(4, proto);
    s.mode = BlockMode::Quaternionic;
    s.moment_eta = eta;
    return s;
}

BlockEnsembleSpec BlockEnsembleSpec::correlated_demo(const AtomDistribution& proto, double eta) {
    BlockEnsembleSpec s;
    s.d = 2;
    s.atoms.assign(4, proto);
    s.mode = BlockMode::CorrelatedDemo;
    s.moment_eta = eta;
    return s;
}

void sample_block_tuple(const BlockEnsembleSpec& spec, std::uint64_t seed, std::uint64_t i,
                        std::uint64_t j, cdouble* out) {
    const std::size_t d = spec.d;
    switch (spec.mode) {
        case BlockMode::Independent:
            for (std::size_t s = 0; s < d; ++s)
                for (std::size_t t = 0; t < d; ++t) {
                    CounterRng rng(seed, s * d + t, i, j);
                    out[s * d + t] = spec.atom(s, t).sample(rng);
                }
            return;
        case BlockMode::Quaternionic: {
            CounterRng ra(seed, 0, i, j), rb(seed, 1, i, j);
            const cdouble a = spec.atom(0, 0).sample(ra);
            const cdouble b = spec.atom(0, 0).sample(rb);
            out[0] = a;
            out[1] = b;
            out[2] = -std::conj(b);
            out[3] = std::conj(a);
            return;
        }
        case BlockMode::CorrelatedDemo: {
            CounterRng ra(seed, 0, i, j), rb(seed, 1, i, j);
            const cdouble a = spec.atom(0, 0).sample(ra);
            const cdouble q = spec.atom(1, 1).sample(rb);
            out[0] = a;
            out[1] = a;
            out[2] = a;
            out[3] = q;
            return;
        }
    }
}

ComplexMatrix sample_c0_matrix(const BlockEnsembleSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw std::invalid_argument("sample_c0_matrix: n must be >= 1");
    const std::size_t d = spec.d;
    ComplexMatrix m(d * n, d * n);
    std::vector<cdouble> tuple(d * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            sample_block_tuple(spec, seed, i, j, tuple.data());
            for (std::size_t s = 0; s < d; ++s)
                for (std::size_t t = 0; t < d; ++t) m(s * n + i, t * n + j) = tuple[s * d + t];
        }
    return m;
}

ComplexMatrix sample_iid_matrix(const AtomDistribution& atom, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("sample_iid_matrix: n must be >= 1");
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            CounterRng rng(seed, 0, i, j);
            m(i, j) = atom.sample(rng);
        }
    return m;
}

ComplexMatrix quaternion_embed(const ComplexMatrix& a, const ComplexMatrix& b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n || b.cols() != n)
        throw std::invalid_argument("quaternion_embed: A, B must be square of equal size");
    ComplexMatrix m(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = a(i, j);
            m(i, n + j) = b(i, j);
            m(n + i, j) = -std::conj(b(i, j));
            m(n + i, n + j) = std::conj(a(i, j));
        }
    return m;
}

ComplexMatrix build_correlated_demo(const ComplexMatrix& a, const ComplexMatrix& b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n || b.cols() != n)
        throw std::invalid_argument("build_correlated_demo: A, B must be square of equal size");
    ComplexMatrix m(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = a(i, j);
            m(i, n + j) = a(i, j);
            m(n + i, j) = a(i, j);
            m(n + i, n + j) = b(i, j);
        }
    return m;
}

CovarianceReport covariance_check(const BlockEnsembleSpec& spec, std::size_t trials,
                                  std::uint64_t seed) {
    spec.validate();
    if (trials == 0) throw std::invalid_argument("covariance_check: trials must be >= 1");
    const std::size_t d = spec.d, k = d * d;
    CovarianceReport rep;
    rep.d = d;
    rep.trials = trials;
    rep.table = ComplexMatrix(k, k);
    std::vector<cdouble> tuple(k);
    for (std::size_t t = 0; t < trials; ++t) {
        sample_block_tuple(spec, seed, t, 0, tuple.data());
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t q = 0; q < k; ++q) rep.table(p, q) += tuple[p] * std::conj(tuple[q]);
    }
    const double inv = 1.0 / static_cast<double>(trials);
    rep.table *= inv;
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = 0; q < k; ++q)
            if (p != q) rep.max_cross = std::max(rep.max_cross, std::abs(rep.table(p, q)));
    rep.threshold = 4.0 / (static_cast<double>(d) * std::sqrt(static_cast<double>(trials)));
    rep.pass = rep.max_cross <= rep.threshold;
    return rep;
}

ComplexMatrix low_rank_perturbation(const PerturbationSpec& p, std::size_t d, std::size_t n,
                                    std::uint64_t seed) {
    if (!(p.rank_exponent > 0.0) || p.rank_exponent > 1.0)
        throw std::invalid_argument("low_rank_perturbation: rank_exponent must be in (0, 1]");
    if (p.entry_bound_exponent < 0.0)
        throw std::invalid_argument("low_rank_perturbation: entry_bound_exponent must be >= 0");
    if (p.hs_budget < 0.0 || !std::isfinite(p.hs_budget))
        throw std::invalid_argument("low_rank_perturbation: hs_budget must be >= 0");
    if (d == 0 || n == 0) throw std::invalid_argument("low_rank_perturbation: d, n must be >= 1");

    const std::size_t size = d * n;
    ComplexMatrix m(size, size);
    if (p.hs_budget == 0.0) return m;

    const double nd = static_cast<double>(n);
    const std::size_t rank =
        std::min(size, static_cast<std::size_t>(std::ceil(std::pow(nd, 1.0 - p.rank_exponent) -
                                                          1e-9)));
    const double amp = std::min(std::pow(nd, p.entry_bound_exponent),
                                std::sqrt(p.hs_budget * nd * nd / static_cast<double>(rank)));

    const std::vector<std::size_t> rows = seeded_permutation(size, seed, 0);
    const std::vector<std::size_t> cols = seeded_permutation(size, seed, 1);
    CounterRng phase_rng(seed, 2, 0, 0);
    for (std::size_t k = 0; k < rank; ++k) {
        const double theta = 2.0 * std::numbers::pi * phase_rng.next_unit();
        m(rows[k], cols[k]) = amp * cdouble{std::cos(theta), std::sin(theta)};
    }
    return m;
}

}  // namespace rml
