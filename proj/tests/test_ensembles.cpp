#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>

#include "rml/ensembles.hpp"
#include "rml/linalg.hpp"
#include "support.hpp"

using namespace rml;
using namespace testsupport;

namespace {

AtomDistribution heavy_discrete(std::size_t d, bool normalize) {
    // raw variance 0.45*2*1 + 0.05*2*100 = 10.9
    return AtomDistribution::discrete_custom(d, {1.0, -1.0, 10.0, -10.0},
                                             {0.45, 0.45, 0.05, 0.05}, normalize);
}

AtomDistribution fourth_roots(std::size_t d) {
    // support {1, i, -1, -i} uniform: mean 0, E[xi^2] = 0, raw variance 1
    return AtomDistribution::discrete_custom(
        d, {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}}, {0.25, 0.25, 0.25, 0.25});
}

}  // namespace

TEST_CASE("atom moments match closed forms") {
    auto br = AtomDistribution::bernoulli_real(4);
    CHECK(br.mean() == cdouble{});
    CHECK(br.variance() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(br.pseudo_variance().real() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(br.abs_moment(3.0) == doctest::Approx(0.125).epsilon(1e-14));

    auto gr = AtomDistribution::gaussian_real(1);
    CHECK(gr.variance() == doctest::Approx(1.0).epsilon(1e-15));
    // E|g|^3 = 2 sqrt(2/pi), E g^4 = 3
    CHECK(gr.abs_moment(3.0) ==
          doctest::Approx(2.0 * std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-13));
    CHECK(gr.abs_moment(4.0) == doctest::Approx(3.0).epsilon(1e-13));

    auto gc = AtomDistribution::gaussian_complex(1);
    CHECK(gc.variance() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(gc.pseudo_variance()) == 0.0);
    // E|xi|^4 = 2 for unit-variance rotation-invariant complex Gaussian
    CHECK(gc.abs_moment(4.0) == doctest::Approx(2.0).epsilon(1e-13));

    auto hd = heavy_discrete(2, true);
    CHECK(std::abs(hd.mean()) < 1e-15);
    CHECK(hd.variance() == doctest::Approx(0.5).epsilon(1e-12));
    hd.validate();

    auto fr = fourth_roots(3);
    CHECK(std::abs(fr.pseudo_variance()) < 1e-15);
    CHECK(fr.variance() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    fr.validate();
}

TEST_CASE("atom validation rejects bad laws") {
    CHECK_THROWS_AS(AtomDistribution::discrete_custom(2, {1.0, 2.0}, {0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(AtomDistribution::discrete_custom(2, {1.0, 1.0}, {0.5, 0.5}),
                    std::invalid_argument);  // zero variance
    // nonzero mean survives construction but fails validate
    auto biased = AtomDistribution::discrete_custom(2, {2.0, -1.0}, {0.5, 0.5});
    CHECK_THROWS_AS(biased.validate(), std::invalid_argument);
    // probabilities not summing to 1
    auto badp = AtomDistribution::discrete_custom(2, {1.0, -1.0}, {0.6, 0.6});
    CHECK_THROWS_AS(badp.validate(), std::invalid_argument);
    // raw heavy atom has variance 10.9/d, not 1/d
    auto raw = heavy_discrete(2, false);
    CHECK_THROWS_AS(raw.validate(), std::invalid_argument);
}

TEST_CASE("empirical atom variance within 1% of 1/d over 1e6 draws") {
    const std::size_t trials = 1000000;
    const AtomDistribution atoms[] = {
        AtomDistribution::bernoulli_real(2), AtomDistribution::gaussian_real(2),
        AtomDistribution::gaussian_complex(2), heavy_discrete(2, true)};
    for (const auto& atom : atoms) {
        cdouble mean{};
        double m2 = 0.0;
        CounterRng rng(99, 7, 0, 0);
        for (std::size_t t = 0; t < trials; ++t) {
            const cdouble x = atom.sample(rng);
            mean += x;
            m2 += std::norm(x);
        }
        mean /= static_cast<double>(trials);
        const double var = m2 / static_cast<double>(trials) - std::norm(mean);
        CHECK(std::abs(var - 0.5) < 0.005);
        CHECK(std::abs(mean) < 0.005);
    }
}

TEST_CASE("empirical abs moment and pseudo-variance match formulas") {
    const double eta = 1.0;
    const AtomDistribution atoms[] = {AtomDistribution::gaussian_real(2),
                                      AtomDistribution::gaussian_complex(2),
                                      heavy_discrete(2, true)};
    for (const auto& atom : atoms) {
        double m3 = 0.0;
        cdouble sq{};
        CounterRng rng(1234, 0, 0, 0);
        const std::size_t trials = 1000000;
        for (std::size_t t = 0; t < trials; ++t) {
            const cdouble x = atom.sample(rng);
            m3 += std::pow(std::abs(x), 2.0 + eta);
            sq += x * x;
        }
        m3 /= static_cast<double>(trials);
        sq /= static_cast<double>(trials);
        CHECK(std::abs(m3 - atom.abs_moment(2.0 + eta)) < 0.02 * atom.abs_moment(2.0 + eta));
        CHECK(std::abs(sq - atom.pseudo_variance()) < 0.01);
    }
}

TEST_CASE("sample_c0_matrix is deterministic and seed-sensitive") {
    auto spec = BlockEnsembleSpec::independent(2, AtomDistribution::gaussian_complex(2));
    ComplexMatrix a = sample_c0_matrix(spec, 16, 42);
    ComplexMatrix b = sample_c0_matrix(spec, 16, 42);
    REQUIRE(a.rows() == 32);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(cdouble) * 32 * 32) == 0);
    ComplexMatrix c = sample_c0_matrix(spec, 16, 43);
    CHECK(std::memcmp(a.data(), c.data(), sizeof(cdouble) * 32 * 32) != 0);
}

TEST_CASE("bernoulli d=2 n=1000 entry mean is small") {
    // entries are +-1/sqrt(2); mean of (dn)^2 = 4e6 entries has sd
    // (1/sqrt(2))/2000 ~ 3.5e-4, so 0.005 is a 14-sigma envelope
    auto spec = BlockEnsembleSpec::independent(2, AtomDistribution::bernoulli_real(2));
    ComplexMatrix x = sample_c0_matrix(spec, 1000, 7);
    cdouble sum{};
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) sum += x(i, j);
    const double mean = std::abs(sum) / static_cast<double>(x.rows() * x.cols());
    CHECK(mean <= 0.005);
}

TEST_CASE("quaternionic sample has the exact block symmetry") {
    auto spec = BlockEnsembleSpec::quaternionic(AtomDistribution::gaussian_complex(2));
    const std::size_t n = 20;
    ComplexMatrix x = sample_c0_matrix(spec, n, 5);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(x(i, n + j) == -std::conj(x(n + i, j)));
            CHECK(x(n + i, n + j) == std::conj(x(i, j)));
        }
}

TEST_CASE("quaternionic and correlated modes validate their preconditions") {
    auto spec = BlockEnsembleSpec::quaternionic(AtomDistribution::gaussian_complex(2));
    spec.d = 3;
    spec.atoms.assign(9, AtomDistribution::gaussian_complex(3));
    CHECK_THROWS_AS(sample_c0_matrix(spec, 4, 1), std::invalid_argument);
    // E[xi^2] != 0 is not allowed in quaternionic mode
    auto real_spec = BlockEnsembleSpec::quaternionic(AtomDistribution::bernoulli_real(2));
    CHECK_THROWS_AS(sample_c0_matrix(real_spec, 4, 1), std::invalid_argument);
    // complex discrete atom with E[xi^2] = 0 is allowed
    auto fr_spec = BlockEnsembleSpec::quaternionic(fourth_roots(2));
    CHECK_NOTHROW(sample_c0_matrix(fr_spec, 4, 1));
    // atom scaled for the wrong d
    auto bad = BlockEnsembleSpec::independent(2, AtomDistribution::gaussian_complex(3));
    CHECK_THROWS_AS(sample_c0_matrix(bad, 4, 1), std::invalid_argument);
    auto few = BlockEnsembleSpec::independent(2, AtomDistribution::gaussian_complex(2));
    few.atoms.pop_back();
    CHECK_THROWS_AS(sample_c0_matrix(few, 4, 1), std::invalid_argument);
}

TEST_CASE("quaternion_embed frozen 1x1 examples") {
    ComplexMatrix a(1, 1), b(1, 1);
    a(0, 0) = cdouble(0.0, 1.0);
    b(0, 0) = 0.0;
    ComplexMatrix m = quaternion_embed(a, b);
    CHECK(m(0, 0) == cdouble(0.0, 1.0));
    CHECK(m(0, 1) == cdouble{});
    CHECK(m(1, 0) == cdouble{});
    CHECK(m(1, 1) == cdouble(0.0, -1.0));
    auto ev = complex_eigen(m).values;
    CHECK(std::abs(ev[0] - cdouble(0.0, -1.0)) < 1e-14);
    CHECK(std::abs(ev[1] - cdouble(0.0, 1.0)) < 1e-14);

    a(0, 0) = 0.0;
    b(0, 0) = 1.0;
    m = quaternion_embed(a, b);
    CHECK(m(0, 1) == cdouble(1.0, 0.0));
    CHECK(m(1, 0) == cdouble(-1.0, 0.0));
    ev = complex_eigen(m).values;
    CHECK(std::abs(ev[0] - cdouble(0.0, -1.0)) < 1e-14);
    CHECK(std::abs(ev[1] - cdouble(0.0, 1.0)) < 1e-14);

    ComplexMatrix wrong(2, 2);
    CHECK_THROWS_AS(quaternion_embed(a, wrong), std::invalid_argument);
}

TEST_CASE("quaternionic spectra are conjugation-closed") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        ComplexMatrix a = random_complex_matrix(3, 2 * seed);
        ComplexMatrix b = random_complex_matrix(3, 2 * seed + 1);
        ComplexMatrix m = quaternion_embed(a, b);
        auto ev = complex_eigen(m).values;
        std::vector<cdouble> conj_ev;
        conj_ev.reserve(ev.size());
        for (cdouble v : ev) conj_ev.push_back(std::conj(v));
        CHECK(multiset_match_distance(ev, conj_ev) < 1e-8 * hs_norm(m));
    }
    // sampled quaternionic ensembles as well, n up to 100
    auto spec = BlockEnsembleSpec::quaternionic(AtomDistribution::gaussian_complex(2));
    for (std::size_t n : {10, 50, 100}) {
        ComplexMatrix x = sample_c0_matrix(spec, n, 77 + n);
        auto ev = complex_eigen(x).values;
        std::vector<cdouble> conj_ev;
        conj_ev.reserve(ev.size());
        for (cdouble v : ev) conj_ev.push_back(std::conj(v));
        CHECK(multiset_match_distance(ev, conj_ev) < 1e-8 * hs_norm(x));
    }
}

TEST_CASE("build_correlated_demo layout and rank structure") {
    ComplexMatrix a(1, 1), b(1, 1);
    a(0, 0) = 1.0;
    b(0, 0) = 0.0;
    ComplexMatrix m = build_correlated_demo(a, b);
    CHECK(m(0, 0) == cdouble(1.0, 0.0));
    CHECK(m(0, 1) == cdouble(1.0, 0.0));
    CHECK(m(1, 0) == cdouble(1.0, 0.0));
    CHECK(m(1, 1) == cdouble{});

    // A = B: result is A tensor [[1,1],[1,1]], rank = rank(A)
    ComplexMatrix g = random_complex_matrix(3, 11);
    ComplexMatrix k = build_correlated_demo(g, g);
    auto sv = singular_values(k);
    const double tol = 1e-10 * (1.0 + sv.front());
    std::size_t positive = 0;
    for (double s : sv)
        if (s > tol) ++positive;
    CHECK(positive == 3);

    // sampled correlated-demo matrix has identical (1,1),(1,2),(2,1) blocks
    auto spec = BlockEnsembleSpec::correlated_demo(AtomDistribution::gaussian_complex(2));
    const std::size_t n = 15;
    ComplexMatrix x = sample_c0_matrix(spec, n, 3);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(x(i, j) == x(i, n + j));
            CHECK(x(i, j) == x(n + i, j));
        }
}

TEST_CASE("covariance_check passes compliant modes and fails correlated-demo") {
    const std::size_t trials = 1000000;
    auto quat = BlockEnsembleSpec::quaternionic(AtomDistribution::gaussian_complex(2));
    auto rq = covariance_check(quat, trials, 21);
    CHECK(rq.max_cross <= 0.005);
    CHECK(rq.pass);
    // diagonal of the table is the entry variance 1/d
    for (std::size_t p = 0; p < 4; ++p)
        CHECK(std::abs(rq.table(p, p) - cdouble(0.5, 0.0)) < 0.005);

    auto indep = BlockEnsembleSpec::independent(2, AtomDistribution::bernoulli_real(2));
    auto ri = covariance_check(indep, trials, 22);
    CHECK(ri.max_cross <= 0.005);
    CHECK(ri.pass);

    auto corr = BlockEnsembleSpec::correlated_demo(AtomDistribution::gaussian_complex(2));
    auto rc = covariance_check(corr, 100000, 23);
    CHECK_FALSE(rc.pass);
    // entries (1,1) and (1,2) are the same variable: correlation = 1/d
    CHECK(std::abs(rc.table(0, 1) - cdouble(0.5, 0.0)) < 0.01);
}

TEST_CASE("low_rank_perturbation honors rank, entry, and norm budgets") {
    PerturbationSpec p{0.5, 0.0, 1.0};
    ComplexMatrix m = low_rank_perturbation(p, 2, 100, 9);
    REQUIRE(m.rows() == 200);
    auto sv = singular_values(m);
    std::size_t positive = 0;
    for (double s : sv)
        if (s > 1e-10) ++positive;
    CHECK(positive <= 10);
    CHECK(positive >= 1);
    CHECK(max_abs(m) <= 1.0 + 1e-12);  // n^alpha = 1
    const double hs = hs_norm(m);
    CHECK(hs * hs <= 1.0 * 100.0 * 100.0 + 1e-9);

    // eps = 1: rank <= 1
    PerturbationSpec p1{1.0, 0.5, 2.0};
    ComplexMatrix r1 = low_rank_perturbation(p1, 2, 64, 3);
    auto sv1 = singular_values(r1);
    std::size_t pos1 = 0;
    for (double s : sv1)
        if (s > 1e-10) ++pos1;
    CHECK(pos1 <= 1);
    CHECK(max_abs(r1) <= std::pow(64.0, 0.5) + 1e-12);

    // zero budget
    PerturbationSpec p0{0.5, 1.0, 0.0};
    ComplexMatrix z = low_rank_perturbation(p0, 2, 32, 1);
    CHECK(max_abs(z) == 0.0);

    CHECK_THROWS_AS(low_rank_perturbation({0.0, 0.0, 1.0}, 2, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(low_rank_perturbation({0.5, -1.0, 1.0}, 2, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(low_rank_perturbation({0.5, 0.0, -1.0}, 2, 10, 1), std::invalid_argument);
}

TEST_CASE("sample_iid_matrix determinism and scaling") {
    auto atom = AtomDistribution::gaussian_complex(1);
    ComplexMatrix a = sample_iid_matrix(atom, 64, 13);
    ComplexMatrix b = sample_iid_matrix(atom, 64, 13);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(cdouble) * 64 * 64) == 0);
    double m2 = 0.0;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j) m2 += std::norm(a(i, j));
    m2 /= 64.0 * 64.0;
    CHECK(std::abs(m2 - 1.0) < 0.06);  // 4096 draws, sd of mean ~ 1/64
}
