#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "rml/ensembles.hpp"
#include "rml/rng.hpp"
#include "rml/smallball.hpp"

using namespace rml;

namespace {

std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// independent window oracle over an exact value -> count table
std::uint64_t window_oracle(const std::map<double, std::uint64_t>& table, double beta) {
    std::uint64_t best = 0;
    for (auto it = table.begin(); it != table.end(); ++it) {
        std::uint64_t sum = 0;
        for (auto jt = it; jt != table.end() && jt->first - it->first <= 2.0 * beta + 1e-9;
             ++jt)
            sum += jt->second;
        best = std::max(best, sum);
    }
    return best;
}

AtomDistribution sign_atom() { return AtomDistribution::bernoulli_real(1); }

}  // namespace

TEST_CASE("gap basics: elements, properness, membership, dilation") {
    const Gap q = Gap::symmetric_rank1(1.0, 2);
    CHECK(q.symmetric());
    CHECK(q.volume() == 5);
    const auto elems = gap_elements(q);
    REQUIRE(elems.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(elems[i].coeffs == std::vector<long long>{static_cast<long long>(i) - 2});
        CHECK(elems[i].point[0] == cdouble{static_cast<double>(i) - 2.0, 0.0});
    }
    CHECK(gap_proper(q));

    const auto hit = gap_membership(q, {cdouble{1.4, 0.0}}, 0.5);
    REQUIRE(hit.has_value());
    CHECK(hit->coeffs == std::vector<long long>{1});
    CHECK(!gap_membership(q, {cdouble{2.6, 0.0}}, 0.5).has_value());

    // duplicate generators: distance ties resolve to the lexicographically
    // smallest coefficient tuple
    Gap dup;
    dup.offset = {cdouble{}};
    dup.generators = {{cdouble{1.0, 0.0}}, {cdouble{1.0, 0.0}}};
    dup.bounds = {{-1, 1}, {-1, 1}};
    CHECK(!gap_proper(dup));
    const auto tie = gap_membership(dup, {cdouble{0.5, 0.0}}, 1.0);
    REQUIRE(tie.has_value());
    CHECK(tie->coeffs == std::vector<long long>{-1, 1});
    CHECK(tie->point[0] == cdouble{});

    const Gap one = Gap::symmetric_rank1(1.0, 1);
    const Gap big = gap_dilate(one, 3);
    CHECK(big.bounds[0] == std::pair<long long, long long>{-3, 3});
    CHECK(big.volume() == 7);
    for (const auto& e : gap_elements(one)) {
        const auto inside = gap_membership(big, e.point, 0.0);
        CHECK(inside.has_value());
    }

    Gap shifted = one;
    shifted.offset = {cdouble{1.0, 0.0}};
    CHECK_THROWS_AS(gap_dilate(shifted, 2), std::invalid_argument);
    CHECK_THROWS_AS(gap_dilate(one, 0), std::invalid_argument);
    CHECK_THROWS_AS(gap_elements(Gap::symmetric_rank1(1.0, 600000)), std::length_error);

    Gap bad = one;
    bad.bounds[0] = {2, 1};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = one;
    bad.generators.push_back({cdouble{1.0, 0.0}, cdouble{}});
    bad.bounds.push_back({0, 0});
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    Gap empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("coefficient arrays: indexing and caps") {
    CoefficientArray a = CoefficientArray::zeros(2, 3);
    CHECK(a.entries.size() == 9);
    a.at({1, 2}) = cdouble{5.0, 0.0};
    CHECK(a.entries[5] == cdouble{5.0, 0.0});
    CHECK(a.flat({2, 2}) == 8);
    a.validate();
    CHECK_THROWS_AS(a.flat({1}), std::invalid_argument);
    CHECK_THROWS_AS(a.flat({1, 3}), std::out_of_range);
    a.entries.pop_back();
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);
    CHECK_THROWS_AS(CoefficientArray::zeros(9, 10), std::length_error);
}

TEST_CASE("linear enumeration: frozen four-term sign sum") {
    const std::vector<cdouble> a(4, cdouble{1.0, 0.0});
    const SmallBallResult r = linear_smallball(a, sign_atom(), 1.0);
    CHECK(r.method == "exact-enumeration");
    CHECK(r.hits == 10);
    CHECK(r.total == 16);
    CHECK(r.rho == 0.625);
    // windows [-2,0] and [0,2] tie at 10 hits; the scan keeps the first
    CHECK(std::abs(r.center) == doctest::Approx(1.0).epsilon(1e-12));

    const SmallBallResult exact0 = linear_smallball(a, sign_atom(), 0.0);
    CHECK(exact0.hits == 6);  // central binomial
    const std::vector<cdouble> zeros(5, cdouble{});
    CHECK(linear_smallball(zeros, sign_atom(), 0.0).rho == 1.0);

    CHECK_THROWS_AS(linear_smallball({}, sign_atom(), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(linear_smallball(a, sign_atom(), -0.5), std::invalid_argument);
}

TEST_CASE("sign sums match the binomial oracle and the classic bound") {
    double prev = 1.0;
    for (std::uint64_t n = 4; n <= 20; n += 2) {
        const std::vector<cdouble> a(n, cdouble{1.0, 0.0});
        const SmallBallResult r = linear_smallball(a, sign_atom(), 1.0);
        CHECK(r.hits == binom(n, n / 2) + binom(n, n / 2 - 1));
        CHECK(r.total == (std::uint64_t{1} << n));
        CHECK(r.rho * std::sqrt(static_cast<double>(n)) <= 2.0);
        CHECK(r.rho <= prev);
        prev = r.rho;
    }
}

TEST_CASE("radius monotonicity, permutation and phase invariance") {
    const std::vector<cdouble> a = {cdouble{1.0, 0.0}, cdouble{2.0, 0.0}, cdouble{-1.0, 0.0},
                                    cdouble{3.0, 0.0}, cdouble{1.0, 0.0}};
    double prev = -1.0;
    for (const double beta : {0.0, 0.25, 0.5, 1.0, 2.0, 8.0}) {
        const double rho = linear_smallball(a, sign_atom(), beta).rho;
        CHECK(rho >= prev);
        prev = rho;
    }
    CHECK(prev == 1.0);

    const SmallBallResult base = linear_smallball(a, sign_atom(), 0.5);
    std::vector<cdouble> perm = {a[3], a[0], a[4], a[2], a[1]};
    const SmallBallResult permuted = linear_smallball(perm, sign_atom(), 0.5);
    CHECK(permuted.rho == base.rho);
    CHECK(permuted.hits == base.hits);
    CHECK(permuted.center == base.center);

    std::vector<cdouble> rotated(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) rotated[i] = cdouble{0.0, 1.0} * a[i];
    const SmallBallResult turned = linear_smallball(rotated, sign_atom(), 0.5);
    CHECK(turned.hits == base.hits);
    CHECK(turned.total == base.total);
}

TEST_CASE("lattice method agrees with enumeration bit for bit") {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        CounterRng rng(900 + rep, 5, 0, 0);
        // complex coefficients spread values across the plane, where the
        // exact center search caps at 512 distinct points; keep those short
        const bool complex_rep = rep % 3 == 0;
        const std::size_t n = complex_rep ? 4 + rng.next_u64() % 6 : 4 + rng.next_u64() % 9;
        std::vector<cdouble> a(n);
        for (auto& c : a)
            c = cdouble{static_cast<double>(static_cast<long long>(rng.next_u64() % 11) - 5),
                        complex_rep ? static_cast<double>(
                                          static_cast<long long>(rng.next_u64() % 11) - 5)
                                    : 0.0};
        const double beta = 0.75 * static_cast<double>(rng.next_u64() % 4);
        SmallBallOptions force_enum, force_dp;
        force_enum.method = SmallBallOptions::Method::enumeration;
        force_dp.method = SmallBallOptions::Method::lattice;
        const SmallBallResult e = linear_smallball(a, sign_atom(), beta, force_enum);
        const SmallBallResult d = linear_smallball(a, sign_atom(), beta, force_dp);
        CHECK(e.method == "exact-enumeration");
        CHECK(d.method == "dp-lattice");
        CHECK(e.hits == d.hits);
        CHECK(e.total == d.total);
        CHECK(e.rho == d.rho);
        CHECK(e.center == d.center);
    }
}

TEST_CASE("lattice method scales past enumeration") {
    const std::vector<cdouble> a(30, cdouble{1.0, 0.0});
    const SmallBallResult r = linear_smallball(a, sign_atom(), 1.0);
    CHECK(r.method == "dp-lattice");
    CHECK(r.total == (std::uint64_t{1} << 30));
    CHECK(r.hits == binom(30, 15) + binom(30, 16));

    SmallBallOptions force_enum;
    force_enum.method = SmallBallOptions::Method::enumeration;
    CHECK_THROWS_AS(linear_smallball(a, sign_atom(), 1.0, force_enum), std::length_error);
}

TEST_CASE("monte carlo: gaussian sum lands on the normal mass") {
    const std::vector<cdouble> a(4, cdouble{1.0, 0.0});
    const AtomDistribution g = AtomDistribution::gaussian_real(1);
    const SmallBallResult r = linear_smallball(a, g, 2.0);
    CHECK(r.method == "monte-carlo");
    CHECK(r.trials == 200000);
    CHECK(r.ci_half_width > 0.0);
    // sum ~ N(0, 4); center near 0 gives P(|N(0,1)| <= 1) = 0.6827
    CHECK(r.rho == doctest::Approx(0.6827).epsilon(0.03));

    const SmallBallResult again = linear_smallball(a, g, 2.0);
    CHECK(again.rho == r.rho);
    CHECK(again.center == r.center);

    SmallBallOptions force_enum, force_dp;
    force_enum.method = SmallBallOptions::Method::enumeration;
    force_dp.method = SmallBallOptions::Method::lattice;
    CHECK_THROWS_AS(linear_smallball(a, g, 2.0, force_enum), std::invalid_argument);
    CHECK_THROWS_AS(linear_smallball(a, g, 2.0, force_dp), std::invalid_argument);
    std::vector<cdouble> frac = a;
    frac[0] = cdouble{0.5, 0.0};
    CHECK_THROWS_AS(linear_smallball(frac, sign_atom(), 1.0, force_dp),
                    std::invalid_argument);
}

TEST_CASE("asymmetric discrete atom: weighted enumeration") {
    // values 3 and -1/6 with probabilities 1/19 and 18/19
    const AtomDistribution heavy = AtomDistribution::discrete_custom(
        1, {cdouble{3.0, 0.0}, cdouble{-1.0 / 6.0, 0.0}}, {1.0 / 19.0, 18.0 / 19.0}, false);
    const std::vector<cdouble> a(3, cdouble{1.0, 0.0});
    const SmallBallResult r = linear_smallball(a, heavy, 0.01);
    CHECK(r.method == "exact-enumeration");
    CHECK(r.total == 0);  // weighted paths report mass, not counts
    const double p = 18.0 / 19.0;
    CHECK(r.rho == doctest::Approx(p * p * p).epsilon(1e-12));
    CHECK(r.center.real() == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("multilinear enumeration: rank-one quadratic form") {
    CoefficientArray a = CoefficientArray::zeros(2, 2);
    a.at({0, 0}) = cdouble{1.0, 0.0};
    a.at({0, 1}) = cdouble{-1.0, 0.0};
    a.at({1, 0}) = cdouble{-1.0, 0.0};
    a.at({1, 1}) = cdouble{1.0, 0.0};
    // (x1 - x2)(y1 - y2) vanishes unless both factors are nonzero
    const SmallBallResult r = multilinear_smallball(a, sign_atom(), 0.0);
    CHECK(r.method == "exact-enumeration");
    CHECK(r.hits == 12);
    CHECK(r.total == 16);
    CHECK(r.center == cdouble{});

    const CoefficientArray zero = CoefficientArray::zeros(2, 2);
    CHECK(multilinear_smallball(zero, sign_atom(), 0.0).rho == 1.0);
}

TEST_CASE("multilinear shift matches a direct tabulation") {
    CoefficientArray a = CoefficientArray::zeros(2, 2);
    a.at({0, 0}) = cdouble{1.0, 0.0};
    a.at({0, 1}) = cdouble{-1.0, 0.0};
    a.at({1, 0}) = cdouble{-1.0, 0.0};
    a.at({1, 1}) = cdouble{1.0, 0.0};
    CoefficientArray shift = CoefficientArray::zeros(1, 2);
    shift.at({0}) = cdouble{1.0, 0.0};
    shift.at({1}) = cdouble{2.0, 0.0};

    std::map<double, std::uint64_t> table;
    const double vals[2] = {1.0, -1.0};
    for (int x1 = 0; x1 < 2; ++x1)
        for (int x2 = 0; x2 < 2; ++x2)
            for (int y1 = 0; y1 < 2; ++y1)
                for (int y2 = 0; y2 < 2; ++y2) {
                    const double form =
                        (vals[x1] - vals[x2]) * (vals[y1] - vals[y2]);
                    ++table[form + vals[x1] + 2.0 * vals[x2]];
                }
    for (const double beta : {0.0, 0.75, 1.5}) {
        const SmallBallResult r = multilinear_smallball(a, sign_atom(), beta, shift, {});
        CHECK(r.hits == window_oracle(table, beta));
        CHECK(r.total == 16);
    }

    CoefficientArray wrong_degree = CoefficientArray::zeros(2, 2);
    CHECK_THROWS_AS(multilinear_smallball(a, sign_atom(), 0.0, wrong_degree, {}),
                    std::invalid_argument);
    CoefficientArray wrong_side = CoefficientArray::zeros(1, 3);
    CHECK_THROWS_AS(multilinear_smallball(a, sign_atom(), 0.0, wrong_side, {}),
                    std::invalid_argument);
}

TEST_CASE("multilinear small-ball mass beats the distinct-value pigeonhole") {
    CoefficientArray a = CoefficientArray::zeros(2, 2);
    a.at({0, 0}) = cdouble{1.0, 0.0};
    a.at({1, 0}) = cdouble{-1.0, 0.0};
    a.at({1, 1}) = cdouble{1.0, 0.0};
    std::set<double> distinct;
    const double vals[2] = {1.0, -1.0};
    for (int x1 = 0; x1 < 2; ++x1)
        for (int x2 = 0; x2 < 2; ++x2)
            for (int y1 = 0; y1 < 2; ++y1)
                for (int y2 = 0; y2 < 2; ++y2)
                    distinct.insert(vals[x1] * vals[y1] - vals[x2] * vals[y1] +
                                    vals[x2] * vals[y2]);
    const SmallBallResult r = multilinear_smallball(a, sign_atom(), 0.0);
    CHECK(r.rho >= 1.0 / static_cast<double>(distinct.size()));
}

TEST_CASE("multilinear falls back to sampling when enumeration is infeasible") {
    const CoefficientArray big = CoefficientArray::zeros(2, 40);
    SmallBallOptions opt;
    opt.trials = 2000;
    const SmallBallResult r = multilinear_smallball(big, sign_atom(), 0.1, std::nullopt, opt);
    CHECK(r.method == "monte-carlo");
    CHECK(r.rho == 1.0);  // the zero form is identically zero

    SmallBallOptions force_enum;
    force_enum.method = SmallBallOptions::Method::enumeration;
    CHECK_THROWS_AS(multilinear_smallball(big, sign_atom(), 0.1, std::nullopt, force_enum),
                    std::length_error);
    SmallBallOptions force_dp;
    force_dp.method = SmallBallOptions::Method::lattice;
    CHECK_THROWS_AS(multilinear_smallball(big, sign_atom(), 0.1, std::nullopt, force_dp),
                    std::invalid_argument);

    // feasible assignment count but quadratic entry table: the work guard
    // routes automatic selection to sampling
    const CoefficientArray mid = CoefficientArray::zeros(2, 11);
    SmallBallOptions small;
    small.trials = 500;
    CHECK(multilinear_smallball(mid, sign_atom(), 0.1, std::nullopt, small).method ==
          "monte-carlo");
}

TEST_CASE("worker count never changes exact results") {
    CounterRng rng(4242, 6, 0, 0);
    std::vector<cdouble> a(10);
    for (auto& c : a)
        c = cdouble{static_cast<double>(static_cast<long long>(rng.next_u64() % 9) - 4),
                    static_cast<double>(static_cast<long long>(rng.next_u64() % 9) - 4)};
    SmallBallOptions one, three;
    one.workers = 1;
    three.workers = 3;
    const SmallBallResult r1 = linear_smallball(a, sign_atom(), 0.5, one);
    const SmallBallResult r3 = linear_smallball(a, sign_atom(), 0.5, three);
    CHECK(r1.rho == r3.rho);
    CHECK(r1.hits == r3.hits);
    CHECK(r1.center == r3.center);

    CoefficientArray m = CoefficientArray::zeros(2, 3);
    for (std::size_t i = 0; i < m.entries.size(); ++i)
        m.entries[i] = cdouble{static_cast<double>(static_cast<long long>(i % 5) - 2), 0.0};
    const SmallBallResult m1 = multilinear_smallball(m, sign_atom(), 0.25, std::nullopt, one);
    const SmallBallResult m3 = multilinear_smallball(m, sign_atom(), 0.25, std::nullopt, three);
    CHECK(m1.rho == m3.rho);
    CHECK(m1.hits == m3.hits);
    CHECK(m1.center == m3.center);
}

TEST_CASE("pigeonhole reports match hand counts") {
    const Gap q = Gap::symmetric_rank1(1.0, 1);
    const PigeonholeReport four = pigeonhole_bound(q, 4, sign_atom());
    CHECK(four.value_set_size == 9);
    CHECK(four.bound == 1.0 / 9.0);
    CHECK(four.rho == 6.0 / 16.0);
    CHECK(four.verified);

    const PigeonholeReport single = pigeonhole_bound(q, 1, sign_atom());
    CHECK(single.value_set_size == 3);
    CHECK(single.rho == 0.5);
    CHECK(single.verified);

    Gap trivial;
    trivial.offset = {cdouble{}};
    const PigeonholeReport zero = pigeonhole_bound(trivial, 3, sign_atom());
    CHECK(zero.value_set_size == 1);
    CHECK(zero.bound == 1.0);
    CHECK(zero.rho == 1.0);
    CHECK(zero.verified);

    Gap plane;
    plane.offset = {cdouble{}};
    plane.generators = {{cdouble{1.0, 0.0}}, {cdouble{0.0, 1.0}}};
    plane.bounds = {{-1, 1}, {-1, 1}};
    const PigeonholeReport grid = pigeonhole_bound(plane, 2, sign_atom());
    CHECK(grid.value_set_size == 25);
    CHECK(grid.rho == 0.5);  // coefficients 1+i, 1+i: sums collide at 0
    CHECK(grid.verified);

    CHECK_THROWS_AS(
        pigeonhole_bound(q, 2, sign_atom(), {cdouble{3.0, 0.0}, cdouble{1.0, 0.0}}),
        std::invalid_argument);
    CHECK_THROWS_AS(pigeonhole_bound(q, 2, sign_atom(), {cdouble{1.0, 0.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(pigeonhole_bound(q, 2, AtomDistribution::gaussian_real(1)),
                    std::invalid_argument);
}

TEST_CASE("integer relations annihilate exactly") {
    CHECK(gap_integer_relation({{2}, {5}}) == std::vector<long long>{5, -2});
    CHECK(gap_integer_relation({{1, 0}, {0, 1}, {2, 3}}) ==
          std::vector<long long>{2, 3, -1});
    // rank-deficient columns take the kernel fallback
    CHECK(gap_integer_relation({{2, 4}, {1, 2}, {3, 6}}) ==
          std::vector<long long>{1, -2, 0});
    CHECK_THROWS_AS(gap_integer_relation({{0, 0}, {0, 0}, {0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(gap_integer_relation({{1, 0}, {0, 1}}), std::invalid_argument);

    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        CounterRng rng(7000 + rep, 9, 0, 0);
        std::vector<std::vector<long long>> v(3, std::vector<long long>(2));
        for (auto& row : v)
            for (auto& x : row) x = static_cast<long long>(rng.next_u64() % 101) - 50;
        bool nonzero = false;
        for (const auto& row : v)
            for (const long long x : row) nonzero = nonzero || x != 0;
        if (!nonzero) continue;
        const auto alpha = gap_integer_relation(v);
        REQUIRE(alpha.size() == 3);
        bool alpha_nonzero = false;
        long long s0 = 0, s1 = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            alpha_nonzero = alpha_nonzero || alpha[i] != 0;
            s0 += alpha[i] * v[i][0];
            s1 += alpha[i] * v[i][1];
        }
        CHECK(alpha_nonzero);
        CHECK(s0 == 0);
        CHECK(s1 == 0);
        for (const long long x : alpha) {
            if (x == 0) continue;
            CHECK(x > 0);
            break;
        }
    }
}

TEST_CASE("decoupling: wide radius saturates both sides") {
    const BlockEnsembleSpec spec =
        BlockEnsembleSpec::independent(2, AtomDistribution::bernoulli_real(2));
    const DecouplingReport rep = decoupling_check(spec, 2, 100.0, 4000, 11);
    CHECK(rep.rho_hat == 1.0);
    CHECK(rep.rho_decoupled_hat == 1.0);
    CHECK(rep.ratio == 1.0);
    CHECK(rep.partition == std::vector<std::vector<std::size_t>>{{0}, {1}});
}

TEST_CASE("decoupling: difference form concentrates at least as hard") {
    const BlockEnsembleSpec pair =
        BlockEnsembleSpec::independent(2, AtomDistribution::bernoulli_real(2));
    const DecouplingReport two = decoupling_check(pair, 4, 0.5, 20000, 5);
    CHECK(two.partition == std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}});
    CHECK(two.rho_hat > 0.0);
    CHECK(two.rho_hat < 1.0);
    CHECK(two.ratio >= 1.0);

    const DecouplingReport uneven = decoupling_check(pair, 5, 0.4, 4000, 2);
    CHECK(uneven.partition ==
          std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4}});

    const DecouplingReport again = decoupling_check(pair, 4, 0.5, 20000, 5);
    CHECK(again.rho_hat == two.rho_hat);
    CHECK(again.rho_decoupled_hat == two.rho_decoupled_hat);
    CHECK(again.center == two.center);

    CHECK_THROWS_AS(decoupling_check(pair, 1, 0.5, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(decoupling_check(pair, 4, 0.5, 0, 1), std::invalid_argument);
    const BlockEnsembleSpec triple =
        BlockEnsembleSpec::independent(3, AtomDistribution::bernoulli_real(3));
    CHECK_THROWS_AS(decoupling_check(triple, 20, 0.5, 100, 1), std::length_error);
}
