#include "rml/smallball.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace rml {

namespace {

constexpr std::uint64_t kEnumCap = 10000000;      // assignments for exact enumeration
constexpr long long kVolumeCap = 1000000;         // gap element enumeration
constexpr std::size_t kArrayCap = 10000000;       // coefficient array entries
constexpr std::size_t kComplexCenterCap = 512;    // exact planar center search
constexpr std::size_t kMcCenterCandidates = 256;  // planar monte-carlo centers
constexpr std::size_t kFormTermCap = 200000;      // decoupling form terms

using i128 = __int128;

std::vector<std::pair<cdouble, double>> finite_support(const AtomDistribution& atom) {
    switch (atom.kind) {
        case AtomKind::BernoulliReal:
            return {{cdouble{atom.scale, 0.0}, 0.5}, {cdouble{-atom.scale, 0.0}, 0.5}};
        case AtomKind::DiscreteCustom: {
            std::vector<std::pair<cdouble, double>> out;
            out.reserve(atom.support.size());
            for (std::size_t i = 0; i < atom.support.size(); ++i)
                out.emplace_back(atom.scale * atom.support[i], atom.probs[i]);
            return out;
        }
        default:
            return {};
    }
}

bool uniform_support(const std::vector<std::pair<cdouble, double>>& sup) {
    for (const auto& [v, p] : sup) {
        (void)v;
        if (p != sup.front().second) return false;
    }
    return !sup.empty();
}

// s^n with an early exit above the cap (returns cap+1 when exceeded)
std::uint64_t pow_capped(std::uint64_t s, std::size_t n, std::uint64_t cap) {
    if (s == 0) return 0;
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (r > cap / s) return cap + 1;
        r *= s;
    }
    return r;
}

// Aggregated value cloud. `uniform` means every underlying assignment carries
// the same probability, so weights are derived from exact counts.
struct FlatValues {
    std::vector<cdouble> vals;  // sorted by (re, im)
    std::vector<double> weights;
    std::vector<std::uint64_t> counts;
    std::uint64_t total_count = 0;
    bool uniform = false;
    bool all_real = true;
};

struct ValueAgg {
    std::map<std::pair<double, double>, std::pair<double, std::uint64_t>> bins;

    void add(cdouble v, double w, std::uint64_t c) {
        auto& slot = bins[{v.real(), v.imag()}];
        slot.first += w;
        slot.second += c;
    }
    void merge(const ValueAgg& other) {
        for (const auto& [key, slot] : other.bins) {
            auto& mine = bins[key];
            mine.first += slot.first;
            mine.second += slot.second;
        }
    }
};

FlatValues flatten(const ValueAgg& agg, bool uniform, std::uint64_t total) {
    FlatValues fv;
    fv.uniform = uniform;
    fv.total_count = total;
    fv.vals.reserve(agg.bins.size());
    for (const auto& [key, slot] : agg.bins) {
        fv.vals.push_back({key.first, key.second});
        fv.counts.push_back(slot.second);
        fv.weights.push_back(uniform ? static_cast<double>(slot.second) /
                                           static_cast<double>(total)
                                     : slot.first);
        if (key.second != 0.0) fv.all_real = false;
    }
    return fv;
}

FlatValues flatten_cloud(std::vector<cdouble> cloud) {
    std::sort(cloud.begin(), cloud.end(), [](cdouble a, cdouble b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    FlatValues fv;
    fv.uniform = true;
    fv.total_count = cloud.size();
    for (std::size_t i = 0; i < cloud.size();) {
        std::size_t j = i;
        while (j < cloud.size() && cloud[j] == cloud[i]) ++j;
        fv.vals.push_back(cloud[i]);
        fv.counts.push_back(j - i);
        fv.weights.push_back(static_cast<double>(j - i) / static_cast<double>(cloud.size()));
        if (cloud[i].imag() != 0.0) fv.all_real = false;
        i = j;
    }
    return fv;
}

struct CenterPick {
    double mass = -1.0;
    std::uint64_t hits = 0;
    cdouble center;
    bool capped = false;  // planar search refused: too many distinct values
};

bool improves(const FlatValues& fv, const CenterPick& best, double mass, std::uint64_t hits) {
    if (best.mass < 0.0) return true;
    return fv.uniform ? hits > best.hits : mass > best.mass;
}

// sliding window over the real line; the best window [v_i, v_j] has width
// <= 2*beta, so its midpoint covers every member
CenterPick best_center_line(const FlatValues& fv, double beta) {
    const std::size_t n = fv.vals.size();
    std::vector<double> prefw(n + 1, 0.0);
    std::vector<std::uint64_t> prefc(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        prefw[i + 1] = prefw[i] + fv.weights[i];
        prefc[i + 1] = prefc[i] + fv.counts[i];
    }
    CenterPick best;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < i) j = i;
        const double lo = fv.vals[i].real();
        const double pad = 1e-12 * (1.0 + std::abs(lo) + 2.0 * beta);
        while (j + 1 < n && fv.vals[j + 1].real() - lo <= 2.0 * beta + pad) ++j;
        const double mass = prefw[j + 1] - prefw[i];
        const std::uint64_t hits = prefc[j + 1] - prefc[i];
        if (improves(fv, best, mass, hits)) {
            best.mass = mass;
            best.hits = hits;
            best.center = {0.5 * (lo + fv.vals[j].real()), 0.0};
        }
    }
    return best;
}

void score_candidate(const FlatValues& fv, double beta, cdouble cand, CenterPick& best) {
    const double pad = 1e-12 * (1.0 + beta + std::abs(cand));
    const double reach = beta + pad;
    double mass = 0.0;
    std::uint64_t hits = 0;
    for (std::size_t k = 0; k < fv.vals.size(); ++k)
        if (std::abs(fv.vals[k] - cand) <= reach) {
            mass += fv.weights[k];
            hits += fv.counts[k];
        }
    if (improves(fv, best, mass, hits)) {
        best.mass = mass;
        best.hits = hits;
        best.center = cand;
    }
}

// optimal covering disk of radius beta: some optimum is centered either on a
// value (disk touching one point) or on an intersection of two radius-beta
// circles around values <= 2*beta apart (disk pinned by two boundary points)
CenterPick best_center_plane(const FlatValues& fv, double beta) {
    if (fv.vals.size() > kComplexCenterCap) {
        CenterPick c;
        c.capped = true;
        return c;
    }
    CenterPick best;
    for (const cdouble v : fv.vals) score_candidate(fv, beta, v, best);
    if (beta > 0.0) {
        for (std::size_t i = 0; i < fv.vals.size(); ++i)
            for (std::size_t j = i + 1; j < fv.vals.size(); ++j) {
                const cdouble u = fv.vals[i], v = fv.vals[j];
                const double dist = std::abs(v - u);
                if (dist <= 0.0 || dist > 2.0 * beta * (1.0 + 1e-12)) continue;
                const cdouble mid = 0.5 * (u + v);
                const double h2 = beta * beta - 0.25 * dist * dist;
                const double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
                const cdouble normal = cdouble{0.0, 1.0} * (v - u) / dist;
                score_candidate(fv, beta, mid + h * normal, best);
                score_candidate(fv, beta, mid - h * normal, best);
            }
    }
    return best;
}

CenterPick best_center(const FlatValues& fv, double beta) {
    return fv.all_real ? best_center_line(fv, beta) : best_center_plane(fv, beta);
}

// planar monte-carlo clouds are too large for the pinned-disk sweep; scan a
// deterministic spread of value-anchored candidates instead
CenterPick best_center_cloud(const FlatValues& fv, double beta) {
    if (fv.all_real) return best_center_line(fv, beta);
    if (fv.vals.size() <= kComplexCenterCap) return best_center_plane(fv, beta);
    CenterPick best;
    const std::size_t stride =
        (fv.vals.size() + kMcCenterCandidates - 1) / kMcCenterCandidates;
    for (std::size_t i = 0; i < fv.vals.size(); i += stride)
        score_candidate(fv, beta, fv.vals[i], best);
    return best;
}

// Exact enumeration over support-index assignments. Work is partitioned by
// the leading variable's digit; chunk aggregates merge associatively, so the
// result does not depend on the split.
template <typename Eval>
ValueAgg enumerate_assignments(std::size_t num_vars,
                               const std::vector<std::pair<cdouble, double>>& sup,
                               bool uniform, const Eval& eval, unsigned workers) {
    const std::size_t s = sup.size();
    const auto run_chunk = [&](std::size_t lo, std::size_t hi, ValueAgg& agg) {
        Eval local(eval);
        std::vector<std::size_t> digits(num_vars, 0);
        for (std::size_t f = lo; f < hi; ++f) {
            std::fill(digits.begin(), digits.end(), 0);
            digits[0] = f;
            while (true) {
                double w = 1.0;
                if (!uniform)
                    for (const std::size_t dig : digits) w *= sup[dig].second;
                agg.add(local(digits), uniform ? 0.0 : w, 1);
                bool done = true;
                for (std::size_t k = num_vars; k-- > 1;) {
                    if (++digits[k] < s) {
                        done = false;
                        break;
                    }
                    digits[k] = 0;
                }
                if (done) break;
            }
        }
    };
    // weighted bins accumulate floating products whose sum depends on the
    // grouping; only the exact-count path is split-independent, so weighted
    // enumeration stays sequential
    const std::size_t chunks =
        uniform ? std::max<std::size_t>(1, std::min<std::size_t>(workers, s)) : 1;
    if (chunks == 1) {
        ValueAgg agg;
        run_chunk(0, s, agg);
        return agg;
    }
    std::vector<ValueAgg> parts(chunks);
    std::vector<std::thread> pool;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t lo = c * s / chunks, hi = (c + 1) * s / chunks;
        pool.emplace_back([&, lo, hi, c] { run_chunk(lo, hi, parts[c]); });
    }
    for (auto& t : pool) t.join();
    ValueAgg agg;
    for (const auto& part : parts) agg.merge(part);
    return agg;
}

bool gaussian_integer(cdouble c) {
    return c.real() == std::nearbyint(c.real()) && c.imag() == std::nearbyint(c.imag()) &&
           std::abs(c.real()) <= 1e9 && std::abs(c.imag()) <= 1e9;
}

// two-point symmetric uniform support {v, -v} with Gaussian-integer
// coefficients: sums live on v * Z[i] and binomial counts are exact
bool lattice_eligible(const std::vector<cdouble>& a,
                      const std::vector<std::pair<cdouble, double>>& sup) {
    if (sup.size() != 2 || a.size() > 62) return false;
    if (sup[0].first != -sup[1].first || sup[0].second != sup[1].second) return false;
    for (const cdouble c : a)
        if (!gaussian_integer(c)) return false;
    return true;
}

struct LinearLatticeEval {
    const std::vector<cdouble>* coeffs;
    cdouble unit;
    cdouble operator()(const std::vector<std::size_t>& digits) const {
        long long p = 0, q = 0;
        for (std::size_t k = 0; k < digits.size(); ++k) {
            const cdouble c = (*coeffs)[k];
            const long long sign = digits[k] == 0 ? 1 : -1;
            p += sign * static_cast<long long>(c.real());
            q += sign * static_cast<long long>(c.imag());
        }
        return unit * cdouble{static_cast<double>(p), static_cast<double>(q)};
    }
};

struct LinearEval {
    const std::vector<cdouble>* coeffs;
    const std::vector<std::pair<cdouble, double>>* sup;
    cdouble operator()(const std::vector<std::size_t>& digits) const {
        cdouble acc{};
        for (std::size_t k = 0; k < digits.size(); ++k)
            acc += (*coeffs)[k] * (*sup)[digits[k]].first;
        return acc;
    }
};

SmallBallResult exact_result(const FlatValues& fv, const CenterPick& pick, const char* method) {
    SmallBallResult r;
    r.method = method;
    r.center = pick.center;
    if (fv.uniform) {
        r.hits = pick.hits;
        r.total = fv.total_count;
        r.rho = static_cast<double>(pick.hits) / static_cast<double>(fv.total_count);
    } else {
        r.rho = pick.mass;
    }
    return r;
}

SmallBallResult mc_result(const FlatValues& fv, double beta, std::uint64_t trials) {
    const CenterPick pick = best_center_cloud(fv, beta);
    SmallBallResult r;
    r.method = "monte-carlo";
    r.center = pick.center;
    r.trials = trials;
    r.rho = static_cast<double>(pick.hits) / static_cast<double>(trials);
    r.ci_half_width = 1.96 * std::sqrt(std::max(r.rho * (1.0 - r.rho), 0.0) /
                                       static_cast<double>(trials));
    return r;
}

SmallBallResult linear_monte_carlo(const std::vector<cdouble>& a, const AtomDistribution& atom,
                                   double beta, const SmallBallOptions& opt) {
    if (opt.trials == 0) throw std::invalid_argument("small ball: trials must be positive");
    std::vector<cdouble> cloud(opt.trials);
    for (std::uint64_t t = 0; t < opt.trials; ++t) {
        CounterRng rng(opt.seed, 101, t, 0);
        cdouble acc{};
        for (const cdouble c : a) acc += c * atom.sample(rng);
        cloud[t] = acc;
    }
    return mc_result(flatten_cloud(std::move(cloud)), beta, opt.trials);
}

SmallBallResult linear_lattice(const std::vector<cdouble>& a, cdouble unit, double beta) {
    std::map<std::pair<long long, long long>, std::uint64_t> state{{{0, 0}, 1}};
    for (const cdouble c : a) {
        const long long cr = static_cast<long long>(c.real());
        const long long ci = static_cast<long long>(c.imag());
        std::map<std::pair<long long, long long>, std::uint64_t> next;
        for (const auto& [pq, cnt] : state) {
            next[{pq.first + cr, pq.second + ci}] += cnt;
            next[{pq.first - cr, pq.second - ci}] += cnt;
        }
        state = std::move(next);
        if (state.size() > 4000000)
            throw std::length_error("small ball: lattice state cap exceeded");
    }
    ValueAgg agg;
    for (const auto& [pq, cnt] : state)
        agg.add(unit * cdouble{static_cast<double>(pq.first), static_cast<double>(pq.second)},
                0.0, cnt);
    const FlatValues fv = flatten(agg, true, std::uint64_t{1} << a.size());
    const CenterPick pick = best_center(fv, beta);
    if (pick.capped)
        throw std::length_error("small ball: value set too large for exact center search");
    return exact_result(fv, pick, "dp-lattice");
}

void check_beta(double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("small ball: beta must be finite and nonnegative");
}

}  // namespace

bool Gap::symmetric() const {
    for (const cdouble c : offset)
        if (c != cdouble{}) return false;
    for (const auto& [lo, hi] : bounds)
        if (lo != -hi) return false;
    return true;
}

long long Gap::volume() const {
    i128 v = 1;
    for (const auto& [lo, hi] : bounds) {
        v *= static_cast<i128>(hi - lo + 1);
        if (v > static_cast<i128>(4000000000000000000LL))
            throw std::overflow_error("gap: volume overflow");
    }
    return static_cast<long long>(v);
}

void Gap::validate() const {
    if (offset.empty()) throw std::invalid_argument("gap: ambient dimension must be >= 1");
    if (generators.size() != bounds.size())
        throw std::invalid_argument("gap: generators and bounds must align");
    for (const auto& g : generators)
        if (g.size() != offset.size())
            throw std::invalid_argument("gap: generator dimension mismatch");
    for (const auto& [lo, hi] : bounds)
        if (lo > hi) throw std::invalid_argument("gap: empty bound range");
}

Gap Gap::symmetric_rank1(cdouble g, long long k) {
    if (k < 0) throw std::invalid_argument("gap: bound must be nonnegative");
    Gap q;
    q.offset = {cdouble{}};
    q.generators = {{g}};
    q.bounds = {{-k, k}};
    return q;
}

std::vector<GapElement> gap_elements(const Gap& q) {
    q.validate();
    const long long vol = q.volume();
    if (vol > kVolumeCap) throw std::length_error("gap: volume cap exceeded");
    std::vector<GapElement> out;
    out.reserve(static_cast<std::size_t>(vol));
    std::vector<long long> k(q.rank());
    for (std::size_t i = 0; i < q.rank(); ++i) k[i] = q.bounds[i].first;
    while (true) {
        GapElement e;
        e.point = q.offset;
        e.coeffs = k;
        for (std::size_t i = 0; i < q.rank(); ++i)
            for (std::size_t c = 0; c < q.dim(); ++c)
                e.point[c] += static_cast<double>(k[i]) * q.generators[i][c];
        out.push_back(std::move(e));
        bool done = true;
        for (std::size_t i = q.rank(); i-- > 0;) {
            if (++k[i] <= q.bounds[i].second) {
                done = false;
                break;
            }
            k[i] = q.bounds[i].first;
        }
        if (done) break;
    }
    return out;
}

bool gap_proper(const Gap& q) {
    const auto elems = gap_elements(q);
    std::vector<std::vector<double>> pts;
    pts.reserve(elems.size());
    for (const auto& e : elems) {
        std::vector<double> flat;
        flat.reserve(2 * e.point.size());
        for (const cdouble c : e.point) {
            flat.push_back(c.real());
            flat.push_back(c.imag());
        }
        pts.push_back(std::move(flat));
    }
    std::sort(pts.begin(), pts.end());
    return std::adjacent_find(pts.begin(), pts.end()) == pts.end();
}

std::optional<GapElement> gap_membership(const Gap& q, const std::vector<cdouble>& x,
                                         double delta) {
    if (x.size() != q.dim()) throw std::invalid_argument("gap: query dimension mismatch");
    if (!(delta >= 0.0)) throw std::invalid_argument("gap: delta must be nonnegative");
    const auto elems = gap_elements(q);
    const GapElement* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const auto& e : elems) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) d2 += std::norm(x[c] - e.point[c]);
        // enumeration is in lexicographic coefficient order, so strict '<'
        // keeps the lexicographically smallest tuple among equal distances
        if (d2 < best_d2) {
            best_d2 = d2;
            best = &e;
        }
    }
    if (best != nullptr && best_d2 <= delta * delta) return *best;
    return std::nullopt;
}

Gap gap_dilate(const Gap& q, long long n) {
    q.validate();
    if (!q.symmetric()) throw std::invalid_argument("gap: dilation needs a symmetric gap");
    if (n < 1) throw std::invalid_argument("gap: dilation factor must be >= 1");
    Gap out = q;
    for (auto& [lo, hi] : out.bounds) {
        if (hi > 4000000000000000000LL / n) throw std::overflow_error("gap: dilation overflow");
        lo *= n;
        hi *= n;
    }
    return out;
}

CoefficientArray CoefficientArray::zeros(std::size_t degree, std::size_t side) {
    CoefficientArray a;
    a.degree = degree;
    a.side = side;
    const std::uint64_t count = pow_capped(side, degree, kArrayCap);
    if (count > kArrayCap) throw std::length_error("coefficient array: size cap exceeded");
    a.entries.assign(static_cast<std::size_t>(count), cdouble{});
    return a;
}

std::size_t CoefficientArray::flat(const std::vector<std::size_t>& idx) const {
    if (idx.size() != degree) throw std::invalid_argument("coefficient array: index arity");
    std::size_t f = 0;
    for (const std::size_t i : idx) {
        if (i >= side) throw std::out_of_range("coefficient array: index out of range");
        f = f * side + i;
    }
    return f;
}

void CoefficientArray::validate() const {
    if (side == 0) throw std::invalid_argument("coefficient array: side must be >= 1");
    const std::uint64_t count = pow_capped(side, degree, kArrayCap);
    if (count > kArrayCap) throw std::length_error("coefficient array: size cap exceeded");
    if (entries.size() != count)
        throw std::invalid_argument("coefficient array: entry count mismatch");
}

SmallBallResult linear_smallball(const std::vector<cdouble>& a, const AtomDistribution& atom,
                                 double beta) {
    return linear_smallball(a, atom, beta, SmallBallOptions{});
}

SmallBallResult linear_smallball(const std::vector<cdouble>& a, const AtomDistribution& atom,
                                 double beta, const SmallBallOptions& opt) {
    if (a.empty()) throw std::invalid_argument("small ball: empty coefficient sequence");
    check_beta(beta);
    const auto sup = finite_support(atom);
    const bool uniform = uniform_support(sup);
    const bool can_enum =
        !sup.empty() && pow_capped(sup.size(), a.size(), kEnumCap) <= kEnumCap;
    const bool can_lattice = !sup.empty() && lattice_eligible(a, sup);
    using Method = SmallBallOptions::Method;

    const auto run_enum = [&](bool allow_mc_fallback) -> SmallBallResult {
        const std::uint64_t total = pow_capped(sup.size(), a.size(), kEnumCap);
        ValueAgg agg;
        if (can_lattice) {
            // integer accumulation keeps bins exact and bit-identical to the
            // lattice method
            LinearLatticeEval eval{&a, sup[0].first};
            agg = enumerate_assignments(a.size(), sup, uniform, eval, opt.workers);
        } else {
            LinearEval eval{&a, &sup};
            agg = enumerate_assignments(a.size(), sup, uniform, eval, opt.workers);
        }
        const FlatValues fv = flatten(agg, uniform, total);
        const CenterPick pick = best_center(fv, beta);
        if (pick.capped) {
            if (allow_mc_fallback) return linear_monte_carlo(a, atom, beta, opt);
            throw std::length_error(
                "small ball: value set too large for exact center search");
        }
        return exact_result(fv, pick, "exact-enumeration");
    };

    switch (opt.method) {
        case Method::automatic:
            if (can_enum) return run_enum(true);
            if (can_lattice) return linear_lattice(a, sup[0].first, beta);
            return linear_monte_carlo(a, atom, beta, opt);
        case Method::enumeration:
            if (sup.empty())
                throw std::invalid_argument("small ball: atom has no finite support");
            if (!can_enum) throw std::length_error("small ball: enumeration cap exceeded");
            return run_enum(false);
        case Method::lattice:
            if (!can_lattice)
                throw std::invalid_argument(
                    "small ball: lattice method needs a symmetric two-point atom and "
                    "Gaussian-integer coefficients");
            return linear_lattice(a, sup[0].first, beta);
        case Method::monte_carlo:
            return linear_monte_carlo(a, atom, beta, opt);
    }
    throw std::logic_error("small ball: unreachable");
}

namespace {

struct MultilinearEval {
    const CoefficientArray* form;
    const CoefficientArray* shift;  // may be null
    const std::vector<std::pair<cdouble, double>>* sup;
    mutable std::vector<cdouble> x;        // degree * side variable values
    mutable std::vector<cdouble> scratch;  // contraction buffer

    cdouble contract(const CoefficientArray& arr) const {
        const std::size_t n = arr.side;
        scratch.assign(arr.entries.begin(), arr.entries.end());
        std::size_t len = arr.entries.size();
        for (std::size_t g = arr.degree; g-- > 1;) {
            const cdouble* xg = x.data() + g * n;
            const std::size_t next_len = len / n;
            for (std::size_t b = 0; b < next_len; ++b) {
                cdouble acc{};
                for (std::size_t k = 0; k < n; ++k) acc += scratch[b * n + k] * xg[k];
                scratch[b] = acc;
            }
            len = next_len;
        }
        cdouble acc{};
        for (std::size_t k = 0; k < len; ++k) acc += scratch[k] * x[k];
        return acc;
    }

    cdouble operator()(const std::vector<std::size_t>& digits) const {
        for (std::size_t v = 0; v < digits.size(); ++v) x[v] = (*sup)[digits[v]].first;
        cdouble value = contract(*form);
        if (shift != nullptr && shift->degree > 0) value += contract(*shift);
        if (shift != nullptr && shift->degree == 0) value += shift->entries[0];
        return value;
    }
};

SmallBallResult multilinear_monte_carlo(const CoefficientArray& form,
                                        const std::optional<CoefficientArray>& shift,
                                        const AtomDistribution& atom, double beta,
                                        const SmallBallOptions& opt) {
    if (opt.trials == 0) throw std::invalid_argument("small ball: trials must be positive");
    const std::size_t num_vars = form.degree * form.side;
    MultilinearEval eval{&form, shift ? &*shift : nullptr, nullptr, {}, {}};
    eval.x.resize(num_vars);
    std::vector<cdouble> cloud(opt.trials);
    for (std::uint64_t t = 0; t < opt.trials; ++t) {
        CounterRng rng(opt.seed, 102, t, 0);
        for (std::size_t v = 0; v < num_vars; ++v) eval.x[v] = atom.sample(rng);
        cdouble value = eval.contract(form);
        if (shift && shift->degree > 0) value += eval.contract(*shift);
        if (shift && shift->degree == 0) value += shift->entries[0];
        cloud[t] = value;
    }
    return mc_result(flatten_cloud(std::move(cloud)), beta, opt.trials);
}

}  // namespace

SmallBallResult multilinear_smallball(const CoefficientArray& a, const AtomDistribution& atom,
                                      double beta) {
    return multilinear_smallball(a, atom, beta, std::nullopt, SmallBallOptions{});
}

SmallBallResult multilinear_smallball(const CoefficientArray& a, const AtomDistribution& atom,
                                      double beta, const std::optional<CoefficientArray>& shift,
                                      const SmallBallOptions& opt) {
    a.validate();
    check_beta(beta);
    if (a.degree == 0) throw std::invalid_argument("small ball: form degree must be >= 1");
    if (shift) {
        shift->validate();
        if (shift->degree + 1 != a.degree || shift->side != a.side)
            throw std::invalid_argument("small ball: shift must be one degree lower");
    }
    const auto sup = finite_support(atom);
    const bool uniform = uniform_support(sup);
    const std::size_t num_vars = a.degree * a.side;
    const std::uint64_t assignments = pow_capped(sup.size(), num_vars, kEnumCap);
    // per-assignment evaluation touches every entry once
    const bool can_enum = !sup.empty() && assignments <= kEnumCap &&
                          assignments <= 200000000 / std::max<std::size_t>(a.entries.size(), 1);
    using Method = SmallBallOptions::Method;
    if (opt.method == Method::lattice)
        throw std::invalid_argument("small ball: lattice method is linear-only");

    const auto run_enum = [&](bool allow_mc_fallback) -> SmallBallResult {
        const std::uint64_t total = pow_capped(sup.size(), num_vars, kEnumCap);
        MultilinearEval eval{&a, shift ? &*shift : nullptr, &sup, {}, {}};
        eval.x.resize(num_vars);
        const ValueAgg agg = enumerate_assignments(num_vars, sup, uniform, eval, opt.workers);
        const FlatValues fv = flatten(agg, uniform, total);
        const CenterPick pick = best_center(fv, beta);
        if (pick.capped) {
            if (allow_mc_fallback) return multilinear_monte_carlo(a, shift, atom, beta, opt);
            throw std::length_error(
                "small ball: value set too large for exact center search");
        }
        return exact_result(fv, pick, "exact-enumeration");
    };

    switch (opt.method) {
        case Method::automatic:
            if (can_enum) return run_enum(true);
            return multilinear_monte_carlo(a, shift, atom, beta, opt);
        case Method::enumeration:
            if (sup.empty())
                throw std::invalid_argument("small ball: atom has no finite support");
            if (!can_enum) throw std::length_error("small ball: enumeration cap exceeded");
            return run_enum(false);
        case Method::monte_carlo:
            return multilinear_monte_carlo(a, shift, atom, beta, opt);
        case Method::lattice:
            break;
    }
    throw std::logic_error("small ball: unreachable");
}

PigeonholeReport pigeonhole_bound(const Gap& q, std::size_t n, const AtomDistribution& atom) {
    q.validate();
    std::vector<cdouble> sum_of_generators(1, cdouble{});
    if (q.dim() != 1)
        throw std::invalid_argument("pigeonhole: coefficients need a scalar gap");
    for (const auto& g : q.generators) sum_of_generators[0] += g[0];
    std::vector<cdouble> coeffs(n, sum_of_generators[0]);
    return pigeonhole_bound(q, n, atom, coeffs);
}

PigeonholeReport pigeonhole_bound(const Gap& q, std::size_t n, const AtomDistribution& atom,
                                  const std::vector<cdouble>& coefficients) {
    q.validate();
    if (q.dim() != 1)
        throw std::invalid_argument("pigeonhole: coefficients need a scalar gap");
    if (n == 0 || coefficients.size() != n)
        throw std::invalid_argument("pigeonhole: need n coefficients");
    if (finite_support(atom).empty())
        throw std::invalid_argument("pigeonhole: atom must have finite support");
    for (const cdouble c : coefficients)
        if (!gap_membership(q, {c}, 1e-9))
            throw std::invalid_argument("pigeonhole: coefficient outside the gap");

    const Gap dilated = gap_dilate(q, static_cast<long long>(n));
    const auto elems = gap_elements(dilated);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(elems.size());
    for (const auto& e : elems) pts.emplace_back(e.point[0].real(), e.point[0].imag());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    PigeonholeReport rep;
    rep.value_set_size = pts.size();
    rep.bound = 1.0 / static_cast<double>(pts.size());
    const SmallBallResult r = linear_smallball(coefficients, atom, 0.0);
    rep.rho = r.rho;
    if (r.total > 0)
        rep.verified = r.hits * static_cast<std::uint64_t>(pts.size()) >= r.total;
    else
        rep.verified = rep.rho >= rep.bound * (1.0 - 1e-12);
    return rep;
}

namespace {

i128 det_bareiss(std::vector<std::vector<i128>> m) {
    const std::size_t n = m.size();
    if (n == 0) return 1;
    i128 prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        std::size_t piv = k;
        while (piv < n && m[piv][k] == 0) ++piv;
        if (piv == n) return 0;
        if (piv != k) {
            std::swap(m[piv], m[k]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j)
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
        prev = m[k][k];
    }
    return sign > 0 ? m[n - 1][n - 1] : -m[n - 1][n - 1];
}

// fraction-free echelon with full pivoting; reports original pivot rows/cols
std::size_t echelon_pivots(std::vector<std::vector<i128>> e, std::vector<std::size_t>& prow,
                           std::vector<std::size_t>& pcol) {
    const std::size_t rows = e.size(), cols = e[0].size();
    std::vector<std::size_t> rid(rows), cid(cols);
    std::iota(rid.begin(), rid.end(), 0);
    std::iota(cid.begin(), cid.end(), 0);
    i128 prev = 1;
    std::size_t k = 0;
    while (k < rows && k < cols) {
        std::size_t pi = rows, pj = cols;
        for (std::size_t i = k; i < rows && pi == rows; ++i)
            for (std::size_t j = k; j < cols; ++j)
                if (e[i][j] != 0) {
                    pi = i;
                    pj = j;
                    break;
                }
        if (pi == rows) break;
        std::swap(e[pi], e[k]);
        std::swap(rid[pi], rid[k]);
        for (auto& row : e) std::swap(row[pj], row[k]);
        std::swap(cid[pj], cid[k]);
        for (std::size_t i = k + 1; i < rows; ++i) {
            for (std::size_t j = k + 1; j < cols; ++j)
                e[i][j] = (e[i][j] * e[k][k] - e[i][k] * e[k][j]) / prev;
            e[i][k] = 0;
        }
        prev = e[k][k];
        ++k;
    }
    prow.assign(rid.begin(), rid.begin() + static_cast<std::ptrdiff_t>(k));
    pcol.assign(cid.begin(), cid.begin() + static_cast<std::ptrdiff_t>(k));
    return k;
}

}  // namespace

std::vector<long long> gap_integer_relation(
    const std::vector<std::vector<long long>>& coords) {
    const std::size_t count = coords.size();
    if (count < 2) throw std::invalid_argument("integer relation: need at least two vectors");
    const std::size_t r = coords[0].size();
    if (r == 0 || count != r + 1)
        throw std::invalid_argument("integer relation: need r+1 vectors in Z^r");
    bool any_nonzero = false;
    for (const auto& v : coords) {
        if (v.size() != r)
            throw std::invalid_argument("integer relation: inconsistent dimensions");
        for (const long long x : v) any_nonzero = any_nonzero || x != 0;
    }
    if (!any_nonzero)
        throw std::invalid_argument("integer relation: all coordinates are zero");

    // M is r x (r+1): column i holds coords[i]
    std::vector<std::vector<i128>> m(r, std::vector<i128>(count));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t row = 0; row < r; ++row) m[row][i] = coords[i][row];

    std::vector<i128> alpha(count, 0);
    bool all_zero = true;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<std::vector<i128>> minor(r, std::vector<i128>(r));
        for (std::size_t row = 0; row < r; ++row) {
            std::size_t c = 0;
            for (std::size_t j = 0; j < count; ++j)
                if (j != i) minor[row][c++] = m[row][j];
        }
        const i128 det = det_bareiss(minor);
        alpha[i] = (i % 2 == 0) ? det : -det;
        all_zero = all_zero && det == 0;
    }

    if (all_zero) {
        // rank-deficient columns: Cramer construction on a pivot submatrix
        std::vector<std::size_t> prow, pcol;
        const std::size_t rank = echelon_pivots(m, prow, pcol);
        std::vector<bool> is_pivot(count, false);
        for (const std::size_t c : pcol) is_pivot[c] = true;
        std::size_t free_col = count;
        for (std::size_t c = 0; c < count; ++c)
            if (!is_pivot[c]) {
                free_col = c;
                break;
            }
        const auto sub = [&](std::size_t replace_with) {
            std::vector<std::vector<i128>> s(rank, std::vector<i128>(rank));
            for (std::size_t i = 0; i < rank; ++i)
                for (std::size_t j = 0; j < rank; ++j) {
                    const std::size_t col = j == replace_with ? free_col : pcol[j];
                    s[i][j] = m[prow[i]][col];
                }
            return s;
        };
        std::fill(alpha.begin(), alpha.end(), i128{0});
        for (std::size_t j = 0; j < rank; ++j) alpha[pcol[j]] = det_bareiss(sub(j));
        alpha[free_col] = -det_bareiss(sub(rank));  // rank is never a valid j: plain pivots
    }

    // gcd-reduce, first nonzero entry positive
    i128 g = 0;
    for (const i128 x : alpha) {
        i128 ax = x < 0 ? -x : x;
        while (ax != 0) {
            const i128 t = g % ax;
            g = ax;
            ax = t;
        }
    }
    if (g == 0) throw std::logic_error("integer relation: degenerate construction");
    int flip = 0;
    for (const i128 x : alpha) {
        if (x == 0) continue;
        flip = x < 0 ? -1 : 1;
        break;
    }
    std::vector<long long> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const i128 v = alpha[i] / g * flip;
        if (v > std::numeric_limits<long long>::max() ||
            v < std::numeric_limits<long long>::min())
            throw std::overflow_error("integer relation: coefficients overflow");
        out[i] = static_cast<long long>(v);
    }

    // the construction guarantees annihilation; verify exactly anyway
    for (std::size_t row = 0; row < r; ++row) {
        i128 acc = 0;
        for (std::size_t i = 0; i < count; ++i)
            acc += static_cast<i128>(out[i]) * coords[i][row];
        if (acc != 0) throw std::logic_error("integer relation: annihilation failed");
    }
    return out;
}

namespace {

cdouble small_det(const std::vector<cdouble>& m, std::size_t d) {
    if (d == 1) return m[0];
    if (d == 2) return m[0] * m[3] - m[1] * m[2];
    if (d == 3)
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    // Laplace expansion along the first row
    cdouble acc{};
    std::vector<cdouble> minor((d - 1) * (d - 1));
    for (std::size_t c = 0; c < d; ++c) {
        std::size_t w = 0;
        for (std::size_t i = 1; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (j != c) minor[w++] = m[i * d + j];
        const cdouble term = m[c] * small_det(minor, d - 1);
        acc += (c % 2 == 0) ? term : -term;
    }
    return acc;
}

}  // namespace

DecouplingReport decoupling_check(const BlockEnsembleSpec& spec, std::size_t n, double beta,
                                  std::uint64_t trials, std::uint64_t seed) {
    spec.validate();
    check_beta(beta);
    const std::size_t d = spec.d;
    if (n < d)
        throw std::invalid_argument("decoupling: partition of [n] into d classes needs n >= d");
    if (trials == 0) throw std::invalid_argument("decoupling: trials must be positive");
    const std::size_t dn = d * n;
    const std::uint64_t terms = pow_capped(dn, d, kFormTermCap);
    if (terms > kFormTermCap) throw std::length_error("decoupling: form term cap exceeded");

    DecouplingReport rep;
    rep.d = d;
    rep.n = n;
    rep.beta = beta;
    rep.trials = trials;
    rep.seed = seed;
    rep.decoupled_radius = beta * std::max(1.0, std::sqrt(std::log(static_cast<double>(n))));

    // contiguous ordered partition of the n column blocks
    rep.partition.assign(d, {});
    for (std::size_t l = 0; l < n; ++l) rep.partition[l * d / n].push_back(l);

    // coefficient array: seeded +-1 per ordered column tuple
    std::vector<double> signs(static_cast<std::size_t>(terms));
    for (std::size_t idx = 0; idx < signs.size(); ++idx) {
        CounterRng rng(seed, 3, idx, 0);
        signs[idx] = (rng.next_u64() & 1u) ? 1.0 : -1.0;
    }

    const std::uint64_t seed_plain = mix64(seed ^ 0x706c61696eULL);
    const std::uint64_t seed_left = mix64(seed ^ 0x6c65667421ULL);
    const std::uint64_t seed_right = mix64(seed ^ 0x7269676874ULL);

    std::vector<cdouble> tuple(d * d), tuple2(d * d);
    std::vector<cdouble> cols(dn * d);  // column j at [j*d .. j*d+d)
    std::vector<cdouble> mat(d * d);

    const auto fill_columns = [&](std::uint64_t s1, std::uint64_t s2, bool diff,
                                  std::uint64_t trial) {
        for (std::size_t l = 0; l < n; ++l) {
            sample_block_tuple(spec, s1, trial, l, tuple.data());
            if (diff) {
                sample_block_tuple(spec, s2, trial, l, tuple2.data());
                for (std::size_t e = 0; e < d * d; ++e) tuple[e] -= tuple2[e];
            }
            for (std::size_t row = 0; row < d; ++row)
                for (std::size_t t = 0; t < d; ++t) cols[(l * d + t) * d + row] = tuple[row * d + t];
        }
    };

    // sum over ordered tuples of column indices, each position ranging over
    // its allowed list; repeated columns contribute zero and are skipped
    const auto form_value = [&](const std::vector<std::vector<std::size_t>>& ranges) {
        std::vector<std::size_t> pos(d, 0);
        cdouble acc{};
        while (true) {
            bool repeat = false;
            for (std::size_t a = 0; a < d && !repeat; ++a)
                for (std::size_t b = a + 1; b < d; ++b)
                    if (ranges[a][pos[a]] == ranges[b][pos[b]]) {
                        repeat = true;
                        break;
                    }
            if (!repeat) {
                std::size_t flat = 0;
                for (std::size_t k = 0; k < d; ++k) {
                    const std::size_t col = ranges[k][pos[k]];
                    flat = flat * dn + col;
                    for (std::size_t row = 0; row < d; ++row)
                        mat[row * d + k] = cols[col * d + row];
                }
                acc += signs[flat] * small_det(mat, d);
            }
            bool done = true;
            for (std::size_t k = d; k-- > 0;) {
                if (++pos[k] < ranges[k].size()) {
                    done = false;
                    break;
                }
                pos[k] = 0;
            }
            if (done) break;
        }
        return acc;
    };

    std::vector<std::vector<std::size_t>> full_ranges(d);
    for (std::size_t k = 0; k < d; ++k) {
        full_ranges[k].resize(dn);
        std::iota(full_ranges[k].begin(), full_ranges[k].end(), 0);
    }
    std::vector<std::vector<std::size_t>> block_ranges(d);
    for (std::size_t k = 0; k < d; ++k)
        for (const std::size_t l : rep.partition[k])
            for (std::size_t t = 0; t < d; ++t) block_ranges[k].push_back(l * d + t);

    std::vector<cdouble> cloud(trials);
    for (std::uint64_t t = 0; t < trials; ++t) {
        fill_columns(seed_plain, 0, false, t);
        cloud[t] = form_value(full_ranges);
    }
    const FlatValues fv = flatten_cloud(std::move(cloud));
    const CenterPick pick = best_center_cloud(fv, beta);
    rep.rho_hat = static_cast<double>(pick.hits) / static_cast<double>(trials);
    rep.center = pick.center;
    rep.rho_power = std::pow(rep.rho_hat, 2.0 * static_cast<double>(d));

    std::uint64_t dec_hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        fill_columns(seed_left, seed_right, true, t);
        if (std::abs(form_value(block_ranges) - rep.center) <= rep.decoupled_radius)
            ++dec_hits;
    }
    rep.rho_decoupled_hat = static_cast<double>(dec_hits) / static_cast<double>(trials);

    const double hw_rho = 1.96 * std::sqrt(std::max(rep.rho_hat * (1.0 - rep.rho_hat), 0.0) /
                                           static_cast<double>(trials));
    const double hw_dec =
        1.96 * std::sqrt(std::max(rep.rho_decoupled_hat * (1.0 - rep.rho_decoupled_hat), 0.0) /
                         static_cast<double>(trials));
    rep.ratio = rep.rho_decoupled_hat / std::max(rep.rho_power, 1e-300);
    const double rel_dec = hw_dec / std::max(rep.rho_decoupled_hat, 1e-300);
    const double rel_rho = 2.0 * static_cast<double>(d) * hw_rho / std::max(rep.rho_hat, 1e-300);
    rep.ratio_ci_half_width = rep.ratio * std::sqrt(rel_dec * rel_dec + rel_rho * rel_rho);
    return rep;
}

}  // namespace rml
