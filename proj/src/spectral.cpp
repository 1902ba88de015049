#include "rml/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rml/linalg.hpp"

namespace rml {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kAnalyticResolution = 2e-6;  // added to Levy vs analytic reference

ComplexMatrix shifted(const ComplexMatrix& m, cdouble z, double normalization) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spectral: matrix must be square");
    if (!(normalization > 0.0) || !std::isfinite(normalization))
        throw std::invalid_argument("spectral: normalization must be positive finite");
    ComplexMatrix b = m;
    b *= 1.0 / normalization;
    for (std::size_t i = 0; i < b.rows(); ++i) b(i, i) -= z;
    return b;
}

// Feasibility of one eps in the Levy definition for two step CDFs. Both
// constraint families attain their suprema at jump points of g (the step
// structure makes every other x redundant), so the check is exact.
bool levy_feasible(const StepCdf& f, const StepCdf& g, double eps) {
    const std::size_t m = g.xs.size();
    for (std::size_t j = 0; j < m; ++j) {
        if (g.cum[j] > f.value_at(g.xs[j] + eps) + eps) return false;
        const double before = j == 0 ? 0.0 : g.cum[j - 1];
        if (f.left_limit(g.xs[j] - eps) > before + eps) return false;
    }
    return true;
}

// Same idea against a continuous reference: on each constancy interval of the
// step CDF the extremum sits at an interval endpoint, where the reference is
// evaluated exactly.
bool levy_feasible(const StepCdf& f, const AnalyticCdf& g, double eps) {
    const std::size_t k = f.xs.size();
    for (std::size_t i = 0; i < k; ++i) {
        const double before = i == 0 ? 0.0 : f.cum[i - 1];
        if (g.f(f.xs[i] - eps) > before + eps) return false;
        if (f.cum[i] > g.f(f.xs[i] + eps) + eps) return false;
    }
    return true;
}

template <typename G>
double levy_bisect(const StepCdf& f, const G& g) {
    if (levy_feasible(f, g, 0.0)) return 0.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (levy_feasible(f, g, mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

void EmpiricalMeasure::validate() const {
    double total = 0.0;
    for (const auto& [pos, w] : atoms) {
        (void)pos;
        if (!(w > 0.0)) throw std::invalid_argument("measure: weights must be positive");
        total += w;
    }
    // accumulation roundoff grows linearly with the atom count
    const double tol = kMassTol + 1e-16 * static_cast<double>(atoms.size());
    if (normalized && std::abs(total - 1.0) > tol)
        throw std::invalid_argument("measure: weights must sum to 1");
}

double StepCdf::value_at(double x) const {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    return it == xs.begin() ? 0.0 : cum[static_cast<std::size_t>(it - xs.begin()) - 1];
}

double StepCdf::left_limit(double x) const {
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    return it == xs.begin() ? 0.0 : cum[static_cast<std::size_t>(it - xs.begin()) - 1];
}

void StepCdf::validate() const {
    if (xs.size() != cum.size() || xs.empty())
        throw std::invalid_argument("cdf: empty or mismatched arrays");
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        if (!(xs[i] < xs[i + 1])) throw std::invalid_argument("cdf: jump points must ascend");
        if (cum[i] > cum[i + 1] + kMassTol)
            throw std::invalid_argument("cdf: values must be nondecreasing");
    }
    if (std::abs(cum.back() - 1.0) > kMassTol)
        throw std::invalid_argument("cdf: final value must be 1");
}

StepCdf StepCdf::from_points(std::vector<std::pair<double, double>> weighted) {
    if (weighted.empty()) throw std::invalid_argument("cdf: no points");
    std::sort(weighted.begin(), weighted.end());
    double total = 0.0;
    for (const auto& [x, w] : weighted) {
        (void)x;
        if (!(w > 0.0)) throw std::invalid_argument("cdf: weights must be positive");
        total += w;
    }
    StepCdf c;
    double running = 0.0;
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        running += weighted[i].second;
        if (!c.xs.empty() && weighted[i].first == c.xs.back()) {
            c.cum.back() = running / total;
        } else {
            c.xs.push_back(weighted[i].first);
            c.cum.push_back(running / total);
        }
    }
    return c;
}

StepCdf StepCdf::from_measure(const EmpiricalMeasure& m) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(m.atoms.size());
    for (const auto& [pos, w] : m.atoms) {
        if (pos.imag() != 0.0)
            throw std::invalid_argument("cdf: measure has non-real positions");
        pts.emplace_back(pos.real(), w);
    }
    return from_points(std::move(pts));
}

EmpiricalMeasure esd(const ComplexMatrix& m, double normalization) {
    if (m.rows() != m.cols()) throw std::invalid_argument("esd: matrix must be square");
    if (!(normalization > 0.0)) throw std::invalid_argument("esd: bad normalization");
    ComplexMatrix a = m;
    a *= 1.0 / normalization;
    const EigenResult res = complex_eigen(a);
    EmpiricalMeasure mu;
    mu.normalized = true;
    const double w = 1.0 / static_cast<double>(res.values.size());
    mu.atoms.reserve(res.values.size());
    for (cdouble v : res.values) mu.atoms.emplace_back(v, w);
    return mu;
}

StepCdf radial_cdf(const EmpiricalMeasure& m) {
    m.validate();
    std::vector<std::pair<double, double>> pts;
    pts.reserve(m.atoms.size());
    for (const auto& [pos, w] : m.atoms) pts.emplace_back(std::abs(pos), w);
    return StepCdf::from_points(std::move(pts));
}

EmpiricalMeasure symmetrized_singular_measure(const ComplexMatrix& m, cdouble z,
                                              double normalization) {
    const ComplexMatrix b = shifted(m, z, normalization);
    const std::vector<double> sv = singular_values(b);
    EmpiricalMeasure nu;
    nu.normalized = true;
    const double w = 0.5 / static_cast<double>(sv.size());
    nu.atoms.reserve(2 * sv.size());
    for (std::size_t i = sv.size(); i-- > 0;) nu.atoms.emplace_back(-sv[i], w);
    for (double s : sv) nu.atoms.emplace_back(s, w);
    std::sort(nu.atoms.begin(), nu.atoms.end(),
              [](const auto& a, const auto& b2) { return a.first.real() < b2.first.real(); });
    return nu;
}

ComplexMatrix hermitization(const ComplexMatrix& m, cdouble z, double normalization) {
    const ComplexMatrix b = shifted(m, z, normalization);
    const std::size_t n = b.rows();
    ComplexMatrix h(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            h(i, n + j) = b(i, j);
            h(n + j, i) = std::conj(b(i, j));
        }
    return h;
}

double levy_distance(const StepCdf& f, const StepCdf& g) { return levy_bisect(f, g); }

double levy_distance(const StepCdf& f, const AnalyticCdf& g) {
    return levy_bisect(f, g) + kAnalyticResolution;
}

double kolmogorov_distance(const StepCdf& f, const StepCdf& g) {
    double d = 0.0;
    for (const StepCdf* first : {&f, &g}) {
        const StepCdf& other = first == &f ? g : f;
        for (std::size_t i = 0; i < first->xs.size(); ++i) {
            const double x = first->xs[i];
            d = std::max(d, std::abs(first->value_at(x) - other.value_at(x)));
            d = std::max(d, std::abs(first->left_limit(x) - other.left_limit(x)));
        }
    }
    return d;
}

double kolmogorov_distance(const StepCdf& f, const AnalyticCdf& g) {
    double d = 0.0;
    for (std::size_t i = 0; i < f.xs.size(); ++i) {
        const double gx = g.f(f.xs[i]);
        d = std::max(d, std::abs(f.cum[i] - gx));
        d = std::max(d, std::abs((i == 0 ? 0.0 : f.cum[i - 1]) - gx));
    }
    return d;
}

ResolventSummary empirical_stieltjes(const ComplexMatrix& m, cdouble z, cdouble w,
                                     double normalization) {
    if (!(w.imag() > 0.0))
        throw std::invalid_argument("empirical_stieltjes: w must be in the upper half-plane");
    const ComplexMatrix b = shifted(m, z, normalization);
    const std::vector<double> sv = singular_values(b);
    ResolventSummary r;
    r.w = w;
    r.z = z;
    cdouble acc{};
    for (double s : sv) acc += 1.0 / (s - w) + 1.0 / (-s - w);
    r.m_hat = acc / (2.0 * static_cast<double>(sv.size()));

    const std::size_t n = m.rows();
    if (n <= 64) {
        ComplexMatrix hw = hermitization(m, z, normalization);
        for (std::size_t i = 0; i < 2 * n; ++i) hw(i, i) -= w;
        const ComplexMatrix res = inverse(hw);
        cdouble t1{}, t4{};
        for (std::size_t i = 0; i < n; ++i) {
            t1 += res(i, i);
            t4 += res(n + i, n + i);
        }
        r.block_trace_upper_left = t1;
        r.block_trace_lower_right = t4;
        r.has_block_traces = true;
    }
    return r;
}

double log_potential(const ComplexMatrix& m, cdouble z, double normalization) {
    const ComplexMatrix b = shifted(m, z, normalization);
    const std::vector<double> sv = singular_values(b);
    if (sv.back() < 1e-13) {
        std::ostringstream os;
        os << "log_potential: shifted matrix is numerically singular (sigma_min = " << sv.back()
           << ")";
        throw std::domain_error(os.str());
    }
    double acc = 0.0;
    for (double s : sv) acc += 2.0 * std::log(s);
    return acc / static_cast<double>(sv.size());
}

double g_emp(const ComplexMatrix& m, double s, double t, double h, double normalization) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("g_emp: bad step");
    const double up = log_potential(m, cdouble{s + h, t}, normalization);
    const double dn = log_potential(m, cdouble{s - h, t}, normalization);
    return (up - dn) / (2.0 * h);
}

}  // namespace rml
