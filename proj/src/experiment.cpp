#include "rml/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rml/limitlaw.hpp"
#include "rml/linalg.hpp"
#include "rml/rng.hpp"
#include "rml/smallball.hpp"
#include "rml/spectral.hpp"
#include "rml/truncation.hpp"

namespace rml {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& prefix) {
    if (!j.is_object() || !j.contains(key)) config_error(prefix + key, "missing field");
    return j.at(key);
}

double as_double(const json& j, const std::string& path) {
    if (!j.is_number()) config_error(path, "expected a number");
    return j.get<double>();
}

std::uint64_t as_u64(const json& j, const std::string& path) {
    if (!j.is_number_unsigned()) config_error(path, "expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) config_error(path, "expected a string");
    return j.get<std::string>();
}

cdouble as_complex(const json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    config_error(path, "expected a number or [re, im]");
}

AtomDistribution parse_atom(const json& j, std::size_t d, const std::string& prefix) {
    const std::string kind = as_string(need(j, "atom", prefix), prefix + "atom");
    if (kind == "bernoulli") return AtomDistribution::bernoulli_real(d);
    if (kind == "gaussian-real") return AtomDistribution::gaussian_real(d);
    if (kind == "gaussian-complex") return AtomDistribution::gaussian_complex(d);
    if (kind == "discrete") {
        const json& sup = need(j, "support", prefix);
        const json& probs = need(j, "probs", prefix);
        if (!sup.is_array() || !probs.is_array())
            config_error(prefix + "support", "support and probs must be arrays");
        std::vector<cdouble> support;
        std::vector<double> weights;
        for (std::size_t i = 0; i < sup.size(); ++i)
            support.push_back(as_complex(sup[i], prefix + "support[" + std::to_string(i) + "]"));
        for (std::size_t i = 0; i < probs.size(); ++i)
            weights.push_back(as_double(probs[i], prefix + "probs[" + std::to_string(i) + "]"));
        const bool normalize = j.value("normalize", true);
        return AtomDistribution::discrete_custom(d, std::move(support), std::move(weights),
                                                 normalize);
    }
    config_error(prefix + "atom", "unknown atom kind '" + kind + "'");
}

BlockEnsembleSpec parse_ensemble(const json& j, const std::string& prefix) {
    if (!j.is_object()) config_error("ensemble", "expected an object");
    const std::size_t d = static_cast<std::size_t>(as_u64(need(j, "d", prefix), prefix + "d"));
    double eta = 1.0;
    if (j.contains("eta")) eta = as_double(j.at("eta"), prefix + "eta");
    std::string mode = "independent";
    if (j.contains("mode")) mode = as_string(j.at("mode"), prefix + "mode");
    const AtomDistribution proto = parse_atom(j, d, prefix);
    if (mode == "independent") return BlockEnsembleSpec::independent(d, proto, eta);
    if (mode == "quaternionic") {
        if (d != 2) config_error(prefix + "mode", "quaternionic mode fixes d = 2");
        return BlockEnsembleSpec::quaternionic(proto, eta);
    }
    if (mode == "correlated-demo") {
        if (d != 2) config_error(prefix + "mode", "correlated-demo mode fixes d = 2");
        return BlockEnsembleSpec::correlated_demo(proto, eta);
    }
    config_error(prefix + "mode", "unknown mode '" + mode + "'");
}

Gap parse_gap(const json& j) {
    if (!j.is_object()) config_error("gap", "expected an object");
    Gap q;
    if (j.contains("offset")) {
        const json& off = j.at("offset");
        if (!off.is_array()) config_error("gap.offset", "expected an array");
        for (std::size_t i = 0; i < off.size(); ++i)
            q.offset.push_back(as_complex(off[i], "gap.offset[" + std::to_string(i) + "]"));
    } else {
        q.offset = {cdouble{}};
    }
    const json& gens = need(j, "generators", "gap.");
    if (!gens.is_array()) config_error("gap.generators", "expected an array of vectors");
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const std::string path = "gap.generators[" + std::to_string(i) + "]";
        if (!gens[i].is_array()) config_error(path, "expected an array");
        std::vector<cdouble> g;
        for (std::size_t c = 0; c < gens[i].size(); ++c)
            g.push_back(as_complex(gens[i][c], path + "[" + std::to_string(c) + "]"));
        q.generators.push_back(std::move(g));
    }
    const json& bounds = need(j, "bounds", "gap.");
    if (!bounds.is_array()) config_error("gap.bounds", "expected an array of [lo, hi]");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        const std::string path = "gap.bounds[" + std::to_string(i) + "]";
        if (!bounds[i].is_array() || bounds[i].size() != 2 ||
            !bounds[i][0].is_number_integer() || !bounds[i][1].is_number_integer())
            config_error(path, "expected [lo, hi] integers");
        q.bounds.emplace_back(bounds[i][0].get<long long>(), bounds[i][1].get<long long>());
    }
    q.validate();
    return q;
}

const std::set<std::string>& known_kinds() {
    static const std::set<std::string> kinds = {
        "ensemble-sample", "radial-test",      "lsv",      "stieltjes-compare",
        "cubic-eval",      "smallball",        "gap",      "truncation-check",
        "rate-levy",       "decoupling-check",
    };
    return kinds;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(seed ^ (0x9e3779b97f4a7c15ULL * (a + 1))) ^
                 (0xbf58476d1ce4e5b9ULL * (b + 1)));
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct EigenRow {
    std::size_t sample = 0;
    std::size_t n = 0;
    double re = 0.0;
    double im = 0.0;
};

struct RunContext {
    const ExperimentConfig& cfg;
    RunReport& rep;
    std::vector<EigenRow> eigen_rows;

    void metric(std::size_t n, std::string name, double value, double ci = 0.0) {
        rep.metrics.push_back({cfg.experiment, n, std::move(name), value, ci, cfg.seed});
    }
    void outcome(std::string name, bool pass) {
        rep.assertions.push_back({std::move(name), pass});
    }
    std::vector<std::size_t> sorted_sizes(const char* who) const {
        if (cfg.sizes.empty())
            config_error("sizes", std::string("nonempty list required for ") + who);
        std::vector<std::size_t> s = cfg.sizes;
        std::sort(s.begin(), s.end());
        return s;
    }
    cdouble first_z(const char* who) const {
        if (cfg.z_grid.empty())
            config_error("z", std::string("nonempty grid required for ") + who);
        return cfg.z_grid.front();
    }
    cdouble first_w(const char* who) const {
        if (cfg.w_grid.empty())
            config_error("w", std::string("nonempty grid required for ") + who);
        return cfg.w_grid.front();
    }
};

double pairing_defect(const std::vector<std::pair<cdouble, double>>& atoms) {
    double worst = 0.0;
    for (const auto& [a, wa] : atoms) {
        (void)wa;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [b, wb] : atoms) {
            (void)wb;
            best = std::min(best, std::abs(std::conj(a) - b));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

void run_spectrum_kind(RunContext& ctx, bool radial) {
    const ExperimentConfig& cfg = ctx.cfg;
    const bool quaternionic = cfg.ensemble.mode == BlockMode::Quaternionic;
    bool pairing_ok = true;
    for (const std::size_t n : ctx.sorted_sizes(cfg.experiment.c_str())) {
        std::vector<std::pair<double, double>> radii;
        double radius_sum = 0.0;
        double defect_max = 0.0;
        double scale = 0.0;
        for (std::size_t s = 0; s < cfg.samples; ++s) {
            const ComplexMatrix x =
                sample_c0_matrix(cfg.ensemble, n, derive_seed(cfg.seed, n, s));
            const EmpiricalMeasure mu = esd(x, std::sqrt(static_cast<double>(n)));
            double radius = 0.0;
            for (const auto& [lambda, weight] : mu.atoms) {
                (void)weight;
                ctx.eigen_rows.push_back({s, n, lambda.real(), lambda.imag()});
                radii.emplace_back(std::abs(lambda), 1.0);
                radius = std::max(radius, std::abs(lambda));
            }
            radius_sum += radius;
            scale = std::max(scale, radius);
            if (quaternionic) defect_max = std::max(defect_max, pairing_defect(mu.atoms));
        }
        ctx.metric(n, "spectral_radius_mean", radius_sum / static_cast<double>(cfg.samples));
        if (quaternionic) {
            ctx.metric(n, "pairing_defect_max", defect_max);
            pairing_ok = pairing_ok && defect_max <= 1e-8 * (1.0 + scale);
        }
        if (radial) {
            const StepCdf emp = StepCdf::from_points(std::move(radii));
            const double gap = kolmogorov_distance(emp, AnalyticCdf{circular_radial_cdf});
            ctx.metric(n, "radial_sup_gap", gap);
            if (const auto cap = cfg.num_param("max_gap"))
                ctx.outcome("radial_sup_gap_n" + std::to_string(n), gap <= *cap);
        }
    }
    if (quaternionic) ctx.outcome("conjugate_pairing", pairing_ok);
}

void run_lsv(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const auto a_exp = cfg.num_param("a_exponent");
    if (!a_exp) config_error("params.a_exponent", "required for lsv");
    const std::size_t trials =
        static_cast<std::size_t>(cfg.num_param("trials").value_or(200.0));
    const std::string pert_kind = cfg.str_param("perturbation").value_or("rank1");
    std::optional<PerturbationSpec> pert;
    if (pert_kind == "rank1")
        pert = PerturbationSpec{1.0, 1.0, 1.0};
    else if (pert_kind != "none")
        config_error("params.perturbation", "expected 'rank1' or 'none'");
    const std::size_t max_tail =
        static_cast<std::size_t>(cfg.num_param("max_tail").value_or(0.0));
    for (const std::size_t n : ctx.sorted_sizes("lsv")) {
        const LsvReport rep = lsv_experiment(cfg.ensemble, n, *a_exp, trials, cfg.seed, pert);
        for (const double s : rep.sigma_min) ctx.metric(n, "sigma_min", s);
        ctx.metric(n, "threshold", rep.threshold);
        ctx.metric(n, "tail_count", static_cast<double>(rep.tail_count));
        ctx.outcome("lsv_tail_n" + std::to_string(n), rep.tail_count <= max_tail);
    }
}

void run_stieltjes_compare(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const cdouble z = ctx.first_z("stieltjes-compare");
    const cdouble w = ctx.first_w("stieltjes-compare");
    const auto rows = stieltjes_compare(cfg.ensemble, ctx.sorted_sizes("stieltjes-compare"), z,
                                        w, cfg.samples, cfg.seed);
    bool decreasing = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ctx.metric(rows[i].n, "mean_abs_dev", rows[i].mean_abs_dev);
        ctx.metric(rows[i].n, "cubic_residual", rows[i].mean_residual);
        if (i > 0) decreasing = decreasing && rows[i].mean_abs_dev < rows[i - 1].mean_abs_dev;
    }
    if (cfg.num_param("assert_decreasing").value_or(0.0) != 0.0)
        ctx.outcome("deviation_decreasing", decreasing);
}

void run_cubic_eval(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (cfg.z_grid.empty()) config_error("z", "nonempty grid required for cubic-eval");
    if (cfg.w_grid.empty()) config_error("w", "nonempty grid required for cubic-eval");
    for (std::size_t i = 0; i < cfg.z_grid.size(); ++i)
        for (std::size_t j = 0; j < cfg.w_grid.size(); ++j) {
            const CubicSolution sol = solve_cubic_m(cfg.z_grid[i], cfg.w_grid[j]);
            const std::string tag =
                "pt" + std::to_string(i) + "_" + std::to_string(j) + "/";
            ctx.metric(0, tag + "m_re", sol.m.real());
            ctx.metric(0, tag + "m_im", sol.m.imag());
            ctx.metric(0, tag + "residual", sol.residual);
        }
}

void run_smallball(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const auto beta = cfg.num_param("beta");
    if (!beta) config_error("params.beta", "required for smallball");
    std::vector<cdouble> coeffs = cfg.coefficients;
    if (coeffs.empty()) {
        const auto ones = cfg.num_param("ones");
        if (!ones) config_error("coefficients", "list or params.ones required for smallball");
        coeffs.assign(static_cast<std::size_t>(*ones), cdouble{1.0, 0.0});
    }
    SmallBallOptions opt;
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    if (const auto trials = cfg.num_param("trials"))
        opt.trials = static_cast<std::uint64_t>(*trials);
    const std::string method = cfg.str_param("method").value_or("automatic");
    if (method == "enumeration")
        opt.method = SmallBallOptions::Method::enumeration;
    else if (method == "lattice")
        opt.method = SmallBallOptions::Method::lattice;
    else if (method == "monte-carlo")
        opt.method = SmallBallOptions::Method::monte_carlo;
    else if (method != "automatic")
        config_error("params.method", "unknown method '" + method + "'");
    const SmallBallResult r =
        linear_smallball(coeffs, cfg.ensemble.atom(0, 0), *beta, opt);
    const std::size_t n = coeffs.size();
    ctx.metric(n, "rho", r.rho, r.ci_half_width);
    ctx.metric(n, "center_re", r.center.real());
    ctx.metric(n, "center_im", r.center.imag());
    if (r.total > 0) {
        ctx.metric(n, "hits", static_cast<double>(r.hits));
        ctx.metric(n, "total", static_cast<double>(r.total));
    }
    if (r.trials > 0) ctx.metric(n, "trials", static_cast<double>(r.trials));
    ctx.rep.notes.emplace_back("method", r.method);
    if (const auto min_rho = cfg.num_param("min_rho"))
        ctx.outcome("smallball_min_rho", r.rho >= *min_rho);
}

void run_gap(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (!cfg.gap) config_error("gap", "stanza required for the gap experiment");
    const Gap& q = *cfg.gap;
    ctx.metric(0, "volume", static_cast<double>(q.volume()));
    ctx.metric(0, "proper", gap_proper(q) ? 1.0 : 0.0);
    const std::size_t n = static_cast<std::size_t>(cfg.num_param("n").value_or(4.0));
    const PigeonholeReport rep = pigeonhole_bound(q, n, cfg.ensemble.atom(0, 0));
    ctx.metric(n, "pigeonhole_bound", rep.bound);
    ctx.metric(n, "rho_beta0", rep.rho);
    ctx.metric(n, "value_set_size", static_cast<double>(rep.value_set_size));
    ctx.metric(n, "verified", rep.verified ? 1.0 : 0.0);
    ctx.outcome("pigeonhole_verified", rep.verified);
}

void run_truncation_check(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (!cfg.trunc_delta || !cfg.trunc_eta)
        config_error("truncation", "stanza required for truncation-check");
    const std::size_t d = cfg.ensemble.d;
    double m2eta = 0.0;
    for (std::size_t i = 0; i < d * d; ++i)
        m2eta = std::max(m2eta, cfg.ensemble.atoms[i].abs_moment(2.0 + *cfg.trunc_eta));
    bool var_ok = true, corr_ok = true;
    for (const std::size_t n : ctx.sorted_sizes("truncation-check")) {
        TruncationParams p;
        p.delta = *cfg.trunc_delta;
        p.eta = *cfg.trunc_eta;
        p.m2eta = m2eta;
        p.n = n;
        for (std::size_t s = 0; s < d; ++s)
            for (std::size_t t = 0; t < d; ++t) {
                const TruncationBoundReport rep =
                    truncation_bound_report(cfg.ensemble.atom(s, t), p);
                const std::string tag = std::to_string(s) + std::to_string(t);
                ctx.metric(n, "var_gap_" + tag, rep.var_gap);
                ctx.metric(n, "var_bound_" + tag, rep.var_bound);
                ctx.metric(n, "corr_gap_" + tag, rep.corr_gap);
                ctx.metric(n, "corr_bound_" + tag, rep.corr_bound);
                var_ok = var_ok && rep.var_pass;
                corr_ok = corr_ok && rep.corr_pass;
            }
    }
    ctx.outcome("variance_within_bound", var_ok);
    ctx.outcome("correlation_within_bound", corr_ok);
}

// limit CDF via one density tabulation; linear interpolation keeps the error
// far below the Monte Carlo resolution this experiment reports
AnalyticCdf interpolated_limit_cdf(cdouble z, std::size_t points) {
    const LimitDensity den = tabulate_limit_density(z, points);
    auto xs = std::make_shared<std::vector<double>>();
    auto cum = std::make_shared<std::vector<double>>();
    xs->reserve(den.grid.size());
    cum->reserve(den.grid.size());
    xs->push_back(den.grid.front().first);
    cum->push_back(0.0);
    for (std::size_t i = 1; i < den.grid.size(); ++i) {
        const auto& [x0, r0] = den.grid[i - 1];
        const auto& [x1, r1] = den.grid[i];
        xs->push_back(x1);
        cum->push_back(cum->back() + 0.5 * (r0 + r1) * (x1 - x0));
    }
    const double total = cum->back();
    for (double& c : *cum) c = std::min(c / total, 1.0);
    AnalyticCdf out;
    out.f = [xs, cum](double x) {
        if (x <= xs->front()) return 0.0;
        if (x >= xs->back()) return 1.0;
        const auto it = std::upper_bound(xs->begin(), xs->end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs->begin());
        const double t = (x - (*xs)[i - 1]) / ((*xs)[i] - (*xs)[i - 1]);
        return (*cum)[i - 1] + t * ((*cum)[i] - (*cum)[i - 1]);
    };
    return out;
}

void run_rate_levy(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (cfg.z_grid.empty()) config_error("z", "nonempty grid required for rate-levy");
    const auto sizes = ctx.sorted_sizes("rate-levy");
    for (std::size_t zi = 0; zi < cfg.z_grid.size(); ++zi) {
        const cdouble z = cfg.z_grid[zi];
        const AnalyticCdf limit = interpolated_limit_cdf(z, 4001);
        const std::string name = cfg.z_grid.size() == 1
                                     ? std::string("levy_distance")
                                     : "levy_distance_z" + std::to_string(zi);
        std::vector<double> means;
        for (const std::size_t n : sizes) {
            double acc = 0.0;
            for (std::size_t s = 0; s < cfg.samples; ++s) {
                const ComplexMatrix x =
                    sample_c0_matrix(cfg.ensemble, n, derive_seed(cfg.seed, n, s));
                const EmpiricalMeasure mu = symmetrized_singular_measure(
                    x, z, std::sqrt(static_cast<double>(n)));
                acc += levy_distance(StepCdf::from_measure(mu), limit);
            }
            means.push_back(acc / static_cast<double>(cfg.samples));
            ctx.metric(n, name, means.back());
        }
        if (cfg.num_param("assert_decreasing").value_or(0.0) != 0.0) {
            bool decreasing = true;
            for (std::size_t i = 1; i < means.size(); ++i)
                decreasing = decreasing && means[i] < means[i - 1];
            ctx.outcome(name + "_decreasing", decreasing);
        }
    }
}

void run_decoupling_check(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const auto beta = cfg.num_param("beta");
    if (!beta) config_error("params.beta", "required for decoupling-check");
    std::size_t n = 0;
    if (const auto np = cfg.num_param("n"))
        n = static_cast<std::size_t>(*np);
    else
        n = ctx.sorted_sizes("decoupling-check").front();
    const std::uint64_t trials =
        static_cast<std::uint64_t>(cfg.num_param("trials").value_or(20000.0));
    const DecouplingReport rep = decoupling_check(cfg.ensemble, n, *beta, trials, cfg.seed);
    ctx.metric(n, "rho_hat", rep.rho_hat);
    ctx.metric(n, "rho_power", rep.rho_power);
    ctx.metric(n, "rho_decoupled_hat", rep.rho_decoupled_hat);
    ctx.metric(n, "ratio", rep.ratio, rep.ratio_ci_half_width);
    ctx.metric(n, "decoupled_radius", rep.decoupled_radius);
    if (const auto min_ratio = cfg.num_param("min_ratio"))
        ctx.outcome("decoupling_ratio", rep.ratio >= *min_ratio);
}

void write_eigen_csv(const std::filesystem::path& dir, const std::vector<EigenRow>& rows) {
    std::ofstream out(dir / "eigenvalues.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "eigenvalues.csv").string());
    out << "sample_index,n,re,im\n";
    for (const EigenRow& r : rows)
        out << r.sample << ',' << r.n << ',' << g17(r.re) << ',' << g17(r.im) << '\n';
}

void write_metrics_csv(const std::filesystem::path& dir, const std::vector<MetricRow>& rows) {
    std::ofstream out(dir / "metrics.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
    out << "experiment,n,metric_name,value,ci_halfwidth\n";
    for (const MetricRow& r : rows)
        out << r.experiment << ',' << r.n << ',' << r.metric << ',' << g17(r.value) << ','
            << g17(r.ci_halfwidth) << '\n';
}

void write_summary_json(const std::filesystem::path& dir, const RunReport& rep) {
    json s;
    s["schema_version"] = 1;
    s["experiment"] = rep.experiment;
    s["seed"] = rep.seed;
    s["version"] = rep.version;
    s["wall_seconds"] = rep.wall_seconds;
    s["config"] = rep.config_echo.empty() ? json::object() : json::parse(rep.config_echo);
    s["metrics"] = json::array();
    for (const MetricRow& r : rep.metrics)
        s["metrics"].push_back({{"experiment", r.experiment},
                                {"n", r.n},
                                {"metric_name", r.metric},
                                {"value", r.value},
                                {"ci_halfwidth", r.ci_halfwidth},
                                {"seed", r.seed}});
    s["assertions"] = json::array();
    for (const AssertionOutcome& a : rep.assertions)
        s["assertions"].push_back({{"name", a.name}, {"pass", a.pass}});
    s["notes"] = json::object();
    for (const auto& [k, v] : rep.notes) s["notes"][k] = v;
    s["all_passed"] = rep.all_passed();
    std::ofstream out(dir / "summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
    out << s.dump(2) << '\n';
}

}  // namespace

std::optional<double> ExperimentConfig::num_param(const std::string& key) const {
    for (const auto& [k, v] : num_params)
        if (k == key) return v;
    return std::nullopt;
}

std::optional<std::string> ExperimentConfig::str_param(const std::string& key) const {
    for (const auto& [k, v] : str_params)
        if (k == key) return v;
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    if (schema_version != 1) config_error("schema_version", "unsupported schema version");
    if (known_kinds().count(experiment) == 0)
        config_error("experiment", "unknown experiment '" + experiment + "'");
    for (const std::size_t n : sizes)
        if (n < 2) config_error("sizes", "every size must be >= 2");
    if (samples < 1) config_error("samples", "must be >= 1");
    if (trunc_delta.has_value() != trunc_eta.has_value())
        config_error("truncation", "needs both delta and eta");
    ensemble.validate();
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) config_error("", "top level must be an object");
    ExperimentConfig cfg;
    cfg.schema_version =
        static_cast<int>(as_u64(need(doc, "schema_version", ""), "schema_version"));
    if (doc.contains("experiment"))
        cfg.experiment = as_string(doc.at("experiment"), "experiment");
    cfg.ensemble = parse_ensemble(need(doc, "ensemble", ""), "ensemble.");
    if (doc.contains("sizes")) {
        const json& sizes = doc.at("sizes");
        if (!sizes.is_array()) config_error("sizes", "expected an array");
        for (std::size_t i = 0; i < sizes.size(); ++i)
            cfg.sizes.push_back(static_cast<std::size_t>(
                as_u64(sizes[i], "sizes[" + std::to_string(i) + "]")));
    }
    if (doc.contains("samples"))
        cfg.samples = static_cast<std::size_t>(as_u64(doc.at("samples"), "samples"));
    if (doc.contains("seed")) cfg.seed = as_u64(doc.at("seed"), "seed");
    if (doc.contains("truncation")) {
        const json& t = doc.at("truncation");
        cfg.trunc_delta = as_double(need(t, "delta", "truncation."), "truncation.delta");
        cfg.trunc_eta = as_double(need(t, "eta", "truncation."), "truncation.eta");
    }
    const auto parse_complex_grid = [&doc](const char* key, std::vector<cdouble>& out) {
        if (!doc.contains(key)) return;
        const json& grid = doc.at(key);
        if (!grid.is_array()) config_error(key, "expected an array");
        for (std::size_t i = 0; i < grid.size(); ++i)
            out.push_back(
                as_complex(grid[i], std::string(key) + "[" + std::to_string(i) + "]"));
    };
    parse_complex_grid("z", cfg.z_grid);
    parse_complex_grid("w", cfg.w_grid);
    const auto parse_real_grid = [&doc](const char* key, std::vector<double>& out) {
        if (!doc.contains(key)) return;
        const json& grid = doc.at(key);
        if (!grid.is_array()) config_error(key, "expected an array");
        for (std::size_t i = 0; i < grid.size(); ++i)
            out.push_back(as_double(grid[i], std::string(key) + "[" + std::to_string(i) + "]"));
    };
    parse_real_grid("s", cfg.s_grid);
    parse_real_grid("t", cfg.t_grid);
    if (doc.contains("out_dir")) cfg.out_dir = as_string(doc.at("out_dir"), "out_dir");
    if (doc.contains("coefficients")) {
        const json& coeffs = doc.at("coefficients");
        if (!coeffs.is_array()) config_error("coefficients", "expected an array");
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            cfg.coefficients.push_back(
                as_complex(coeffs[i], "coefficients[" + std::to_string(i) + "]"));
    }
    if (doc.contains("gap")) cfg.gap = parse_gap(doc.at("gap"));
    if (doc.contains("params")) {
        const json& params = doc.at("params");
        if (!params.is_object()) config_error("params", "expected an object");
        for (const auto& [key, value] : params.items()) {
            if (value.is_number())
                cfg.num_params.emplace_back(key, value.get<double>());
            else if (value.is_boolean())
                cfg.num_params.emplace_back(key, value.get<bool>() ? 1.0 : 0.0);
            else if (value.is_string())
                cfg.str_params.emplace_back(key, value.get<std::string>());
            else
                config_error("params." + key, "expected a number, boolean, or string");
        }
    }
    cfg.config_echo = doc.dump(2) + "\n";
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("config: cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

bool RunReport::all_passed() const {
    for (const AssertionOutcome& a : assertions)
        if (!a.pass) return false;
    return true;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    rep.experiment = cfg.experiment;
    rep.seed = cfg.seed;
    rep.config_echo = cfg.config_echo;
    RunContext ctx{cfg, rep, {}};
    if (cfg.experiment == "ensemble-sample")
        run_spectrum_kind(ctx, false);
    else if (cfg.experiment == "radial-test")
        run_spectrum_kind(ctx, true);
    else if (cfg.experiment == "lsv")
        run_lsv(ctx);
    else if (cfg.experiment == "stieltjes-compare")
        run_stieltjes_compare(ctx);
    else if (cfg.experiment == "cubic-eval")
        run_cubic_eval(ctx);
    else if (cfg.experiment == "smallball")
        run_smallball(ctx);
    else if (cfg.experiment == "gap")
        run_gap(ctx);
    else if (cfg.experiment == "truncation-check")
        run_truncation_check(ctx);
    else if (cfg.experiment == "rate-levy")
        run_rate_levy(ctx);
    else if (cfg.experiment == "decoupling-check")
        run_decoupling_check(ctx);
    else
        config_error("experiment", "unknown experiment '" + cfg.experiment + "'");
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    namespace fs = std::filesystem;
    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("config: out_dir: cannot create '" + cfg.out_dir +
                                 "': " + ec.message());
    if (!ctx.eigen_rows.empty()) write_eigen_csv(dir, ctx.eigen_rows);
    write_metrics_csv(dir, rep.metrics);
    write_summary_json(dir, rep);
    return rep;
}

LsvReport lsv_experiment(const BlockEnsembleSpec& spec, std::size_t n, double a_exponent,
                         std::size_t trials, std::uint64_t seed,
                         const std::optional<PerturbationSpec>& perturbation) {
    spec.validate();
    if (n < 2 || n > 200) throw std::invalid_argument("lsv: n must be in [2, 200]");
    if (trials == 0 || trials > 10000)
        throw std::invalid_argument("lsv: trials must be in [1, 10000]");
    LsvReport rep;
    rep.n = n;
    rep.a_exponent = a_exponent;
    rep.threshold = std::pow(static_cast<double>(n), -a_exponent);
    ComplexMatrix shift;
    if (perturbation)
        shift = low_rank_perturbation(*perturbation, spec.d, n, mix64(seed ^ 0x70657274ULL));
    rep.sigma_min.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        ComplexMatrix x = sample_c0_matrix(spec, n, derive_seed(seed, 0x6c7376, t));
        if (perturbation) x += shift;
        const double smin = singular_values(x).back();
        rep.sigma_min.push_back(smin);
        if (smin <= rep.threshold) ++rep.tail_count;
    }
    return rep;
}

std::vector<StieltjesCompareRow> stieltjes_compare(const BlockEnsembleSpec& spec,
                                                   const std::vector<std::size_t>& sizes,
                                                   cdouble z, cdouble w, std::size_t samples,
                                                   std::uint64_t seed) {
    spec.validate();
    if (sizes.empty()) throw std::invalid_argument("stieltjes: sizes must be nonempty");
    if (samples == 0) throw std::invalid_argument("stieltjes: samples must be >= 1");
    const cdouble m_limit = solve_cubic_m(z, w).m;
    // fixed-point cubic coefficients for the limiting transform at (z, w)
    const cdouble c2 = 2.0 * w;
    const cdouble c1 = w * w - std::norm(z) + 1.0;
    const cdouble c0 = w;
    std::vector<StieltjesCompareRow> rows;
    rows.reserve(sizes.size());
    for (const std::size_t n : sizes) {
        double dev = 0.0, res = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            const ComplexMatrix x = sample_c0_matrix(spec, n, derive_seed(seed, n, s));
            const cdouble m_hat =
                empirical_stieltjes(x, z, w, std::sqrt(static_cast<double>(n))).m_hat;
            dev += std::abs(m_hat - m_limit);
            res += std::abs(((m_hat + c2) * m_hat + c1) * m_hat + c0);
        }
        rows.push_back({n, dev / static_cast<double>(samples),
                        res / static_cast<double>(samples)});
    }
    return rows;
}

}  // namespace rml
