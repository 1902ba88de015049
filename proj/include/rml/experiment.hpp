#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rml/ensembles.hpp"
#include "rml/matrix.hpp"
#include "rml/smallball.hpp"

namespace rml {

inline constexpr const char* kLibraryVersion = "1.0.0";

// Parsed experiment description. Kind-specific knobs live in `params` as
// (key, value) pairs extracted from the config document's "params" object.
struct ExperimentConfig {
    int schema_version = 1;
    std::string experiment;
    BlockEnsembleSpec ensemble;
    std::vector<std::size_t> sizes;
    std::size_t samples = 1;
    std::uint64_t seed = 1;
    std::optional<double> trunc_delta;
    std::optional<double> trunc_eta;
    std::vector<cdouble> z_grid;
    std::vector<cdouble> w_grid;
    std::vector<double> s_grid;
    std::vector<double> t_grid;
    std::string out_dir = "lab-out";
    unsigned workers = 1;
    std::vector<cdouble> coefficients;  // linear small-ball coefficient list
    std::optional<Gap> gap;             // arithmetic progression under test
    std::string config_echo;  // pretty-printed source document

    // numeric / string knobs from "params"
    std::vector<std::pair<std::string, double>> num_params;
    std::vector<std::pair<std::string, std::string>> str_params;

    std::optional<double> num_param(const std::string& key) const;
    std::optional<std::string> str_param(const std::string& key) const;

    void validate() const;
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
};

struct MetricRow {
    std::string experiment;
    std::size_t n = 0;  // 0 for size-independent rows
    std::string metric;
    double value = 0.0;
    double ci_halfwidth = 0.0;
    std::uint64_t seed = 0;
};

struct AssertionOutcome {
    std::string name;
    bool pass = false;
};

struct RunReport {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string version = kLibraryVersion;
    double wall_seconds = 0.0;
    std::vector<MetricRow> metrics;
    std::vector<AssertionOutcome> assertions;
    std::vector<std::pair<std::string, std::string>> notes;  // e.g. method used
    std::string config_echo;

    bool all_passed() const;
};

// Dispatches on config.experiment and writes eigenvalues.csv (when the kind
// produces spectra), metrics.csv, and summary.json under config.out_dir.
RunReport run_experiment(const ExperimentConfig& config);

struct LsvReport {
    std::size_t n = 0;
    double a_exponent = 0.0;
    double threshold = 0.0;         // n^(-a_exponent)
    std::vector<double> sigma_min;  // per trial, trial order
    std::size_t tail_count = 0;     // trials with sigma_min <= threshold
};

// Smallest singular value of X + N across seeded trials; N is a fixed
// deterministic perturbation (or absent). Caps: n <= 200, trials <= 10000.
LsvReport lsv_experiment(const BlockEnsembleSpec& spec, std::size_t n, double a_exponent,
                         std::size_t trials, std::uint64_t seed,
                         const std::optional<PerturbationSpec>& perturbation);

struct StieltjesCompareRow {
    std::size_t n = 0;
    double mean_abs_dev = 0.0;   // |m_hat - m| averaged over samples
    double mean_residual = 0.0;  // cubic residual evaluated at m_hat
};

std::vector<StieltjesCompareRow> stieltjes_compare(const BlockEnsembleSpec& spec,
                                                   const std::vector<std::size_t>& sizes,
                                                   cdouble z, cdouble w, std::size_t samples,
                                                   std::uint64_t seed);

}  // namespace rml
