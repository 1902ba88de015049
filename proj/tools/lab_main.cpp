#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rml/experiment.hpp"

namespace {

const std::vector<std::pair<const char*, const char*>> kKinds = {
    {"ensemble-sample", "draw block matrices and dump their spectra"},
    {"radial-test", "compare the pooled radial spectral CDF with the circular law"},
    {"lsv", "tail counts for the smallest singular value under perturbation"},
    {"stieltjes-compare", "empirical vs limiting Stieltjes transform across sizes"},
    {"cubic-eval", "evaluate the limiting-transform cubic on a (z, w) grid"},
    {"smallball", "small-ball probability of a linear form in matrix atoms"},
    {"gap", "generalized progression diagnostics and the pigeonhole bound"},
    {"truncation-check", "variance and cross-correlation bounds after truncation"},
    {"rate-levy", "Levy distance to the limit law across sizes"},
    {"decoupling-check", "compare a multilinear form with its decoupled version"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"random block matrix laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool quiet = false;
    CLI::Option* seed_opt = nullptr;
    for (const auto& [name, help] : kKinds) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        seed_opt = sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "override the config output directory");
        sub->add_flag("--quiet", quiet, "suppress the run summary");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string kind = app.get_subcommands().front()->get_name();

    try {
        rml::ExperimentConfig cfg = rml::ExperimentConfig::from_json_file(config_path);
        if (cfg.experiment.empty())
            cfg.experiment = kind;
        else if (cfg.experiment != kind)
            throw std::invalid_argument("config: experiment: '" + cfg.experiment +
                                        "' does not match subcommand '" + kind + "'");
        if (app.get_subcommands().front()->count("--seed") > 0) cfg.seed = seed;
        (void)seed_opt;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (const char* env = std::getenv("LAB_WORKERS")) {
            char* end = nullptr;
            const unsigned long w = std::strtoul(env, &end, 10);
            if (end == env || *end != '\0' || w == 0)
                throw std::invalid_argument("LAB_WORKERS must be a positive integer");
            cfg.workers = static_cast<unsigned>(w);
        }

        const rml::RunReport rep = rml::run_experiment(cfg);

        if (!quiet) {
            std::printf("experiment: %s\nseed: %llu\nversion: %s\nwall_seconds: %.3f\n",
                        rep.experiment.c_str(),
                        static_cast<unsigned long long>(rep.seed), rep.version.c_str(),
                        rep.wall_seconds);
            for (const auto& [k, v] : rep.notes)
                std::printf("note: %s = %s\n", k.c_str(), v.c_str());
            std::printf("metrics: %zu rows -> %s/metrics.csv\n", rep.metrics.size(),
                        cfg.out_dir.c_str());
            for (const auto& a : rep.assertions)
                std::printf("assert %-32s %s\n", a.name.c_str(), a.pass ? "pass" : "FAIL");
        }
        return rep.all_passed() ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
