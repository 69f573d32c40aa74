// Command-line front end: one subcommand per experiment kind.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "nsm/config.hpp"
#include "nsm/errors.hpp"
#include "nsm/harness.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> workers;
};

struct MalliavinFlags {
    std::optional<double> T, alpha;
    std::optional<std::int64_t> node_stride;
    std::optional<int> N, gram_kmax;
};

struct SpanningFlags {
    std::string modes;
    std::optional<int> radius;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
    auto* opt = sub->add_option("--config", c.config, "Experiment config file")->check(CLI::ExistingFile);
    if (config_required) opt->required();
    sub->add_option("--seed", c.seed, "Override the master seed");
    sub->add_option("--out", c.out, "Output directory (overrides config and " + std::string(nsm::kOutDirEnv) + ")");
    sub->add_option("--paths", c.paths, "Override the path count")->check(CLI::PositiveNumber);
    sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

int run(nsm::ExperimentConfig cfg, const Common& c) {
    if (c.seed) cfg.seed = *c.seed;
    if (c.paths) cfg.paths = *c.paths;
    if (c.workers) cfg.workers = *c.workers;
    cfg.out_dir = nsm::resolve_out_dir(cfg, c.out);
    nsm::validate_config(cfg);
    const auto r = nsm::run_experiment(cfg);
    if (r.exit_code == nsm::exit_numerical_failure) {
        std::cerr << "numerical failure: " << r.failure << "\n(see " << r.out_dir << "/failure.json)\n";
    } else {
        std::cout << "wrote " << r.out_dir << " (" << (r.checks_passed ? "checks passed" : "checks FAILED") << ")\n";
    }
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Galerkin simulator and diagnostics for the stochastic 2D Navier-Stokes vorticity equation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", nsm::code_version());

    Common common;
    MalliavinFlags mf;
    SpanningFlags sf;
    std::string manifest;

    const std::vector<std::string> kinds{"simulate",      "energy-check", "jacobian-check",
                                         "spanning",      "malliavin",    "control-probe",
                                         "lyapunov",      "mixing",       "irreducibility"};
    for (const auto& k : kinds) {
        auto* sub = app.add_subcommand(k, "Run the " + k + " experiment");
        add_common(sub, common, k != "spanning");
        if (k == "malliavin") {
            sub->add_option("--interval", mf.T, "Length T of the interval [0, T]");
            sub->add_option("--node-stride", mf.node_stride, "Quadrature node spacing in steps");
            sub->add_option("--alpha", mf.alpha, "Low-mode mass threshold alpha");
            sub->add_option("--N", mf.N, "Low-mode radius N");
            sub->add_option("--truncation", mf.gram_kmax, "Galerkin radius of the Gram matrix");
        }
        if (k == "spanning") {
            sub->add_option("--modes", sf.modes, "Forced modes, e.g. \"(1,0) (-1,0) (1,1) (-1,-1)\"");
            sub->add_option("--radius", sf.radius, "Coverage radius to check");
        }
    }
    auto* exp = app.add_subcommand("export-plotdata", "Split a finished run's series into plot-ready CSVs");
    exp->add_option("--manifest", manifest, "manifest.json of the run")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : nsm::exit_config_error;
    }

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "export-plotdata") {
            for (const auto& p : nsm::export_plotdata(manifest)) std::cout << p << "\n";
            return nsm::exit_ok;
        }
        nsm::ExperimentConfig cfg;
        if (!common.config.empty()) cfg = nsm::load_config(common.config);
        cfg.kind = nsm::parse_kind(name);
        if (name == "malliavin") {
            if (mf.T) cfg.malliavin.T = *mf.T;
            if (mf.node_stride) cfg.malliavin.node_stride = *mf.node_stride;
            if (mf.alpha) cfg.malliavin.alpha = *mf.alpha;
            if (mf.N) cfg.malliavin.N = *mf.N;
            if (mf.gram_kmax) cfg.malliavin.gram_kmax = *mf.gram_kmax;
        }
        if (name == "spanning") {
            if (!sf.modes.empty()) {
                const auto parsed = nsm::parse_config("[noise]\nmodes = " + sf.modes + "\n[grid]\nkmax = 64\n");
                cfg.noise.modes = parsed.noise.modes;
                cfg.noise.kind = nsm::QKind::constant;
                cfg.noise.profile = "constant";
                cfg.noise.c0 = 1.0;
                cfg.noise.aleph = 1.0;
                int reach = 1;
                for (const auto& m : cfg.noise.modes) reach = std::max(reach, m.max_abs());
                cfg.integrator.kmax = std::max(cfg.integrator.kmax, reach);
            } else if (common.config.empty()) {
                std::cerr << "spanning: give --config or --modes\n";
                return nsm::exit_config_error;
            }
            if (sf.radius) cfg.spanning.radius = *sf.radius;
            const int rc = run(cfg, common);
            std::ifstream in(cfg.out_dir.empty() ? "summary.json" : nsm::resolve_out_dir(cfg, common.out) + "/summary.json");
            if (in) std::cout << in.rdbuf();
            return rc;
        }
        return run(cfg, common);
    } catch (const nsm::ConfigError& e) {
        std::cerr << "configuration error:\n";
        for (const auto& m : e.messages()) std::cerr << "  " << m << "\n";
        return nsm::exit_config_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return nsm::exit_config_error;
    } catch (const nsm::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return nsm::exit_numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return nsm::exit_numerical_failure;
    }
}
