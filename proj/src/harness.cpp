#include "nsm/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "nsm/errors.hpp"
#include "nsm/ergodicity.hpp"
#include "nsm/field_io.hpp"
#include "nsm/malliavin.hpp"
#include "nsm/path_io.hpp"
#include "nsm/spanning.hpp"

#ifndef NSM_VERSION
#define NSM_VERSION "unversioned"
#endif

namespace nsm {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string code_version() { return NSM_VERSION; }

namespace {

struct Row {
    std::string series;
    double t;
    double value;
    double lo;
    double hi;
};

/// Everything an experiment produces before it is written out.
struct Outcome {
    json summary = json::object();
    std::vector<Row> rows;
    std::vector<std::string> files;  // extra artefacts, relative to the run directory
    bool pass = true;
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw FormatError("cannot write " + p.string());
    out << content;
    if (!out) throw FormatError("write failed for " + p.string());
}

/// Non-finite numbers become null in JSON; keep them readable instead.
json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

SpectralField direction_field(int kmax, double radius, std::uint64_t seed) {
    if (radius == 0.0) return SpectralField(kmax);
    return sample_initials(kmax, radius, 4, seed)[3];
}

// ---------------------------------------------------------------------------
// Experiment kinds

Outcome run_simulate(const ExperimentConfig& c, const fs::path& dir) {
    Outcome o;
    Integrator integ(c.integrator, c.noise.build());
    const auto w0 = c.initial.build(c.integrator.kmax, c.seed);
    const auto path = integ.simulate(w0, c.simulate.T, c.seed, 0, c.simulate.snapshot_stride);
    double max_norm = 0.0;
    for (std::size_t i = 0; i < path.snapshots.size(); ++i) {
        const double e = path.snapshots[i].squaredNorm();
        max_norm = std::max(max_norm, std::sqrt(e));
        o.rows.push_back({"energy", path.time(path.snapshot_steps[i]), e, e, e});
    }
    save_field((dir / "final.nssf").string(), SpectralField(c.integrator.kmax, path.final_state()));
    o.files.push_back("final.nssf");
    if (c.simulate.save_path) {
        save_path((dir / "path.nsmg").string(), path);
        o.files.push_back("path.nsmg");
    }
    o.summary["steps"] = path.steps;
    o.summary["T"] = c.simulate.T;
    o.summary["initial_norm"] = w0.norm();
    o.summary["final_norm"] = path.final_state().norm();
    o.summary["max_snapshot_norm"] = max_norm;
    return o;
}

Outcome run_energy(const ExperimentConfig& c) {
    Outcome o;
    const auto w0 = c.initial.build(c.integrator.kmax, c.seed);
    const auto r = energy_check(c.integrator, c.noise.build(), w0, c.energy.T, c.paths, c.seed);
    o.summary["paths"] = r.paths;
    o.summary["T"] = c.energy.T;
    for (const auto& [name, b] : {std::pair{"coarse", r.coarse}, std::pair{"fine", r.fine}}) {
        const std::string p = name;
        o.summary[p + "_dt"] = b.dt;
        o.summary[p + "_lhs_mean"] = b.lhs_mean;
        o.summary[p + "_lhs_se"] = b.lhs_se;
        o.summary[p + "_rhs_mean"] = b.rhs_mean;
        o.summary[p + "_rhs_se"] = b.rhs_se;
        o.summary[p + "_residual_mean"] = b.residual_mean;
        o.summary[p + "_residual_se"] = b.residual_se;
        o.rows.push_back({"energy_residual", b.dt, b.residual_mean, b.residual_mean - 1.96 * b.residual_se,
                          b.residual_mean + 1.96 * b.residual_se});
    }
    o.summary["richardson_residual"] = r.richardson;
    o.summary["richardson_se"] = r.richardson_se;
    o.rows.push_back({"energy_residual", 0.0, r.richardson, r.richardson - 1.96 * r.richardson_se,
                      r.richardson + 1.96 * r.richardson_se});
    o.pass = std::abs(r.richardson) <= 3.0 * r.richardson_se;
    return o;
}

Outcome run_jacobian(const ExperimentConfig& c) {
    Outcome o;
    Integrator integ(c.integrator, c.noise.build());
    const int K = c.integrator.kmax;
    std::vector<double> slopes, cocycle;
    const auto starts = sample_initials(K, c.initial.radius, std::size_t(c.jacobian.pairs) + 3, c.seed);
    for (int i = 0; i < c.jacobian.pairs; ++i) {
        const auto& w0 = starts[std::size_t(i) + 3];
        const auto xi = sample_initials(K, 1.0, 4, c.seed + 1000003ull * std::uint64_t(i + 1))[3];
        const auto fd = jacobian_fd_check(integ, w0, xi, c.jacobian.eps, c.jacobian.T, c.seed, std::uint64_t(i));
        slopes.push_back(fd.slope);
        for (std::size_t k = 0; k < fd.eps.size(); ++k)
            o.rows.push_back({"fd_error_pair_" + std::to_string(i), fd.eps[k], fd.errors[k], fd.errors[k], fd.errors[k]});
        // cocycle J_{0,t} = J_{r,t} J_{0,r}
        const auto path = integ.simulate(w0, c.jacobian.T, c.seed, std::uint64_t(i));
        const std::int64_t r = path.steps / 2;
        const Eigen::MatrixXd X = xi.coeffs();
        const Eigen::MatrixXd one = integ.linearized_flow(path, 0, path.steps, X);
        const Eigen::MatrixXd two = integ.linearized_flow(path, r, path.steps, integ.linearized_flow(path, 0, r, X));
        cocycle.push_back((one - two).norm() / one.norm());
    }
    o.summary["pairs"] = c.jacobian.pairs;
    o.summary["T"] = c.jacobian.T;
    o.summary["eps"] = numbers(c.jacobian.eps);
    o.summary["slopes"] = numbers(slopes);
    o.summary["cocycle_relative_errors"] = numbers(cocycle);
    for (double s : slopes) o.pass = o.pass && std::abs(s - 1.0) <= 0.2;
    for (double e : cocycle) o.pass = o.pass && e <= 1e-6;
    return o;
}

Outcome run_spanning(const ExperimentConfig& c) {
    Outcome o;
    const auto [ok, cond] = check_condition1(c.noise.modes);
    const auto rep = reachable_modes(c.noise.modes, c.spanning.radius, c.spanning.max_iter);
    o.summary["condition1"] = ok;
    o.summary["is_symmetric"] = cond.is_symmetric;
    o.summary["is_generator"] = cond.is_generator;
    o.summary["determinant_gcd"] = cond.determinant_gcd;
    if (cond.nonparallel_unequal_pair) {
        o.summary["witness_pair"] = json::array({cond.nonparallel_unequal_pair->first.str(),
                                                 cond.nonparallel_unequal_pair->second.str()});
    }
    o.summary["requested_radius"] = rep.requested_radius;
    o.summary["coverage_radius_achieved"] = rep.coverage_radius_achieved;
    o.summary["covers"] = rep.covers;
    o.summary["layers"] = rep.layers.size();
    std::vector<double> sizes;
    for (std::size_t n = 0; n < rep.layers.size(); ++n) {
        sizes.push_back(double(rep.layers[n].size()));
        o.rows.push_back({"layer_size", double(n), sizes.back(), sizes.back(), sizes.back()});
    }
    o.summary["layer_sizes"] = numbers(sizes);
    o.pass = rep.covers && (!c.noise.condition1_required || ok);
    return o;
}

Outcome run_malliavin(const ExperimentConfig& c, const fs::path& dir) {
    Outcome o;
    const auto noise = c.noise.build();
    const auto& m = c.malliavin;
    NondegeneracyConfig nc;
    nc.epsilon_grid = m.epsilons;
    nc.region = {m.N, m.alpha};
    nc.radius = m.radius;
    nc.n_paths = c.paths;
    nc.n_initials = std::size_t(m.initials);
    nc.T = m.T;
    nc.node_stride = m.node_stride;
    nc.gram_kmax = m.gram_kmax;
    nc.seed = c.seed;
    nc.workers = c.workers;
    nc.minimizer.restarts = m.restarts;
    nc.minimizer.pg_iterations = m.pg_iterations;
    const auto est = estimate_r(c.integrator, noise, nc);

    o.summary["T"] = m.T;
    o.summary["alpha"] = m.alpha;
    o.summary["N"] = m.N;
    o.summary["radius"] = m.radius;
    o.summary["gram_kmax"] = m.gram_kmax;
    o.summary["gram_dim"] = lattice::size(m.gram_kmax);
    o.summary["node_stride"] = m.node_stride;
    o.summary["samples"] = est.n_samples;
    o.summary["epsilons"] = numbers(est.epsilon_grid);
    o.summary["pooled_probability"] = numbers(est.pooled_probability);
    std::vector<double> lo, hi, sup, slo, shi, X, lmin, mass, trace;
    std::size_t disagreements = 0;
    for (std::size_t i = 0; i < est.epsilon_grid.size(); ++i) {
        lo.push_back(est.pooled_ci[i].lo);
        hi.push_back(est.pooled_ci[i].hi);
        sup.push_back(est.sup_probability[i]);
        slo.push_back(est.sup_ci[i].lo);
        shi.push_back(est.sup_ci[i].hi);
        o.rows.push_back({"r_pooled", est.epsilon_grid[i], est.pooled_probability[i], lo.back(), hi.back()});
        o.rows.push_back({"r_sup", est.epsilon_grid[i], est.sup_probability[i], slo.back(), shi.back()});
    }
    for (std::size_t k = 0; k < est.samples.size(); ++k) {
        const auto& s = est.samples[k];
        X.push_back(s.X);
        lmin.push_back(s.lambda_min);
        mass.push_back(s.low_mass);
        trace.push_back(s.trace);
        if (!s.agree) ++disagreements;
        o.rows.push_back({"X", double(k), s.X, s.X, s.X});
    }
    o.summary["pooled_ci_lo"] = numbers(lo);
    o.summary["pooled_ci_hi"] = numbers(hi);
    o.summary["sup_probability"] = numbers(sup);
    o.summary["sup_ci_lo"] = numbers(slo);
    o.summary["sup_ci_hi"] = numbers(shi);
    o.summary["X"] = numbers(X);
    o.summary["lambda_min"] = numbers(lmin);
    o.summary["xi_low_mode_mass"] = numbers(mass);
    o.summary["gram_trace"] = numbers(trace);
    o.summary["minimizer_disagreements"] = disagreements;

    if (m.save_gram) {
        // Gram of the first sample (initial 0, path 0), rows stored as fields.
        Integrator integ(c.integrator, noise);
        const auto w0 = sample_initials(c.integrator.kmax, m.radius, 1, c.seed)[0];
        const auto path = integ.simulate(w0, m.T, c.seed, 0);
        const auto M = assemble_gram(integ, path, 0, path.steps, m.node_stride, m.gram_kmax);
        ConstrainedMinOptions opt = nc.minimizer;
        opt.seed = c.seed ^ 0x9e3779b97f4a7c15ull;
        const auto cm = constrained_min(M, nc.region, opt);
        std::vector<SpectralField> rows;
        for (Eigen::Index r = 0; r < M.matrix.rows(); ++r) rows.emplace_back(M.kmax, Eigen::VectorXd(M.matrix.row(r).transpose()));
        save_fields((dir / "gram.nssf").string(), rows);
        save_field((dir / "xi_star.nssf").string(), SpectralField(M.kmax, cm.xi));
        o.files.push_back("gram.nssf");
        o.files.push_back("xi_star.nssf");
    }
    return o;
}

Outcome run_control(const ExperimentConfig& c) {
    Outcome o;
    ControlProbeConfig pc;
    pc.betas = c.control.betas;
    pc.n_cycles = c.control.cycles;
    pc.n_paths = c.paths;
    pc.node_stride = c.control.node_stride;
    pc.moments = c.control.moments;
    pc.bootstrap = std::size_t(c.control.bootstrap);
    pc.seed = c.seed;
    pc.workers = c.workers;
    const auto w0 = c.initial.build(c.integrator.kmax, c.seed);
    auto xi = sample_initials(c.integrator.kmax, 1.0, 4, c.seed ^ 0x5bd1e995ull)[3];
    const auto res = control_probe(c.integrator, c.noise.build(), w0, xi, pc);
    std::vector<double> beta, med, gam, glo, ghi, res_norm, ceil_ratio;
    bool ceilings = true;
    for (const auto& b : res.betas) {
        beta.push_back(b.beta);
        med.push_back(b.median_ratio);
        gam.push_back(b.gamma);
        glo.push_back(b.gamma_ci.lo);
        ghi.push_back(b.gamma_ci.hi);
        res_norm.push_back(b.max_resolvent_norm);
        double cr = 0.0;
        for (const auto& cs : b.cycles) {
            cr = std::max(cr, cs.ceiling_ratio_max);
            const std::string tag = "beta=" + fmt(b.beta);
            o.rows.push_back({"rho_mean_" + tag, cs.time, cs.mean_norm, cs.mean_norm - 1.96 * cs.se_norm,
                              cs.mean_norm + 1.96 * cs.se_norm});
            for (std::size_t k = 0; k < cs.moment_means.size(); ++k)
                o.rows.push_back({"rho_moment" + std::to_string(c.control.moments[k]) + "_" + tag, cs.time,
                                  cs.moment_means[k], cs.moment_means[k], cs.moment_means[k]});
            o.rows.push_back({"rho_quantiles_" + tag, cs.time, cs.q50, cs.q10, cs.q90});
            if (cs.cycle < res.n_cycles)
                o.rows.push_back({"cost_" + tag, cs.time, cs.cost_mean, cs.cost_mean, cs.cost_max});
        }
        ceil_ratio.push_back(cr);
        ceilings = ceilings && b.ceiling_holds;
    }
    o.summary["paths"] = res.n_paths;
    o.summary["cycles"] = res.n_cycles;
    o.summary["galerkin_kmax"] = res.galerkin_kmax;
    o.summary["betas"] = numbers(beta);
    o.summary["median_ratio"] = numbers(med);
    o.summary["gamma"] = numbers(gam);
    o.summary["gamma_ci_lo"] = numbers(glo);
    o.summary["gamma_ci_hi"] = numbers(ghi);
    o.summary["max_resolvent_norm"] = numbers(res_norm);
    o.summary["max_cost_ceiling_ratio"] = numbers(ceil_ratio);
    o.summary["cost_ceiling_holds"] = ceilings;
    o.summary["best_beta"] = res.best ? number(res.betas[*res.best].beta) : json(nullptr);
    o.summary["note"] = "the stochastic integral of the control is not computed; decay of E|rho| and the control cost are reported";
    o.pass = res.best.has_value() && ceilings;
    return o;
}

Outcome run_lyapunov(const ExperimentConfig& c) {
    Outcome o;
    const auto& l = c.lyapunov;
    const auto w0 = c.initial.build(c.integrator.kmax, c.seed);
    const auto sw = lyapunov_sweep(c.integrator, c.noise.build(), w0, l.T, c.paths, c.seed, l.eta_start, l.eta_factor,
                                   l.eta_min, c.workers);
    std::vector<double> eta, mean, se, bound;
    for (const auto& r : sw.tried) {
        eta.push_back(r.eta);
        mean.push_back(r.mean);
        se.push_back(r.se);
        bound.push_back(r.bound);
        o.rows.push_back({"lyapunov_mean", r.eta, r.mean, r.mean - 3.0 * r.se, r.mean + 3.0 * r.se});
        o.rows.push_back({"lyapunov_bound", r.eta, r.bound, r.bound, r.bound * (1.0 + 3.0 * r.se)});
    }
    o.summary["paths"] = c.paths;
    o.summary["T"] = l.T;
    o.summary["initial_norm"] = w0.norm();
    o.summary["eta"] = numbers(eta);
    o.summary["mean"] = numbers(mean);
    o.summary["se"] = numbers(se);
    o.summary["bound"] = numbers(bound);
    o.summary["passing_eta"] = sw.passing ? number(sw.tried[*sw.passing].eta) : json(nullptr);
    o.pass = sw.passing.has_value();
    return o;
}

Outcome run_mixing(const ExperimentConfig& c) {
    Outcome o;
    const auto& x = c.mixing;
    std::vector<Observable> obs;
    for (const auto& id : x.observables) obs.push_back(Observable::parse(id));
    MixingOptions mo;
    mo.T = x.T;
    mo.sample_every = x.sample_every;
    mo.n_paths = c.paths;
    mo.independent_seeds = x.independent_seeds;
    mo.bootstrap = std::size_t(x.bootstrap);
    mo.seed = c.seed;
    mo.workers = c.workers;
    const int K = c.integrator.kmax;
    const auto est = mixing_rate(c.integrator, c.noise.build(), direction_field(K, x.radius_a, c.seed),
                                 direction_field(K, x.radius_b, c.seed), obs, mo);
    std::vector<double> gam, glo, ghi, window;
    json ids = json::array(), signal = json::array();
    bool any = false, all_positive = true;
    for (const auto& s : est.series) {
        ids.push_back(s.id);
        signal.push_back(s.signal);
        gam.push_back(s.gamma);
        glo.push_back(s.gamma_ci.lo);
        ghi.push_back(s.gamma_ci.hi);
        window.push_back(double(s.window));
        for (std::size_t k = 0; k < est.times.size(); ++k)
            o.rows.push_back({"diff_" + s.id, est.times[k], s.diff[k], s.ci[k].lo, s.ci[k].hi});
        if (s.signal) {
            any = true;
            all_positive = all_positive && s.gamma_ci.lo > 0.0;
        }
    }
    o.summary["paths_per_ensemble"] = est.n_paths;
    o.summary["T"] = x.T;
    o.summary["radius_a"] = x.radius_a;
    o.summary["radius_b"] = x.radius_b;
    o.summary["independent_seeds"] = x.independent_seeds;
    o.summary["observables"] = ids;
    o.summary["signal"] = signal;
    o.summary["fit_window_points"] = numbers(window);
    o.summary["gamma"] = numbers(gam);
    o.summary["gamma_ci_lo"] = numbers(glo);
    o.summary["gamma_ci_hi"] = numbers(ghi);
    o.summary["any_signal"] = any;
    o.pass = any && all_positive;
    return o;
}

Outcome run_irreducibility(const ExperimentConfig& c) {
    Outcome o;
    const auto& ir = c.irreducibility;
    IrreducibilityOptions io;
    io.radius = ir.radius;
    io.gamma_ball = ir.ball;
    io.times = ir.times;
    io.n_initials = std::size_t(ir.initials);
    io.n_paths = c.paths;
    io.seed = c.seed;
    io.workers = c.workers;
    const auto est = irreducibility_probe(c.integrator, c.noise.build(), io);
    std::vector<double> lo, hi;
    for (std::size_t k = 0; k < est.times.size(); ++k) {
        lo.push_back(est.min_ci[k].lo);
        hi.push_back(est.min_ci[k].hi);
        o.rows.push_back({"min_probability", est.times[k], est.min_probability[k], lo.back(), hi.back()});
    }
    o.summary["paths_per_initial"] = est.n_paths;
    o.summary["initials"] = ir.initials;
    o.summary["radius"] = ir.radius;
    o.summary["ball"] = ir.ball;
    o.summary["times"] = numbers(est.times);
    o.summary["min_probability"] = numbers(est.min_probability);
    o.summary["min_ci_lo"] = numbers(lo);
    o.summary["min_ci_hi"] = numbers(hi);
    o.summary["first_positive_time"] = est.first_positive ? number(est.times[*est.first_positive]) : json(nullptr);
    o.pass = est.first_positive.has_value();
    return o;
}

Outcome dispatch(const ExperimentConfig& c, const fs::path& dir) {
    switch (c.kind) {
        case ExperimentKind::simulate: return run_simulate(c, dir);
        case ExperimentKind::energy_check: return run_energy(c);
        case ExperimentKind::jacobian_check: return run_jacobian(c);
        case ExperimentKind::spanning: return run_spanning(c);
        case ExperimentKind::malliavin: return run_malliavin(c, dir);
        case ExperimentKind::control_probe: return run_control(c);
        case ExperimentKind::lyapunov: return run_lyapunov(c);
        case ExperimentKind::mixing: return run_mixing(c);
        case ExperimentKind::irreducibility: return run_irreducibility(c);
    }
    throw std::logic_error("unhandled experiment kind");
}

std::string rows_csv(const std::vector<Row>& rows) {
    std::ostringstream os;
    os << "series,t,value,ci_lo,ci_hi\n";
    for (const auto& r : rows)
        os << csv_field(r.series) << ',' << fmt(r.t) << ',' << fmt(r.value) << ',' << fmt(r.lo) << ',' << fmt(r.hi)
           << '\n';
    return os.str();
}

json file_entry(const fs::path& dir, const std::string& name) {
    const auto data = read_file(dir / name);
    return json{{"name", name}, {"bytes", data.size()}, {"sha256", sha256_hex(data)}};
}

}  // namespace

std::string resolve_out_dir(const ExperimentConfig& cfg, const std::string& cli_override) {
    if (!cli_override.empty()) return cli_override;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return cfg.out_dir;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    RunResult rr;
    const fs::path dir = cfg.out_dir;
    rr.out_dir = dir.string();
    fs::create_directories(dir);
    // A previous manifest would vouch for outputs this run is about to replace.
    fs::remove(dir / "manifest.json");
    fs::remove(dir / "failure.json");
    const std::string started = utc_now();
    const std::string hash = cfg.hash();
    Outcome o;
    try {
        o = dispatch(cfg, dir);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        // parameter combinations only detectable at run time (e.g. T not a multiple of dt)
        throw ConfigError({e.what()});
    } catch (const std::exception& e) {
        json f{{"status", "numerical_failure"},
               {"kind", to_string(cfg.kind)},
               {"config_hash", hash},
               {"error", e.what()},
               {"exit_code", int(exit_numerical_failure)}};
        if (const auto* b = dynamic_cast<const BlowUp*>(&e)) {
            f["error_type"] = "blow_up";
            f["step"] = b->step();
            f["norm"] = number(b->norm());
        } else if (dynamic_cast<const NonConvergence*>(&e)) {
            f["error_type"] = "non_convergence";
        } else if (dynamic_cast<const SingularSolve*>(&e)) {
            f["error_type"] = "singular_solve";
        } else if (dynamic_cast<const BoundViolation*>(&e)) {
            f["error_type"] = "bound_violation";
        } else {
            f["error_type"] = "error";
        }
        write_file(dir / "failure.json", f.dump(2) + "\n");
        rr.exit_code = exit_numerical_failure;
        rr.checks_passed = false;
        rr.failure = e.what();
        return rr;
    }

    json summary = json::object();
    summary["kind"] = to_string(cfg.kind);
    summary["config_hash"] = hash;
    summary["code_version"] = code_version();
    summary["seed"] = cfg.seed;
    summary["workers"] = cfg.workers;
    summary["kmax"] = cfg.integrator.kmax;
    summary["nu"] = cfg.integrator.nu;
    summary["dt"] = cfg.integrator.dt;
    summary["noise_kind"] = to_string(cfg.noise.kind);
    summary["noise_profile"] = cfg.noise.profile;
    summary["aleph"] = cfg.noise.aleph;
    for (auto& [k, v] : o.summary.items()) summary[k] = v;
    summary["pass"] = o.pass;

    write_file(dir / "summary.json", summary.dump(2) + "\n");
    write_file(dir / "series.csv", rows_csv(o.rows));
    write_file(dir / "config.canonical", cfg.canonical());

    json files = json::array();
    for (const auto& name : {std::string("summary.json"), std::string("series.csv"), std::string("config.canonical")})
        files.push_back(file_entry(dir, name));
    for (const auto& name : o.files) files.push_back(file_entry(dir, name));
    rr.checks_passed = o.pass;
    rr.exit_code = o.pass ? exit_ok : exit_check_failed;
    json manifest{{"config_hash", hash},
                  {"code_version", code_version()},
                  {"kind", to_string(cfg.kind)},
                  {"started_utc", started},
                  {"finished_utc", utc_now()},
                  {"exit_code", rr.exit_code},
                  {"files", files}};
    // Written last: its presence marks a complete run.
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    rr.summary_path = (dir / "summary.json").string();
    rr.series_path = (dir / "series.csv").string();
    rr.manifest_path = (dir / "manifest.json").string();
    return rr;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw FormatError("unterminated quoted CSV field");
    out.push_back(cur);
    return out;
}

std::vector<std::string> export_plotdata(const std::string& manifest_path) {
    const fs::path mpath = manifest_path;
    json manifest;
    try {
        manifest = json::parse(read_file(mpath));
    } catch (const json::exception& e) {
        throw FormatError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.contains("files") || !manifest["files"].is_array() || manifest["files"].empty())
        throw FormatError("manifest lists no output files");
    bool listed = false;
    for (const auto& f : manifest["files"])
        if (f.value("name", "") == "series.csv") listed = true;
    if (!listed) throw FormatError("manifest does not list series.csv");
    const fs::path dir = mpath.parent_path();
    std::istringstream in(read_file(dir / "series.csv"));
    std::string header;
    std::getline(in, header);
    if (csv_split(header) != std::vector<std::string>{"series", "t", "value", "ci_lo", "ci_hi"})
        throw FormatError("series.csv has an unexpected header");
    std::map<std::string, std::string> groups;
    std::vector<std::string> order;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto f = csv_split(line);
        if (f.size() != 5) throw FormatError("series.csv row with " + std::to_string(f.size()) + " fields");
        if (!groups.count(f[0])) order.push_back(f[0]);
        groups[f[0]] += line + "\n";
    }
    if (order.empty()) throw FormatError("missing series: series.csv has no rows");
    const fs::path out = dir / "plotdata";
    fs::create_directories(out);
    std::vector<std::string> written;
    for (const auto& name : order) {
        std::string safe;
        for (char ch : name) safe += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.') ? ch : '_';
        const fs::path p = out / (safe + ".csv");
        write_file(p, header + "\n" + groups[name]);
        written.push_back(p.string());
    }
    return written;
}

}  // namespace nsm
