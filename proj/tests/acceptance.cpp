/// Acceptance run: one PASS/FAIL line per criterion, each at its stated
/// tolerance and sample size. Exit status is the number of failures.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nsm/config.hpp"
#include "nsm/ergodicity.hpp"
#include "nsm/harness.hpp"
#include "nsm/malliavin.hpp"
#include "nsm/spanning.hpp"
#include "nsm/spectral.hpp"
#include "oracle.hpp"

using namespace nsm;
namespace fs = std::filesystem;

namespace {

const std::vector<ModeIndex> kZ0{{1, 0}, {-1, 0}, {1, 1}, {-1, -1}};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double min_eig(const Eigen::MatrixXd& M) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues()[0];
}

/// Grams assembled by the Gram criteria, reused by the contraction check.
std::vector<Eigen::MatrixXd> g_grams;

const std::vector<double> kBetas{1e-4, 1e-3, 1e-2, 1e-1, 1.0};

// ---------------------------------------------------------------------------

Outcome spectral_identities() {
    std::mt19937_64 gen(2024);
    double worst_anti = 0.0, worst_sob = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int K = 4 + trial % 8;
        const auto w = oracle::random_field(K, gen);
        const auto u = biot_savart(w);
        const auto b = bilinear_B(u, w);
        worst_anti = std::max(worst_anti, std::abs(b.dot(w)) / (b.norm() * w.norm()));
        for (double a : {0.0, 0.5, 1.0, 1.5, 2.0}) {
            const double lhs = sobolev_norm(u, a), rhs = sobolev_norm(w, a - 1.0);
            worst_sob = std::max(worst_sob, std::abs(lhs - rhs) / rhs);
        }
    }
    return {worst_anti <= 1e-10 && worst_sob <= 1e-12,
            fmt("100 fields: max |<B(Kw,w),w>|/(|B||w|) = %.2e (<= 1e-10), max Sobolev shift rel. error = %.2e (<= 1e-12)",
                worst_anti, worst_sob)};
}

Outcome jacobian_correctness() {
    IntegratorSpec s;  // default lattice, viscosity and step
    const NoiseModel noise(ModeSet(kZ0), QKind::spectral_coordinate, {ScalarProfile::sigmoid(0.5, 0.3)}, 1.0);
    Integrator integ(s, noise);
    std::mt19937_64 gen(77);
    double slope_lo = 1e9, slope_hi = -1e9, worst_cocycle = 0.0;
    for (int pair = 0; pair < 5; ++pair) {
        const auto w0 = oracle::random_field(s.kmax, gen);
        auto xi = oracle::random_field(s.kmax, gen);
        xi = xi * (1.0 / xi.norm());
        const auto fd = jacobian_fd_check(integ, w0, xi, {1e-2, 1e-3, 1e-4, 1e-5}, 0.5, 11, std::uint64_t(pair));
        slope_lo = std::min(slope_lo, fd.slope);
        slope_hi = std::max(slope_hi, fd.slope);
        const auto path = integ.simulate(w0, 0.5, 11, std::uint64_t(pair));
        const std::int64_t r = path.steps / 2 + 13 * pair;
        const auto full = integ.linearized_flow(path, 0, path.steps, xi);
        const auto split = integ.linearized_flow(path, r, path.steps, integ.linearized_flow(path, 0, r, xi));
        worst_cocycle = std::max(worst_cocycle, (full - split).norm() / full.norm());
    }
    return {slope_lo >= 0.8 && slope_hi <= 1.2 && worst_cocycle <= 1e-6,
            fmt("K=%d, T=0.5, 5 pairs: FD slopes in [%.3f, %.3f] (1 +- 0.2), cocycle rel. error %.2e (<= 1e-6)", s.kmax,
                slope_lo, slope_hi, worst_cocycle)};
}

Outcome gram_equivalence() {
    IntegratorSpec s;
    s.kmax = 2;
    const NoiseModel noise(ModeSet(kZ0), QKind::spectral_coordinate, {ScalarProfile::sigmoid(0.5, 0.3)}, 1.0);
    Integrator integ(s, noise);
    std::mt19937_64 gen(5);
    bool ok = true;
    double worst_ratio = 0.0, worst_psd = 0.0;
    for (int p = 0; p < 10; ++p) {
        const auto path = integ.simulate(oracle::random_field(2, gen), 1.0, 3, std::uint64_t(p), 10);
        const auto fwd = assemble_gram(integ, path, 0, path.steps, 10);
        const auto fun = assemble_gram_fundamental(integ, path, 0, path.steps, 10);
        const auto coarse = assemble_gram(integ, path, 0, path.steps, 20);
        const double quad_err = (fwd.matrix - coarse.matrix).norm();
        const double diff = (fwd.matrix - fun.matrix).norm();
        worst_ratio = std::max(worst_ratio, diff / quad_err);
        ok = ok && diff <= 2.0 * quad_err;
        for (const auto* M : {&fwd.matrix, &fun.matrix}) {
            const double scale = M->norm();
            ok = ok && (*M - M->transpose()).norm() == 0.0;
            worst_psd = std::min(worst_psd, min_eig(*M) / scale);
            ok = ok && min_eig(*M) >= -1e-10 * scale;
            g_grams.push_back(*M);
        }
    }
    return {ok, fmt("K=2, 10 paths: max |fwd - fund| / quadrature estimate = %.2e (<= 2), min lambda/|M| = %.2e (>= -1e-10), symmetric",
                    worst_ratio, worst_psd)};
}

Outcome frozen_dynamics() {
    IntegratorSpec s;
    s.kmax = 4;
    s.nu = 0.0;
    s.dt = 1e-3;
    s.nonlinear = false;
    const double c = 0.7;
    Integrator integ(s, NoiseModel::constant(ModeSet(kZ0), c, 1.0));
    const auto path = integ.simulate(SpectralField(4), 1.0, 9);
    double worst = 0.0;
    for (auto [a, b, stride] : {std::array<std::int64_t, 3>{0, 1000, 10}, {150, 850, 7}, {0, 500, 1}}) {
        const auto M = assemble_gram(integ, path, a, b, stride);
        Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(M.dim(), M.dim());
        for (auto k : kZ0) {
            const int i = lattice::index(4, k);
            ref(i, i) += c * c * double(b - a) * s.dt;
        }
        worst = std::max(worst, (M.matrix - ref).cwiseAbs().maxCoeff());
        g_grams.push_back(M.matrix);
    }
    return {worst <= 1e-10, fmt("nu=0, B off, q=%.1f: max |M - c^2 (t-s) sum e_j e_j^T| = %.2e (<= 1e-10)", c, worst)};
}

Outcome constrained_minimizer() {
    std::mt19937_64 gen(31);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int D = 2 + t % 7;  // 2 .. 8
        Eigen::MatrixXd M = oracle::random_psd(D, gen);
        M /= M.norm();
        Eigen::VectorXd mask = Eigen::VectorXd::Zero(D);
        for (int i = 0; i < std::max(1, D / 3); ++i) mask[i] = 1.0;
        const double alpha = t % 2 ? 0.1 : 0.6;
        ConstrainedMinOptions opt;
        opt.seed = std::uint64_t(t);
        const auto r = constrained_min(M, mask, alpha, opt);
        worst = std::max(worst, std::abs(r.value - oracle::sphere_grid_min(M, mask, alpha)));
    }
    if (g_grams.empty()) {
        // Run on its own: assemble the Grams of the equivalence and frozen checks.
        gram_equivalence();
        frozen_dynamics();
    }
    // Contraction of the resolvent on every Gram assembled above; the slack is
    // the eigen-solver's resolution of the spectrum, 1e-10 ||M|| / beta.
    bool contraction = !g_grams.empty();
    double worst_excess = 0.0;
    for (const auto& M : g_grams)
        for (double beta : kBetas) {
            const double excess = resolvent_norm(M, beta) - 1.0;
            worst_excess = std::max(worst_excess, excess);
            contraction = contraction && excess <= 1e-10 * M.norm() / beta;
        }
    return {worst <= 1e-3 && contraction,
            fmt("20 PSD matrices (D=2..8): max |KKT - sphere grid| = %.2e (<= 1e-3); %zu Grams x %zu betas: max ||beta(M+beta)^-1|| - 1 = %.2e",
                worst, g_grams.size(), kBetas.size(), worst_excess)};
}

NondegeneracyEstimate nondegeneracy(const std::vector<ModeIndex>& modes) {
    IntegratorSpec s;
    s.kmax = 8;
    s.nu = 0.02;
    s.dt = 1e-3;
    const NoiseModel noise(ModeSet(modes), QKind::spectral_coordinate, {ScalarProfile::sigmoid(20.0, 10.0)}, 30.0);
    NondegeneracyConfig cfg;
    cfg.epsilon_grid = {1e-2, 1e-6};
    cfg.region = {4, 0.1};
    cfg.radius = 1.0;
    cfg.n_initials = 10;
    cfg.n_paths = 20;
    cfg.T = 2.0;
    cfg.node_stride = 50;
    cfg.gram_kmax = 4;
    cfg.seed = 6;
    return estimate_r(s, noise, cfg);
}

Outcome nondegeneracy_contrast() {
    const auto gen = nondegeneracy(kZ0);
    const auto axes = nondegeneracy({{1, 0}, {-1, 0}});
    const bool separated = gen.pooled_ci[1].hi < gen.pooled_ci[0].lo;
    const bool degenerate = axes.pooled_probability[1] >= 0.95;
    return {separated && degenerate && gen.n_samples >= 200 && axes.n_samples >= 200,
            fmt("forced set, %zu samples: P(X<1e-2)=%.3f CI[%.3f,%.3f], P(X<1e-6)=%.3f CI[%.3f,%.3f]; axis pair, %zu samples: P(X<1e-6)=%.3f (>= 0.95)",
                gen.n_samples, gen.pooled_probability[0], gen.pooled_ci[0].lo, gen.pooled_ci[0].hi,
                gen.pooled_probability[1], gen.pooled_ci[1].lo, gen.pooled_ci[1].hi, axes.n_samples,
                axes.pooled_probability[1])};
}

Outcome spanning() {
    const auto yes = reachable_modes(kZ0, 6, 64);
    const auto no = reachable_modes({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, 6, 64);
    const auto [cond, report] = check_condition1(kZ0);
    return {yes.covers && !no.covers && cond && report.is_symmetric && report.is_generator,
            fmt("forced set reaches radius %d (needs 6); axis set reaches %d; generator condition %s", yes.coverage_radius_achieved,
                no.coverage_radius_achieved, cond ? "YES" : "NO")};
}

Outcome lyapunov_band() {
    IntegratorSpec s;
    s.kmax = 8;
    s.nu = 0.1;
    s.dt = 1e-3;
    const auto noise = NoiseModel::constant(ModeSet(kZ0), 0.25, 1.0);
    const auto w0 = SpectralField::basis(8, {2, 1}, 1.0);
    const auto sweep = lyapunov_sweep(s, noise, w0, 2.0, 1000, 8);
    if (!sweep.passing) {
        const auto& last = sweep.tried.back();
        return {false, fmt("no eta down to %.1e passed; last mean %.6f vs bound %.6f (se %.2e)", last.eta, last.mean, last.bound, last.se)};
    }
    const auto& r = sweep.tried[*sweep.passing];
    return {r.n_paths >= 1000 && r.T == 2.0,
            fmt("1000 paths, T=2: eta=%.3g mean %.8f <= exp(eta|w0|^2)(1+3 SE) = %.8f", r.eta, r.mean, r.bound * (1 + 3 * r.se))};
}

Outcome control_decay() {
    IntegratorSpec s;
    s.kmax = 8;
    s.nu = 0.1;
    s.dt = 1e-3;
    const auto noise = NoiseModel::constant(ModeSet(kZ0), 0.5, 1.0);
    ControlProbeConfig cfg;
    cfg.betas = kBetas;
    cfg.n_cycles = 6;
    cfg.n_paths = 100;
    cfg.node_stride = 50;
    cfg.seed = 9;
    const auto r = control_probe(s, noise, SpectralField::basis(8, {2, 1}, 0.5), SpectralField::basis(8, {1, 2}, 1.0), cfg);
    bool ceiling = true;
    for (const auto& b : r.betas) ceiling = ceiling && b.ceiling_holds;
    if (!r.best) return {false, "no beta in the sweep gives a decaying residual"};
    const auto& b = r.betas[*r.best];
    return {ceiling && r.n_paths >= 100 && r.n_cycles >= 6 && r.galerkin_kmax == 8,
            fmt("K=8, 100 paths, 6 cycles: beta=%.0e median ratio %.3f (< 1), gamma %.3f CI[%.3f,%.3f]; cost ceiling on every sample: %s",
                b.beta, b.median_ratio, b.gamma, b.gamma_ci.lo, b.gamma_ci.hi, ceiling ? "yes" : "no")};
}

Outcome mixing() {
    IntegratorSpec s;
    s.kmax = 8;
    s.nu = 0.1;
    s.dt = 1e-3;
    const auto noise = NoiseModel::constant(ModeSet(kZ0), 0.5, 1.0);
    std::vector<Observable> obs;
    for (const char* id : {"expnorm:0.5", "ball:1", "coord:1,0"}) obs.push_back(Observable::parse(id));
    MixingOptions opt;
    opt.T = 20.0;
    opt.n_paths = 500;
    opt.seed = 12;
    const SpectralField zero(8), far = SpectralField::basis(8, {1, 0}, 2.0);
    const auto est = mixing_rate(s, noise, zero, far, obs, opt);
    opt.seed = 13;
    const auto null = mixing_rate(s, noise, zero, zero, obs, opt);
    bool decays = true, quiet = true;
    std::string detail = "500 paths/ensemble, T=20:";
    for (const auto& series : est.series) {
        decays = decays && series.signal && series.gamma_ci.lo > 0.0;
        detail += fmt(" %s gamma %.3f CI[%.3f,%.3f];", series.id.c_str(), series.gamma, series.gamma_ci.lo, series.gamma_ci.hi);
    }
    for (const auto& series : null.series) quiet = quiet && !series.signal;
    detail += quiet ? " null control: no signal" : " null control: SIGNAL";
    return {decays && quiet && est.n_paths >= 500, detail};
}

Outcome irreducibility() {
    IntegratorSpec s;
    s.kmax = 8;
    s.nu = 0.1;
    s.dt = 1e-3;
    const auto noise = NoiseModel::constant(ModeSet(kZ0), 0.1, 1.0);
    IrreducibilityOptions opt;
    opt.radius = 2.0;
    opt.gamma_ball = 0.5;
    opt.times = {1, 2, 5, 10, 20};
    opt.n_initials = 10;
    opt.n_paths = 100;
    opt.seed = 14;
    const auto est = irreducibility_probe(s, noise, opt);
    if (!est.first_positive) return {false, fmt("min CI includes 0 up to T=20 (min p at T=20: %.3f)", est.min_probability.back())};
    const std::size_t i = *est.first_positive;
    return {est.times[i] <= 20.0,
            fmt("10 initials, |w0|<=2, 100 paths: T=%.0f min P(|w_T|<=0.5)=%.3f CI[%.3f,%.3f]", est.times[i],
                est.min_probability[i], est.min_ci[i].lo, est.min_ci[i].hi)};
}

std::string slurp(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / "nsm_acceptance_determinism";
    fs::remove_all(root);
    std::vector<std::string> kinds;
    bool ok = true;
    const std::vector<std::string> configs{
        "[run]\nkind = simulate\nseed = 3\npaths = 2\n[grid]\nkmax = 6\n[simulate]\nT = 0.2\n",
        "[run]\nkind = malliavin\nseed = 4\npaths = 2\n[grid]\nkmax = 4\ndt = 0.01\n[malliavin]\ngram_kmax = 4\ninitials = 2\n",
        "[run]\nkind = lyapunov\nseed = 5\npaths = 20\n[grid]\nkmax = 4\ndt = 0.01\n",
        "[run]\nkind = mixing\nseed = 6\npaths = 10\n[grid]\nkmax = 4\ndt = 0.01\n[mixing]\nT = 2\n",
    };
    for (std::size_t i = 0; i < configs.size(); ++i) {
        auto cfg = parse_config(configs[i]);
        cfg.workers = 1;
        cfg.out_dir = (root / ("a" + std::to_string(i))).string();
        const auto a = run_experiment(cfg);
        cfg.out_dir = (root / ("b" + std::to_string(i))).string();
        const auto b = run_experiment(cfg);
        ok = ok && a.exit_code != exit_config_error && !a.summary_path.empty() &&
             slurp(a.summary_path) == slurp(b.summary_path) && !slurp(a.summary_path).empty();
        kinds.push_back(to_string(cfg.kind));
    }
    fs::remove_all(root);
    std::string list;
    for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
    return {ok, "identical summary.json on rerun for " + list};
}

}  // namespace

int main(int argc, char** argv) {
    // Optional arguments select criteria by number; default runs all.
    std::vector<bool> selected(12, argc <= 1);
    for (int a = 1; a < argc; ++a) {
        const int n = std::atoi(argv[a]);
        if (n >= 1 && n <= 12) selected[std::size_t(n - 1)] = true;
    }
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"spectral identities", 10, spectral_identities},
        {"Jacobian correctness", 120, jacobian_correctness},
        {"Gram oracle equivalence", 60, gram_equivalence},
        {"frozen-dynamics exactness", 10, frozen_dynamics},
        {"constrained minimiser and contraction", 60, constrained_minimizer},
        {"non-degeneracy contrast", 1800, nondegeneracy_contrast},
        {"spanning", 1, spanning},
        {"Lyapunov band", 600, lyapunov_band},
        {"control residual decay", 1800, control_decay},
        {"mixing", 3600, mixing},
        {"irreducibility", 1200, irreducibility},
        {"determinism", 1e9, determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected[i]) continue;
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = secs <= c.budget_s;
        const bool pass = o.pass && in_budget;
        failures += pass ? 0 : 1;
        std::printf("%s [%zu] %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", i + 1, c.name, o.detail.c_str(), secs,
                    in_budget ? "" : ", over runtime budget");
        std::fflush(stdout);
    }
    return failures;
}
