#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsm/dynamics.hpp"
#include "nsm/malliavin.hpp"
#include "nsm/stats.hpp"

namespace nsm {

// ---------------------------------------------------------------------------
// Exponential moment (Lyapunov) bound

/// Per-path functional S = sup_t ( ||w_t||^2 + nu int_0^t ||w_r||_1^2 dr - d aleph^2 t )
/// on the step grid of [0, T]. The exponential bound reads E exp(eta S) <= exp(eta ||w0||^2).
std::vector<double> lyapunov_functionals(const IntegratorSpec& spec, const NoiseModel& noise,
                                         const SpectralField& w0, double T, std::size_t n_paths,
                                         std::uint64_t seed, std::size_t workers = 1);

struct LyapunovReport {
    double eta = 0.0;
    double T = 0.0;
    double bound = 0.0;  // exp(eta ||w0||^2)
    double mean = 0.0;   // ensemble mean of exp(eta S)
    double se = 0.0;
    std::size_t n_paths = 0;
    bool pass = false;   // mean <= bound (1 + 3 se)
};

LyapunovReport lyapunov_report(const std::vector<double>& functionals, double w0_norm2, double eta, double T);

LyapunovReport lyapunov_check(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0,
                              double eta, double T, std::size_t n_paths, std::uint64_t seed,
                              std::size_t workers = 1);

struct LyapunovSweep {
    std::vector<LyapunovReport> tried;  // in sweep order
    std::optional<std::size_t> passing;  // first passing entry
};

/// eta = eta_start, eta_start * factor, ... down to eta_min; stops at the first pass.
/// The functionals are simulated once and reused for every eta.
LyapunovSweep lyapunov_sweep(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0, double T,
                             std::size_t n_paths, std::uint64_t seed, double eta_start = 0.1, double factor = 0.5,
                             double eta_min = 1e-4, std::size_t workers = 1);

/// Fitted slope of log E exp(eta ||w_t||^2) against ||w0||^2 at each time, for
/// initial fields of the given norms along a fixed direction.
struct LyapunovDecayProfile {
    std::vector<double> times;
    std::vector<stats::LinearFit> fits;
};
LyapunovDecayProfile lyapunov_decay_profile(const IntegratorSpec& spec, const NoiseModel& noise,
                                            const std::vector<double>& radii, double eta,
                                            const std::vector<double>& times, std::size_t n_paths,
                                            std::uint64_t seed, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Control residual

struct ControlProbeConfig {
    std::vector<double> betas{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    int n_cycles = 6;
    std::size_t n_paths = 100;
    std::int64_t node_stride = 10;
    std::vector<int> moments{1, 2, 4, 8};
    std::size_t bootstrap = 1000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    /// Replaces beta (M + beta I)^{-1} by the identity (plain Jacobian transport).
    bool identity_resolvent = false;
};

struct ControlCycleStats {
    int cycle = 0;        // n: statistics of rho_{2n}
    double time = 0.0;    // 2n
    double mean_norm = 0.0;
    double se_norm = 0.0;
    std::vector<double> moment_means;  // E ||rho_{2n}||^p for p in moments
    double q10 = 0.0, q50 = 0.0, q90 = 0.0;  // percentiles of ||rho_{2n}||
    // active interval [2n, 2n+1] (absent for the final cycle)
    double cost_mean = 0.0;
    double cost_max = 0.0;
    double ceiling_ratio_max = 0.0;  // max ||v||^2 / (beta^-1 ||J rho||^2)
};

struct ControlBetaResult {
    double beta = 0.0;
    std::vector<ControlCycleStats> cycles;  // n = 0 .. n_cycles
    double median_ratio = 0.0;              // median of ||rho_{2n+2}|| / ||rho_{2n}|| over paths and cycles
    std::size_t ratio_count = 0;
    double gamma = 0.0;                     // fitted decay rate of E ||rho_t||
    stats::Interval gamma_ci;               // bootstrap over paths
    bool ceiling_holds = true;              // cost <= beta^-1 ||J rho||^2 (1 + 1e-10) on every sample
    double max_resolvent_norm = 0.0;        // max ||beta (M + beta I)^{-1}||
    bool decays() const { return median_ratio < 1.0 && gamma_ci.lo > 0.0; }
};

struct ControlProbeResult {
    std::vector<ControlBetaResult> betas;
    std::optional<std::size_t> best;  // first beta whose residual decays
    std::size_t n_paths = 0;
    int n_cycles = 0;
    int galerkin_kmax = 0;
};

/// Alternating control construction: on [2n, 2n+1] the residual is pushed through
/// beta (M_{2n,2n+1} + beta I)^{-1} J_{2n,2n+1}, on [2n+1, 2n+2] it is transported
/// freely. Gram matrices are shared across the beta sweep. Runs on the integrator
/// lattice, which is the Galerkin space of the probe.
ControlProbeResult control_probe(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0,
                                 const SpectralField& xi, const ControlProbeConfig& cfg);

/// Spectral norm of beta (M + beta I)^{-1}, from an eigen-decomposition of M.
double resolvent_norm(const Eigen::MatrixXd& M, double beta);

struct ContractionReport {
    bool holds = true;
    double X = 0.0;          // constrained minimum deciding the event A_eps = {X >= eps}
    bool on_event = false;
    double max_ratio = 0.0;  // max lhs / rhs over probes
    std::size_t probes = 0;
};

/// beta ||P_N (beta I + M)^{-1} phi|| <= ||phi|| max(alpha, sqrt(beta/eps)) on A_eps and
/// <= ||phi|| otherwise, checked on random phi.
ContractionReport low_mode_contraction_check(const MalliavinGram& M, double beta, const SalphaN& region,
                                             double epsilon, std::size_t n_probes = 1000, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Mixing and irreducibility

/// Bounded observables: "coord:k1,k2" (coefficient of ê_k clipped through tanh),
/// "expnorm:eta" (exp(-eta ||w||^2)), "ball:r" (smoothed indicator of ||w|| <= r).
class Observable {
public:
    static Observable parse(const std::string& id);
    const std::string& id() const { return id_; }
    double operator()(int kmax, const Eigen::VectorXd& w) const;

private:
    enum class Kind { coordinate, exp_norm, ball };
    Observable(std::string id, Kind k, ModeIndex mode, double param) : id_(std::move(id)), kind_(k), mode_(mode), param_(param) {}
    std::string id_;
    Kind kind_;
    ModeIndex mode_;
    double param_;
};

struct MixingOptions {
    double T = 20.0;
    double sample_every = 1.0;
    std::size_t n_paths = 500;
    bool independent_seeds = true;  // false: ensemble b reuses ensemble a's increments
    std::size_t bootstrap = 500;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

struct ObservableSeries {
    std::string id;
    std::vector<double> diff;  // mean_a - mean_b
    std::vector<double> se;
    std::vector<stats::Interval> ci;  // bootstrap percentile interval of the difference
    bool signal = false;              // CI excludes 0 at the first 3 or more sample times after t = 0
    std::size_t window = 0;           // number of leading times used in the fit (t = 0 only when nonzero)
    double gamma = 0.0;
    stats::Interval gamma_ci;
};

struct MixingEstimate {
    std::vector<double> times;
    std::vector<ObservableSeries> series;
    std::size_t n_paths = 0;
};

MixingEstimate mixing_rate(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0_a,
                           const SpectralField& w0_b, const std::vector<Observable>& observables,
                           const MixingOptions& opt);

struct IrreducibilityOptions {
    double radius = 2.0;       // initial conditions with ||w0|| <= radius
    double gamma_ball = 0.5;
    std::vector<double> times{1, 2, 5, 10, 20};
    std::size_t n_initials = 10;
    std::size_t n_paths = 200;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

struct IrreducibilityEstimate {
    std::vector<double> times;
    std::vector<std::vector<std::size_t>> hits;  // [time][initial]
    std::vector<double> min_probability;         // min over initials
    std::vector<stats::Interval> min_ci;         // Wilson CI of the minimising initial
    std::optional<std::size_t> first_positive;   // first time whose min CI excludes 0
    std::size_t n_paths = 0;
};

IrreducibilityEstimate irreducibility_probe(const IntegratorSpec& spec, const NoiseModel& noise,
                                            const IrreducibilityOptions& opt);

}  // namespace nsm
