#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "nsm/noise.hpp"
#include "nsm/spectral.hpp"

namespace nsm {

/// Semi-implicit exponential Euler-Maruyama on the Galerkin lattice:
///   w+ = exp(-nu |k|^2 dt) (w + dt B(Kw, w) + sum_j q_j(w) dW_j ê_j)
struct IntegratorSpec {
    int kmax = 21;
    int grid = 0;  // 0: smallest alias-free FFT size
    double nu = 0.1;
    double dt = 1e-3;
    bool nonlinear = true;  // false switches B off (linear test regimes)
    double blowup_guard = 1e6;
};

/// A realised trajectory: every Brownian increment plus field snapshots.
struct PathRecord {
    int kmax = 0;
    double dt = 0.0;
    std::int64_t steps = 0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    Eigen::MatrixXd increments;  // steps x d, row m drives step m -> m+1
    Eigen::MatrixXd q_values;    // steps x d, q_j(w_m)
    std::int64_t snapshot_stride = 1;
    std::vector<std::int64_t> snapshot_steps;
    std::vector<Eigen::VectorXd> snapshots;

    std::size_t d() const { return std::size_t(increments.cols()); }
    double time(std::int64_t step) const { return double(step) * dt; }
    const Eigen::VectorXd& final_state() const { return snapshots.back(); }
};

/// Brownian increments for (seed, path index): N(0, dt) each, from the
/// "increments" counter stream.
Eigen::MatrixXd brownian_increments(std::uint64_t seed, std::uint64_t path_index, std::int64_t steps,
                                    std::size_t d, double dt, std::string_view purpose = "increments");

/// Levy-consistent halving: each coarse increment dW splits into
/// dW/2 +- sqrt(dt/4) Z, Z from the "refine" stream.
Eigen::MatrixXd refine_increments(const Eigen::MatrixXd& coarse, double dt, std::uint64_t seed,
                                  std::uint64_t path_index);

class Integrator {
public:
    Integrator(IntegratorSpec spec, NoiseModel noise);

    const IntegratorSpec& spec() const { return spec_; }
    const NoiseModel& noise() const { return noise_; }
    int dim() const { return lattice::size(spec_.kmax); }
    int kmax() const { return spec_.kmax; }
    /// Number of steps covering [0, T]; T must be a multiple of dt.
    std::int64_t steps_for(double T) const;

    SpectralField step(const SpectralField& w, const Eigen::VectorXd& dW);

    /// In-place step; `grids` must hold prepare(w) when the nonlinearity is on.
    void advance(Eigen::VectorXd& w, const AdvectionGrids& grids, const Eigen::VectorXd& dW);

    /// Linearised step of every column of V about state w:
    ///   v+ = E (v + dt B~(w, v) + sum_j (Dq_j(w) v) dW_j ê_j)
    void advance_linear(const Eigen::VectorXd& w, const AdvectionGrids& grids, const Eigen::VectorXd& dW,
                        Eigen::Ref<Eigen::MatrixXd> V);

    void prepare(const Eigen::VectorXd& w, AdvectionGrids& grids);

    PathRecord simulate(const SpectralField& w0, double T, std::uint64_t seed, std::uint64_t path_index = 0,
                        std::int64_t snapshot_stride = 1);
    /// Same as simulate but driven by caller-provided increments (steps x d).
    PathRecord replay(const SpectralField& w0, const Eigen::MatrixXd& increments, std::uint64_t seed = 0,
                      std::uint64_t path_index = 0, std::int64_t snapshot_stride = 1);

    /// Streams states w_0 .. w_steps without storing them; observer(m, w_m).
    void run(const Eigen::VectorXd& w0, const Eigen::MatrixXd& increments,
             const std::function<void(std::int64_t, const Eigen::VectorXd&)>& observer);

    /// Calls visit(m, w_m, grids(w_m)) for s <= m < t, rebuilding states from
    /// the nearest snapshot when the path was recorded with stride > 1.
    void walk(const PathRecord& path, std::int64_t s, std::int64_t t,
              const std::function<void(std::int64_t, const Eigen::VectorXd&, const AdvectionGrids&)>& visit);

    Eigen::VectorXd state_at(const PathRecord& path, std::int64_t step);

    /// J_{s,t} xi along the recorded path.
    SpectralField linearized_flow(const PathRecord& path, std::int64_t s_step, std::int64_t t_step,
                                  const SpectralField& xi);
    /// Columns propagated together: J_{s,t} X.
    Eigen::MatrixXd linearized_flow(const PathRecord& path, std::int64_t s_step, std::int64_t t_step,
                                    const Eigen::MatrixXd& X);

private:
    void check_guard(std::int64_t step, const Eigen::VectorXd& w) const;

    IntegratorSpec spec_;
    NoiseModel noise_;
    std::unique_ptr<SpectralTransform> transform_;
    Eigen::VectorXd decay_;               // exp(-nu |k|^2 dt)
    std::vector<int> forced_index_;       // lattice index of each forced mode
    Eigen::VectorXd work_, q_, dq_;
};

struct FdCheckResult {
    std::vector<double> eps;
    std::vector<double> errors;  // || (Phi(w0 + eps xi) - Phi(w0))/eps - J xi ||
    double slope = 0.0;          // log-log fit of error against eps
    double jacobian_norm = 0.0;  // ||J_{0,T} xi||
};

/// Finite-difference validation of the linearised flow on one noise path.
FdCheckResult jacobian_fd_check(Integrator& integ, const SpectralField& w0, const SpectralField& xi,
                                const std::vector<double>& eps_list, double T, std::uint64_t seed,
                                std::uint64_t path_index = 0);

struct EnergyBalance {
    double dt = 0.0;
    double lhs_mean = 0.0;  // E||w_T||^2 - ||w0||^2 + 2 nu E int ||w||_1^2
    double lhs_se = 0.0;
    double rhs_mean = 0.0;  // E int sum_j q_j^2
    double rhs_se = 0.0;
    double residual_mean = 0.0;
    double residual_se = 0.0;
};

struct EnergyCheckResult {
    EnergyBalance coarse;     // step dt
    EnergyBalance fine;       // step dt/2 on refined increments of the same paths
    double richardson = 0.0;  // 2 fine - coarse residual
    double richardson_se = 0.0;
    std::size_t paths = 0;
};

/// Ito energy identity E||w_T||^2 - ||w0||^2 + 2 nu int E||w||_1^2 = int E sum q_j^2.
EnergyCheckResult energy_check(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0,
                               double T, std::size_t n_paths, std::uint64_t seed);

}  // namespace nsm
